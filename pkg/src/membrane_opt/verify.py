"""Independent verification: brute-force optima, level sets, connectivity.

Everything here deliberately avoids the production solve path: the
enumeration oracle uses a dense LAPACK generalized eigensolve, the contour
extractor works from raw nodal values, and the connectivity and regularity
checks are plain graph and difference computations.
"""

from __future__ import annotations

from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass
from itertools import combinations

import numpy as np
import scipy.linalg

from .eigen import SolverOptions
from .grid import Disk, Grid, domain_volume
from .optimizer import (
    DensityField,
    LevelSetPartition,
    ProblemSpec,
    minimize,
    target_high_mass,
)
from .operators import OperatorSpec, assemble_stiffness

__all__ = [
    "ContourSet",
    "OracleCandidate",
    "OracleResult",
    "Polyline",
    "RegularityReport",
    "contour_csv",
    "count_components",
    "enumerate_optimal",
    "extract_contour",
    "pure_difference_sup",
    "radial_deviation",
    "regularity_trend",
    "sublevel_check",
]

ORACLE_NODE_CAP = 20


# ---------------------------------------------------------------------------
# brute-force global optimum

@dataclass(frozen=True)
class OracleCandidate:
    eigenvalue: float
    high_nodes: tuple[int, ...]
    fractional_node: int | None


@dataclass(frozen=True, eq=False)
class OracleResult:
    density: DensityField
    eigenvalue: float
    eigenvector: np.ndarray
    partition: LevelSetPartition
    ranking: tuple[OracleCandidate, ...]


def _dense_smallest(a_dense: np.ndarray, weights: np.ndarray) -> tuple[float, np.ndarray]:
    mu, vecs = scipy.linalg.eigh(a_dense, np.diag(weights))
    phi = vecs[:, 0]
    peak = int(np.argmax(np.abs(phi)))
    if phi[peak] < 0.0:
        phi = -phi
    return float(mu[0]), phi


def enumerate_optimal(grid: Grid, spec: ProblemSpec,
                      node_cap: int = ORACLE_NODE_CAP) -> OracleResult:
    """Exhaustive minimum over two-valued-plus-one-fractional densities.

    Places the upper bound on every k-subset of nodes (k from the high-set
    volume budget) and, when the budget does not divide evenly, tries the
    fractional node at every remaining position.  Each candidate is solved
    densely.  Requires uniform node volumes, so the per-node budget is one
    cell; the grid must stay at or below the node cap.
    """
    n = grid.node_count
    if n > node_cap:
        raise ValueError(f"oracle scale exceeded: {n} nodes > cap {node_cap}")
    cells = grid.cell_volumes
    cell = float(cells[0])
    if float(np.max(np.abs(cells - cell))) > 1e-15 * cell:
        raise ValueError("oracle requires uniform node volumes (flat background)")

    budget = target_high_mass(spec, domain_volume(grid))
    ratio = budget / cell
    k = int(np.floor(ratio + 1e-12))
    theta = ratio - k
    if theta < 1e-12:
        theta = 0.0
    elif theta > 1.0 - 1e-12:
        k += 1
        theta = 0.0
    lo, hi = spec.rho_min, spec.rho_max
    frac_value = lo + (hi - lo) * theta

    a_dense = assemble_stiffness(grid, OperatorSpec(order=spec.order)).to_dense()
    e2w = grid.e2w

    ranking: list[tuple[float, tuple[int, ...], int, np.ndarray]] = []
    for subset in combinations(range(n), k):
        rho = np.full(n, lo)
        rho[list(subset)] = hi
        if theta > 0.0:
            for extra in range(n):
                if extra in subset:
                    continue
                trial = rho.copy()
                trial[extra] = frac_value
                mu, phi = _dense_smallest(a_dense, trial * e2w)
                ranking.append((mu, subset, extra, phi))
        else:
            mu, phi = _dense_smallest(a_dense, rho * e2w)
            ranking.append((mu, subset, -1, phi))

    ranking.sort(key=lambda item: (item[0], item[1], item[2]))
    best_mu, best_subset, best_extra, best_phi = ranking[0]

    rho = np.full(n, lo)
    rho[list(best_subset)] = hi
    fractional = None if best_extra < 0 else int(best_extra)
    if fractional is not None:
        others = float(rho @ cells) - rho[fractional] * cell
        rho[fractional] = (spec.mass - others) / cell
    rho.setflags(write=False)

    taken = set(best_subset)
    if fractional is not None:
        taken.add(fractional)
    low = np.array([i for i in range(n) if i not in taken], dtype=np.int64)
    high = np.array(sorted(best_subset), dtype=np.int64)
    if fractional is not None:
        threshold = float(best_phi[fractional])
    elif high.size:
        by_phi2 = min(high, key=lambda i: (best_phi[i] ** 2, i))
        threshold = float(best_phi[int(by_phi2)])
    else:
        threshold = float(np.max(np.abs(best_phi)))

    return OracleResult(
        density=DensityField(grid=grid, values=rho),
        eigenvalue=best_mu,
        eigenvector=best_phi,
        partition=LevelSetPartition(
            low_nodes=low, high_nodes=high,
            threshold=threshold, fractional_node=fractional,
        ),
        ranking=tuple(
            OracleCandidate(mu, subset, None if extra < 0 else extra)
            for mu, subset, extra, _ in ranking
        ),
    )


# ---------------------------------------------------------------------------
# structure checks

def sublevel_check(phi: np.ndarray, partition: LevelSetPartition,
                   tol: float = 1e-14) -> tuple[bool, float]:
    """Is the low region a sub-level set of phi^2?  Returns (ok, margin).

    The margin is max over the low region of phi^2 minus min over the high
    region; positive means a violation.  The fractional node sits in
    neither region and is exempt.
    """
    phi2 = np.asarray(phi, dtype=float) ** 2
    if partition.low_nodes.size == 0 or partition.high_nodes.size == 0:
        return True, 0.0
    margin = float(np.max(phi2[partition.low_nodes]) - np.min(phi2[partition.high_nodes]))
    return margin <= tol, margin


def count_components(nodes: Iterable[int] | np.ndarray, grid: Grid) -> int:
    """Connected components of a node set under the 2d-neighbor stencil graph."""
    members = np.zeros(grid.node_count, dtype=bool)
    idx = np.asarray(list(nodes) if not isinstance(nodes, np.ndarray) else nodes,
                     dtype=np.int64)
    if idx.size == 0:
        return 0
    members[idx] = True
    seen = np.zeros(grid.node_count, dtype=bool)
    count = 0
    for start in idx:
        start = int(start)
        if seen[start]:
            continue
        count += 1
        stack = [start]
        seen[start] = True
        while stack:
            i = stack.pop()
            for j in grid.neighbors[i]:
                j = int(j)
                if j >= 0 and members[j] and not seen[j]:
                    seen[j] = True
                    stack.append(j)
    return count


# ---------------------------------------------------------------------------
# contour extraction (two dimensions)

@dataclass(frozen=True, eq=False)
class Polyline:
    points: np.ndarray
    closed: bool


@dataclass(frozen=True, eq=False)
class ContourSet:
    """Level curves of phi at one threshold plus the component count of the
    strict super-level node set under 4-connectivity."""

    polylines: tuple[Polyline, ...]
    region_components: int

    @property
    def closed_count(self) -> int:
        return sum(1 for p in self.polylines if p.closed)


def _key(u: float, v: float) -> tuple[float, float]:
    return (round(u, 9), round(v, 9))


def extract_contour(phi: np.ndarray, level: float, grid: Grid) -> ContourSet:
    """Marching squares on the interior lattice at the given level.

    Only cells whose four corners are all interior nodes contribute, with
    linear interpolation along edges; nodes with phi <= level count as the
    inside.  Segments are chained into polylines; a polyline is closed when
    it returns to its start.  Points are physical coordinates.
    """
    if grid.dimension != 2:
        raise ValueError("contour extraction requires a two-dimensional grid")
    phi = np.asarray(phi, dtype=float)
    n0, n1 = grid.lattice_cells
    field = np.full((n0 + 1, n1 + 1), np.nan)
    field[grid.nodes[:, 0], grid.nodes[:, 1]] = phi

    segments: list[tuple[tuple[float, float], tuple[float, float]]] = []

    def interp(pa, fa, pb, fb):
        t = (level - fa) / (fb - fa)
        return (pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1]))

    for i in range(n0):
        for j in range(n1):
            corners = ((i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1))
            values = [field[c] for c in corners]
            if any(np.isnan(v) for v in values):
                continue
            inside = [v <= level for v in values]
            if all(inside) or not any(inside):
                continue
            crossings = []
            for a in range(4):
                b = (a + 1) % 4
                if inside[a] != inside[b]:
                    crossings.append(
                        (a, interp(corners[a], values[a], corners[b], values[b]))
                    )
            if len(crossings) == 2:
                segments.append((crossings[0][1], crossings[1][1]))
            elif len(crossings) == 4:
                # saddle: connect by the cell-average side
                center_inside = (sum(values) / 4.0) <= level
                first_inside = inside[0]
                if center_inside == first_inside:
                    pairs = ((0, 3), (1, 2))
                else:
                    pairs = ((0, 1), (2, 3))
                for a, b in pairs:
                    segments.append((crossings[a][1], crossings[b][1]))

    polylines = _chain_segments(segments)
    origin = np.asarray(grid.origin)
    h = grid.spacing
    out = []
    for points, closed in polylines:
        arr = origin + np.asarray(points) * h
        arr.setflags(write=False)
        out.append(Polyline(points=arr, closed=closed))

    region = np.nonzero(phi > level)[0]
    return ContourSet(
        polylines=tuple(out),
        region_components=count_components(region, grid),
    )


def _chain_segments(segments) -> list[tuple[list[tuple[float, float]], bool]]:
    links: dict[tuple[float, float], list[tuple[float, float]]] = {}
    for a, b in segments:
        ka, kb = _key(*a), _key(*b)
        if ka == kb:
            continue
        links.setdefault(ka, []).append(kb)
        links.setdefault(kb, []).append(ka)

    used: set[frozenset] = set()
    polylines: list[tuple[list[tuple[float, float]], bool]] = []

    def walk(start):
        path = [start]
        current = start
        while True:
            step = None
            for nxt in links[current]:
                edge = frozenset((current, nxt))
                if edge not in used:
                    step = nxt
                    used.add(edge)
                    break
            if step is None:
                return path
            path.append(step)
            current = step

    endpoints = sorted(k for k, v in links.items() if len(v) == 1)
    for start in endpoints:
        if all(frozenset((start, nxt)) in used for nxt in links[start]):
            continue
        path = walk(start)
        if len(path) >= 2:
            polylines.append((path, False))
    for start in sorted(links):
        if all(frozenset((start, nxt)) in used for nxt in links[start]):
            continue
        path = walk(start)
        if len(path) >= 2:
            closed = path[0] == path[-1] or _key(*path[0]) == _key(*path[-1])
            if closed and path[0] != path[-1]:
                path.append(path[0])
            polylines.append((path, closed))
    return polylines


def contour_csv(contours: ContourSet, header_lines: Sequence[str] = ()) -> str:
    """Polylines as CSV rows (curve id, x, y); closed ids in a header comment."""
    closed_ids = [k for k, p in enumerate(contours.polylines) if p.closed]
    lines = [f"# {text}" for text in header_lines]
    lines.append(f"# closed_curves={closed_ids!r}")
    lines.append(f"# region_components={contours.region_components}")
    lines.append("curve,x,y")
    for k, poly in enumerate(contours.polylines):
        for x, y in poly.points:
            lines.append(f"{k},{float(x)!r},{float(y)!r}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# discrete regularity

def pure_difference_sup(grid: Grid, values: np.ndarray, order: int = 2) -> float:
    """Sup over nodes and axes of |pure difference| / h^order.

    Missing neighbors contribute the Dirichlet value zero, matching the
    stencil operator.  Order 1 uses forward differences, order 2 the
    centered second difference on each axis.
    """
    if order not in (1, 2):
        raise ValueError("difference order must be 1 or 2")
    v = np.asarray(values, dtype=float)
    h = grid.spacing
    worst = 0.0
    for ax in range(grid.dimension):
        minus = grid.neighbors[:, 2 * ax]
        plus = grid.neighbors[:, 2 * ax + 1]
        v_minus = np.where(minus >= 0, v[minus], 0.0)
        v_plus = np.where(plus >= 0, v[plus], 0.0)
        if order == 1:
            worst = max(worst, float(np.max(np.abs(v_plus - v))) / h)
        else:
            worst = max(worst, float(np.max(np.abs(v_minus - 2.0 * v + v_plus))) / h**2)
    return worst


@dataclass(frozen=True)
class RegularityReport:
    """Sup of pure second differences per refinement level and their growth."""

    levels: tuple[float, ...]
    sups: tuple[float, ...]
    ratios: tuple[float, ...]

    def bounded(self, threshold: float = 1.5) -> bool:
        return all(r <= threshold for r in self.ratios)


def regularity_trend(problem_at: Callable[[float], ProblemSpec],
                     levels: Sequence[float],
                     opts: SolverOptions = SolverOptions(),
                     max_alternations: int = 200) -> RegularityReport:
    """Solve the same problem at each spacing and track second differences.

    The converged eigenfunction is rescaled to unit sup norm before
    differencing so levels are comparable.  Bounded growth ratios are the
    discrete signal of a Lipschitz gradient; a kink profile doubles its
    ratio at every halving and is caught by the same machinery.
    """
    sups = []
    for h in levels:
        spec = problem_at(h)
        _, pair, _, _ = minimize(spec, opts=opts, max_alternations=max_alternations)
        phi = pair.vector / np.max(np.abs(pair.vector))
        sups.append(pure_difference_sup(spec.grid, phi, order=2))
    ratios = tuple(sups[k + 1] / sups[k] for k in range(len(sups) - 1))
    return RegularityReport(levels=tuple(levels), sups=tuple(sups), ratios=ratios)


def radial_deviation(nodes: Iterable[int] | np.ndarray, grid: Grid) -> float:
    """Fraction of nodes disagreeing with the majority vote of their radius bin.

    Bins have width h around the disk center; zero means the set is a union
    of full rings, one half means every ring is split evenly.
    """
    shape = grid.spec.shape
    if not isinstance(shape, Disk):
        raise ValueError("radial deviation requires a disk-shaped grid")
    members = np.zeros(grid.node_count, dtype=bool)
    idx = np.asarray(list(nodes) if not isinstance(nodes, np.ndarray) else nodes,
                     dtype=np.int64)
    if idx.size:
        members[idx] = True
    radii = np.linalg.norm(grid.coordinates() - np.asarray(shape.center), axis=1)
    bins = np.floor(radii / grid.spacing).astype(np.int64)
    disagreement = 0
    for b in np.unique(bins):
        in_bin = bins == b
        hits = int(np.count_nonzero(members[in_bin]))
        total = int(np.count_nonzero(in_bin))
        disagreement += min(hits, total - hits)
    return disagreement / grid.node_count
