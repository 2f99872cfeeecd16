"""Alternating minimization of the first eigenvalue over constrained densities.

The density lives in the box [rho_min, rho_max] with a prescribed total
mass.  The outer loop alternates two exact half-steps: solve the weighted
eigenproblem for the current density, then redistribute the density by the
bathtub principle on the squared eigenfunction (upper bound where phi^2 is
largest, lower bound elsewhere, one fractional node to meet the mass
exactly).  Each half-step minimizes the Rayleigh quotient in one argument,
so the eigenvalue sequence is non-increasing.  Fixed points are two-valued
densities whose low region is a sub-level set of the eigenfunction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .eigen import EigenPair, SolverError, SolverOptions, first_eigenpair
from .grid import Grid, domain_volume
from .operators import OperatorSpec, assemble_stiffness, assemble_weight

__all__ = [
    "DensityField",
    "LevelSetPartition",
    "OptimizationTrace",
    "ProblemSpec",
    "Solution",
    "TraceRecord",
    "bathtub_rearrange",
    "classify_solutions",
    "conformal_bounds",
    "minimize",
    "multi_start",
    "seeded_density",
    "target_high_mass",
    "uniform_density",
]

CONVERGED = "converged"
CYCLING = "cycling"
MAX_ITER = "max-iter"

_MASS_RTOL = 1e-12
_FEAS_RTOL = 1e-12


def conformal_bounds(bound_exponent: float, exponent: int = 2) -> tuple[float, float]:
    """Density box (e^(-nA), e^(nA)) from the sup-norm bound A on the factor."""
    if not math.isfinite(bound_exponent):
        raise ValueError("bound exponent must be finite")
    if bound_exponent < 0.0:
        raise ValueError(f"bound exponent must be >= 0, got {bound_exponent}")
    if exponent < 2:
        raise ValueError(f"exponent must be an integer >= 2, got {exponent}")
    return math.exp(-exponent * bound_exponent), math.exp(exponent * bound_exponent)


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """Grid, density box, prescribed mass, and operator order.

    ``exponent`` is the n in rho = e^(n u); it only enters the recovery of
    the conformal factor u = log(rho) / n and the derived bounds.
    """

    grid: Grid
    rho_min: float
    rho_max: float
    mass: float
    order: int = 2
    exponent: int = 2

    def __post_init__(self) -> None:
        if not 0.0 < self.rho_min <= self.rho_max < math.inf:
            raise ValueError(
                f"need 0 < rho_min <= rho_max < inf, got ({self.rho_min}, {self.rho_max})"
            )
        if self.order not in (2, 4):
            raise ValueError(f"operator order must be 2 or 4, got {self.order}")
        vol = domain_volume(self.grid)
        slack = _FEAS_RTOL * max(abs(self.mass), 1.0)
        if not (self.rho_min * vol - slack <= self.mass <= self.rho_max * vol + slack):
            raise ValueError(
                "mass outside conformal box: need "
                f"{self.rho_min * vol:.6g} <= M <= {self.rho_max * vol:.6g}, "
                f"got M = {self.mass:.6g}"
            )

    @classmethod
    def from_exponent_bound(cls, grid: Grid, bound_exponent: float, mass: float,
                            exponent: int = 2, order: int = 2) -> "ProblemSpec":
        lo, hi = conformal_bounds(bound_exponent, exponent)
        return cls(grid=grid, rho_min=lo, rho_max=hi, mass=mass,
                   order=order, exponent=exponent)

    @property
    def volume(self) -> float:
        return domain_volume(self.grid)


def target_high_mass(spec: ProblemSpec, vol: float | None = None) -> float:
    """Background volume the upper density value must occupy to meet the mass.

    Solves rho_min (vol - V) + rho_max V = M for V; zero when the box is
    a single point.
    """
    if vol is None:
        vol = spec.volume
    if spec.rho_max == spec.rho_min:
        return 0.0
    v_high = (spec.mass - spec.rho_min * vol) / (spec.rho_max - spec.rho_min)
    slack = _FEAS_RTOL * vol
    if v_high < -slack or v_high > vol + slack:
        raise ValueError(
            f"mass outside conformal box: high-set volume {v_high:.6g} "
            f"not in [0, {vol:.6g}]"
        )
    return float(min(max(v_high, 0.0), vol))


@dataclass(frozen=True, eq=False)
class DensityField:
    """Per-node density with its grid; mass is measured against e^(2w) h^d."""

    grid: Grid
    values: np.ndarray

    @property
    def mass(self) -> float:
        return float(self.values @ self.grid.cell_volumes)

    def conformal_factor(self, exponent: int = 2) -> np.ndarray:
        """Recover u from rho = e^(n u)."""
        return np.log(self.values) / exponent

    def fractional_nodes(self, spec: ProblemSpec) -> np.ndarray:
        """Indices strictly between the box bounds (up to 1e-12 relatively)."""
        lo, hi = spec.rho_min, spec.rho_max
        gap = hi - lo
        if gap == 0.0:
            return np.empty(0, dtype=np.int64)
        inner = (self.values > lo + 1e-12 * gap) & (self.values < hi - 1e-12 * gap)
        return np.nonzero(inner)[0]

    def validate(self, spec: ProblemSpec, two_valued: bool = False) -> None:
        lo, hi = spec.rho_min, spec.rho_max
        slack = 1e-12 * max(hi, 1.0)
        if np.any(self.values < lo - slack) or np.any(self.values > hi + slack):
            raise ValueError("density violates its box bounds")
        if abs(self.mass - spec.mass) > _MASS_RTOL * abs(spec.mass):
            raise ValueError(
                f"density mass {self.mass!r} misses target {spec.mass!r}"
            )
        if two_valued and self.fractional_nodes(spec).size > 1:
            raise ValueError("more than one fractional node")


def uniform_density(spec: ProblemSpec) -> DensityField:
    """The feasible constant density M / |Omega|."""
    level = spec.mass / spec.volume
    values = np.full(spec.grid.node_count, level)
    values.setflags(write=False)
    return DensityField(grid=spec.grid, values=values)


def seeded_density(spec: ProblemSpec, seed: int) -> DensityField:
    """Random feasible two-valued density: bathtub fill on random scores."""
    rng = np.random.default_rng(seed)
    scores = rng.random(spec.grid.node_count) + 0.5
    density, _ = bathtub_rearrange(scores, spec.grid, spec)
    return density


@dataclass(frozen=True, eq=False)
class LevelSetPartition:
    """Low/high split of the nodes with the threshold eigenfunction value."""

    low_nodes: np.ndarray
    high_nodes: np.ndarray
    threshold: float
    fractional_node: int | None = None

    def signature(self) -> tuple:
        return (tuple(int(i) for i in self.high_nodes), self.fractional_node)

    @property
    def low_count(self) -> int:
        return int(self.low_nodes.size)

    @property
    def high_count(self) -> int:
        return int(self.high_nodes.size)


def bathtub_rearrange(phi: np.ndarray, grid: Grid,
                      spec: ProblemSpec) -> tuple[DensityField, LevelSetPartition]:
    """Mass-constrained box maximizer of sum(phi^2 rho e^(2w) h^d).

    Nodes ranked by (phi^2, node index) descending receive the upper bound
    until the high-set volume budget is spent; the node where the budget
    runs out mid-cell takes the unique intermediate value that meets the
    mass exactly and is reported as the fractional node.  The threshold is
    the phi value at the fractional node, or at the last upper-bound node
    when the budget divides evenly.
    """
    phi = np.asarray(phi, dtype=float)
    if not np.all(np.isfinite(phi)):
        raise ValueError("eigenfunction values must be finite")
    if not np.any(phi):
        raise ValueError("eigenfunction must not vanish identically")
    n = grid.node_count
    if phi.shape != (n,):
        raise ValueError(f"phi has shape {phi.shape}, grid has {n} nodes")

    cells = grid.cell_volumes
    vol = float(np.sum(cells))
    budget = target_high_mass(spec, vol)
    lo, hi = spec.rho_min, spec.rho_max

    key = phi * phi
    order = np.lexsort((np.arange(n), -key))

    rho = np.full(n, lo)
    high: list[int] = []
    fractional: int | None = None
    remaining = budget
    for idx in order:
        idx = int(idx)
        cell = float(cells[idx])
        if remaining >= cell * (1.0 - 1e-12):
            rho[idx] = hi
            high.append(idx)
            remaining -= cell
        elif remaining * (hi - lo) > 1e-14 * spec.mass:
            # skipping this much budget would miss the mass target; the
            # threshold is mass-relative so huge boxes stay exact too
            fractional = idx
            rho[idx] = lo + (hi - lo) * (remaining / cell)
            remaining = 0.0
            break
        else:
            break

    if fractional is not None:
        # pin the mass exactly by recomputing the fractional value
        others = float(rho @ cells) - rho[fractional] * float(cells[fractional])
        value = (spec.mass - others) / float(cells[fractional])
        rho[fractional] = min(max(value, lo), hi)

    if fractional is not None:
        threshold = float(phi[fractional])
    elif high:
        threshold = float(phi[high[-1]])
    else:
        threshold = float(phi[int(order[0])])

    high_arr = np.array(sorted(high), dtype=np.int64)
    taken = set(high)
    if fractional is not None:
        taken.add(fractional)
    low_arr = np.array([i for i in range(n) if i not in taken], dtype=np.int64)

    rho.setflags(write=False)
    high_arr.setflags(write=False)
    low_arr.setflags(write=False)
    density = DensityField(grid=grid, values=rho)
    partition = LevelSetPartition(
        low_nodes=low_arr,
        high_nodes=high_arr,
        threshold=threshold,
        fractional_node=fractional,
    )
    return density, partition


@dataclass(frozen=True)
class TraceRecord:
    """One outer iteration; set_change counts the symmetric difference of
    the low region against the previous iteration (its size on the first)."""

    iteration: int
    eigenvalue: float
    threshold: float
    set_change: int
    residual: float


@dataclass(eq=False)
class OptimizationTrace:
    records: list[TraceRecord] = field(default_factory=list)
    status: str = MAX_ITER

    def eigenvalues(self) -> np.ndarray:
        return np.array([r.eigenvalue for r in self.records])

    def is_monotone(self, slack: float = 1e-9) -> bool:
        mus = self.eigenvalues()
        return bool(np.all(mus[1:] <= mus[:-1] + slack * np.abs(mus[:-1])))

    def __len__(self) -> int:
        return len(self.records)


def _resolve_init(spec: ProblemSpec, init) -> DensityField:
    if init is None:
        return uniform_density(spec)
    if isinstance(init, str):
        if init == "uniform":
            return uniform_density(spec)
        raise ValueError(f"unknown initial density keyword {init!r}")
    if isinstance(init, (int, np.integer)) and not isinstance(init, bool):
        return seeded_density(spec, int(init))
    if isinstance(init, DensityField):
        init.validate(spec)
        return init
    raise TypeError(f"unsupported initial density: {init!r}")


def minimize(spec: ProblemSpec, init=None, opts: SolverOptions = SolverOptions(),
             max_alternations: int = 200,
             ) -> tuple[DensityField, EigenPair, LevelSetPartition, OptimizationTrace]:
    """Alternate eigen solve and bathtub rearrangement to a fixed point.

    ``init`` may be a DensityField, an integer seed for a random two-valued
    start, or None/"uniform" for the constant density.  Stops when the low
    region repeats with a settled eigenvalue (converged), when it matches
    the region from two iterations earlier but not the last one (cycling),
    or at the iteration cap.  The power iteration is warm-started with the
    previous eigenvector, which keeps the recorded eigenvalue sequence
    non-increasing up to solver tolerance.
    """
    if max_alternations < 1:
        raise ValueError("iteration cap must be >= 1")
    grid = spec.grid
    stiffness = assemble_stiffness(grid, OperatorSpec(order=spec.order))
    rho = _resolve_init(spec, init)

    trace = OptimizationTrace()
    sig_prev: tuple | None = None
    sig_prev2: tuple | None = None
    low_prev: np.ndarray | None = None
    mu_prev: float | None = None
    warm: np.ndarray | None = None

    density = rho
    pair: EigenPair | None = None
    partition: LevelSetPartition | None = None
    for it in range(max_alternations):
        weights = assemble_weight(grid, rho.values)
        try:
            pair = first_eigenpair(stiffness, weights, opts, start=warm)
        except SolverError as exc:
            # hand the trace so far to the caller for partial reporting
            exc.partial_trace = trace  # type: ignore[attr-defined]
            raise
        warm = pair.vector
        density, partition = bathtub_rearrange(pair.vector, grid, spec)
        if low_prev is None:
            set_change = int(partition.low_nodes.size)
        else:
            set_change = int(np.setxor1d(partition.low_nodes, low_prev).size)
        trace.records.append(TraceRecord(
            iteration=it,
            eigenvalue=pair.eigenvalue,
            threshold=partition.threshold,
            set_change=set_change,
            residual=pair.residual,
        ))
        sig = partition.signature()
        if spec.rho_min == spec.rho_max:
            trace.status = CONVERGED
            break
        if sig_prev is not None and sig == sig_prev and mu_prev is not None \
                and abs(pair.eigenvalue - mu_prev) <= opts.eig_rel_tol * abs(pair.eigenvalue):
            trace.status = CONVERGED
            break
        if sig_prev2 is not None and sig == sig_prev2 and sig != sig_prev:
            trace.status = CYCLING
            break
        sig_prev2 = sig_prev
        sig_prev = sig
        low_prev = partition.low_nodes
        mu_prev = pair.eigenvalue
        rho = density

    density.validate(spec, two_valued=True)
    return density, pair, partition, trace


@dataclass(frozen=True, eq=False)
class Solution:
    """One solution class from a multi-start run; ``seed`` is the first
    member, ``member_seeds`` every seed that converged into the class."""

    seed: int
    density: DensityField
    eigenpair: EigenPair
    partition: LevelSetPartition
    trace: OptimizationTrace
    member_seeds: tuple[int, ...]


def classify_solutions(seeds, results, node_count: int,
                       mu_rtol: float = 1e-8,
                       set_tol: float = 0.01) -> tuple[list[Solution], list[int]]:
    """Group per-seed results into classes; returns (classes, label per seed).

    Two runs share a class when their eigenvalues agree relatively to
    mu_rtol and their low regions differ on at most set_tol of the nodes.
    """
    classes: list[Solution] = []
    members: list[list[int]] = []
    labels: list[int] = []
    max_diff = set_tol * node_count
    for seed, (density, pair, partition, trace) in zip(seeds, results):
        assigned = None
        for k, rep in enumerate(classes):
            close_mu = abs(pair.eigenvalue - rep.eigenpair.eigenvalue) <= \
                mu_rtol * max(abs(pair.eigenvalue), abs(rep.eigenpair.eigenvalue))
            diff = np.setxor1d(partition.low_nodes, rep.partition.low_nodes).size
            if close_mu and diff <= max_diff:
                assigned = k
                break
        if assigned is None:
            classes.append(Solution(
                seed=seed, density=density, eigenpair=pair,
                partition=partition, trace=trace, member_seeds=(seed,),
            ))
            members.append([seed])
            labels.append(len(classes) - 1)
        else:
            members[assigned].append(seed)
            labels.append(assigned)
    classes = [
        Solution(seed=c.seed, density=c.density, eigenpair=c.eigenpair,
                 partition=c.partition, trace=c.trace,
                 member_seeds=tuple(ms))
        for c, ms in zip(classes, members)
    ]
    return classes, labels


def multi_start(spec: ProblemSpec, seeds, opts: SolverOptions = SolverOptions(),
                max_alternations: int = 200,
                mu_rtol: float = 1e-8, set_tol: float = 0.01) -> list[Solution]:
    """Independent seeded runs, deduplicated into solution classes.

    Deterministic for a given seed list: runs execute in seed order and
    classes are keyed by their first seed.
    """
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise ValueError("need at least one seed")
    results = [minimize(spec, init=seed, opts=opts,
                        max_alternations=max_alternations) for seed in seeds]
    classes, _ = classify_solutions(seeds, results, spec.grid.node_count,
                                    mu_rtol=mu_rtol, set_tol=set_tol)
    return classes
