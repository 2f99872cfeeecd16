"""Masked rectilinear grids with an optional conformal background weight.

A grid is the set of lattice points of spacing ``h`` that lie strictly
inside a shape and strictly inside the lattice bounding box.  Nodes are
ordered lexicographically by integer coordinate, so construction is
bitwise deterministic.  Boundary values are never stored: a missing axis
neighbor means the homogeneous Dirichlet condition applies across that
edge.

Each node optionally carries a background weight ``e^(2w)`` evaluated
from a user-supplied exponent field ``w``; the measure of a node is then
``e^(2w) * h^d``.  Away from two dimensions the background must be flat
(``w = 0``): the second-order stiffness stencil is weight-free only in 2D.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from itertools import product

import numpy as np

__all__ = [
    "Annulus",
    "Disk",
    "Dumbbell",
    "Grid",
    "GridSpec",
    "Mask",
    "Rectangle",
    "annulus_spec",
    "box_spec",
    "build_grid",
    "disk_spec",
    "domain_volume",
    "dumbbell_spec",
    "grid_csv",
    "mirror_permutation",
    "square_spec",
]


# ---------------------------------------------------------------------------
# shapes

@dataclass(frozen=True)
class Rectangle:
    """The full bounding box; the lattice-boundary rule carves the walls."""

    assume_connected = True

    def contains(self, point: np.ndarray) -> bool:
        return True


@dataclass(frozen=True)
class Disk:
    """Open ball of given center and radius (any dimension)."""

    center: tuple[float, ...]
    radius: float

    assume_connected = True

    def contains(self, point: np.ndarray) -> bool:
        r2 = 0.0
        for x, c in zip(point, self.center):
            r2 += (x - c) ** 2
        return r2 < self.radius**2


@dataclass(frozen=True)
class Annulus:
    """Open spherical shell between two radii."""

    center: tuple[float, ...]
    inner_radius: float
    outer_radius: float

    assume_connected = True

    def contains(self, point: np.ndarray) -> bool:
        r2 = 0.0
        for x, c in zip(point, self.center):
            r2 += (x - c) ** 2
        return self.inner_radius**2 < r2 < self.outer_radius**2


@dataclass(frozen=True)
class Dumbbell:
    """Two axis-aligned squares of side ``bell`` joined by a rectangular neck.

    Anchored at the origin: bells occupy [0, a] x [0, a] and
    [a + L, 2a + L] x [0, a]; the neck spans [a, a + L] in x and is
    centered vertically with width ``neck_width``.  Two dimensions only.
    """

    bell: float
    neck_length: float
    neck_width: float

    assume_connected = True

    def contains(self, point: np.ndarray) -> bool:
        x, y = float(point[0]), float(point[1])
        a, length, width = self.bell, self.neck_length, self.neck_width
        if 0.0 < y < a and (0.0 < x < a or a + length < x < 2.0 * a + length):
            return True
        # closed in x across the seams, open in y: the neck's long sides are walls
        lo = 0.5 * (a - width)
        hi = 0.5 * (a + width)
        return a <= x <= a + length and lo < y < hi


@dataclass(frozen=True)
class Mask:
    """Explicit predicate shape; ``predicate(point) -> bool`` per node center."""

    predicate: Callable[[np.ndarray], bool]
    assume_connected: bool = False

    def contains(self, point: np.ndarray) -> bool:
        return bool(self.predicate(point))


Shape = Rectangle | Disk | Annulus | Dumbbell | Mask


# ---------------------------------------------------------------------------
# specs

@dataclass(frozen=True)
class GridSpec:
    """Everything needed to build a grid deterministically.

    ``bounds`` is one (lo, hi) pair per axis; ``background`` is an optional
    exponent field w evaluated at node centers (None means flat, w = 0).
    """

    dimension: int
    spacing: float
    bounds: tuple[tuple[float, float], ...]
    shape: Shape
    background: Callable[[np.ndarray], float] | None = None

    def __post_init__(self) -> None:
        if self.dimension < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dimension}")
        if not (self.spacing > 0.0):
            raise ValueError(f"spacing must be positive, got {self.spacing}")
        if len(self.bounds) != self.dimension:
            raise ValueError(
                f"need {self.dimension} bound pairs, got {len(self.bounds)}"
            )
        for lo, hi in self.bounds:
            if not hi > lo:
                raise ValueError(f"degenerate bounding box axis [{lo}, {hi}]")
        if isinstance(self.shape, Dumbbell):
            if self.dimension != 2:
                raise ValueError("dumbbell shape is two-dimensional")
            if self.shape.neck_width < 2.0 * self.spacing:
                raise ValueError(
                    "dumbbell neck width must be >= 2h so the discrete "
                    f"domain is connected (width {self.shape.neck_width}, "
                    f"h {self.spacing})"
                )
            if min(self.shape.bell, self.shape.neck_length) <= 0.0:
                raise ValueError("dumbbell bell and neck length must be positive")
        if isinstance(self.shape, Annulus):
            if not 0.0 <= self.shape.inner_radius < self.shape.outer_radius:
                raise ValueError("annulus radii must satisfy 0 <= inner < outer")


def square_spec(h: float, side: float = 1.0, dimension: int = 2,
                background: Callable[[np.ndarray], float] | None = None) -> GridSpec:
    """Cube [0, side]^d at spacing h."""
    return GridSpec(dimension, h, ((0.0, side),) * dimension, Rectangle(), background)


def box_spec(h: float, bounds: Sequence[tuple[float, float]],
             background: Callable[[np.ndarray], float] | None = None) -> GridSpec:
    return GridSpec(len(bounds), h, tuple((float(a), float(b)) for a, b in bounds),
                    Rectangle(), background)


def disk_spec(h: float, radius: float = 1.0,
              center: Sequence[float] | None = None, dimension: int = 2,
              background: Callable[[np.ndarray], float] | None = None) -> GridSpec:
    c = tuple(center) if center is not None else (0.0,) * dimension
    bounds = tuple((ci - radius, ci + radius) for ci in c)
    return GridSpec(dimension, h, bounds, Disk(c, radius), background)


def annulus_spec(h: float, inner_radius: float, outer_radius: float,
                 center: Sequence[float] | None = None, dimension: int = 2) -> GridSpec:
    c = tuple(center) if center is not None else (0.0,) * dimension
    bounds = tuple((ci - outer_radius, ci + outer_radius) for ci in c)
    return GridSpec(dimension, h, bounds, Annulus(c, inner_radius, outer_radius))


def dumbbell_spec(h: float, bell: float = 1.0, neck_length: float = 0.5,
                  neck_width: float = 0.125) -> GridSpec:
    bounds = ((0.0, 2.0 * bell + neck_length), (0.0, bell))
    return GridSpec(2, h, bounds, Dumbbell(bell, neck_length, neck_width))


# ---------------------------------------------------------------------------
# grids

@dataclass(frozen=True, eq=False)
class Grid:
    """Immutable masked discretization; arrays are write-protected.

    ``nodes`` holds integer coordinates, one row per interior node, in
    lexicographic order.  ``neighbors`` has one row per node with 2d slots
    ordered (axis0-, axis0+, axis1-, axis1+, ...); -1 marks a missing
    neighbor, i.e. a homogeneous Dirichlet wall.
    """

    spec: GridSpec
    nodes: np.ndarray
    neighbors: np.ndarray
    boundary_adjacent: np.ndarray
    e2w: np.ndarray
    lattice_cells: tuple[int, ...]
    warnings: tuple[str, ...] = ()
    _index: dict[tuple[int, ...], int] = field(repr=False, default_factory=dict)

    @property
    def dimension(self) -> int:
        return self.spec.dimension

    @property
    def spacing(self) -> float:
        return self.spec.spacing

    @property
    def node_count(self) -> int:
        return int(self.nodes.shape[0])

    @property
    def node_volume(self) -> float:
        return self.spacing**self.dimension

    @property
    def cell_volumes(self) -> np.ndarray:
        """Per-node measure e^(2w) h^d."""
        return self.e2w * self.node_volume

    @property
    def origin(self) -> tuple[float, ...]:
        return tuple(lo for lo, _ in self.spec.bounds)

    @property
    def flat(self) -> bool:
        return bool(np.all(self.e2w == 1.0))

    def coordinates(self) -> np.ndarray:
        """Physical node centers, shape (N, d)."""
        return np.asarray(self.origin) + self.nodes * self.spacing

    def find(self, coords: Sequence[int]) -> int:
        """Node index for integer coordinates, or -1 if absent."""
        return self._index.get(tuple(int(c) for c in coords), -1)


def _component_count(neighbors: np.ndarray, members: np.ndarray) -> int:
    """Connected components of a 0/1 membership vector under the axis graph."""
    n = members.shape[0]
    seen = np.zeros(n, dtype=bool)
    count = 0
    for start in range(n):
        if not members[start] or seen[start]:
            continue
        count += 1
        stack = [start]
        seen[start] = True
        while stack:
            i = stack.pop()
            for j in neighbors[i]:
                if j >= 0 and members[j] and not seen[j]:
                    seen[j] = True
                    stack.append(int(j))
    return count


def build_grid(spec: GridSpec) -> Grid:
    """Construct the masked grid for a spec.

    Interior nodes are exactly the lattice points whose center satisfies
    the shape predicate and which do not lie on the lattice boundary of
    the bounding box.  Raises on an empty interior; records a warning on
    the grid if a shape declared connected discretizes disconnected.
    """
    d, h = spec.dimension, spec.spacing
    cells = []
    for lo, hi in spec.bounds:
        cells.append(int(math.floor((hi - lo) / h + 1e-9)))
    origin = np.array([lo for lo, _ in spec.bounds])

    nodes: list[tuple[int, ...]] = []
    ranges = [range(1, n) for n in cells]
    for idx in product(*ranges):
        point = origin + h * np.asarray(idx, dtype=float)
        if spec.shape.contains(point):
            nodes.append(idx)
    if not nodes:
        raise ValueError(
            "degenerate domain: no interior nodes "
            f"(shape {type(spec.shape).__name__}, h={h})"
        )

    node_arr = np.array(nodes, dtype=np.int64)
    index = {tup: i for i, tup in enumerate(nodes)}

    n = len(nodes)
    neighbors = np.full((n, 2 * d), -1, dtype=np.int64)
    for i, tup in enumerate(nodes):
        for ax in range(d):
            for slot, step in ((2 * ax, -1), (2 * ax + 1, +1)):
                other = list(tup)
                other[ax] += step
                neighbors[i, slot] = index.get(tuple(other), -1)
    boundary_adjacent = np.any(neighbors < 0, axis=1)

    if spec.background is not None:
        if d != 2:
            raise ValueError(
                "flat background required for dimension != 2 (w must be omitted)"
            )
        coords = origin + node_arr * h
        w = np.array([float(spec.background(p)) for p in coords])
        if not np.all(np.isfinite(w)):
            raise ValueError("background exponent field evaluates non-finite")
        e2w = np.exp(2.0 * w)
    else:
        e2w = np.ones(n)

    warnings: tuple[str, ...] = ()
    if getattr(spec.shape, "assume_connected", False):
        parts = _component_count(neighbors, np.ones(n, dtype=bool))
        if parts > 1:
            warnings = (
                f"disconnected interior: {parts} components for a shape "
                "declared connected",
            )

    for arr in (node_arr, neighbors, boundary_adjacent, e2w):
        arr.setflags(write=False)
    return Grid(
        spec=spec,
        nodes=node_arr,
        neighbors=neighbors,
        boundary_adjacent=boundary_adjacent,
        e2w=e2w,
        lattice_cells=tuple(cells),
        warnings=warnings,
        _index=index,
    )


def domain_volume(grid: Grid) -> float:
    """Background-measured volume sum(e^(2w) h^d); equals N h^d when flat."""
    return float(np.sum(grid.cell_volumes))


def mirror_permutation(grid: Grid, axis: int = 0) -> np.ndarray:
    """Node permutation for reflection across the bounding-box midplane.

    Raises if the node set is not symmetric under that reflection.
    """
    n_ax = grid.lattice_cells[axis]
    perm = np.empty(grid.node_count, dtype=np.int64)
    for i, tup in enumerate(map(tuple, grid.nodes)):
        other = list(tup)
        other[axis] = n_ax - other[axis]
        j = grid.find(other)
        if j < 0:
            raise ValueError(
                f"grid is not mirror-symmetric about axis {axis} "
                f"(node {tup} has no image)"
            )
        perm[i] = j
    return perm


def grid_csv(grid: Grid, header_lines: Sequence[str] = ()) -> str:
    """One row per node: integer coords, physical coords, e^(2w)."""
    d = grid.dimension
    lines = [f"# {text}" for text in header_lines]
    cols = [f"i{k}" for k in range(d)] + [f"x{k}" for k in range(d)] + ["e2w"]
    lines.append(",".join(cols))
    coords = grid.coordinates()
    for i in range(grid.node_count):
        ints = ",".join(str(int(v)) for v in grid.nodes[i])
        phys = ",".join(repr(float(v)) for v in coords[i])
        lines.append(f"{ints},{phys},{float(grid.e2w[i])!r}")
    return "\n".join(lines) + "\n"
