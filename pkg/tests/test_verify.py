import math

import numpy as np
import pytest

import membrane_opt as mo
from membrane_opt.verify import pure_difference_sup


def _grid_n(n):
    return mo.build_grid(mo.square_spec(1.0, side=float(n + 1)))


# ---------------------------------------------------------------------------
# enumeration oracle

def test_candidate_count_without_fraction():
    g = _grid_n(2)
    spec = mo.ProblemSpec(grid=g, rho_min=1.0, rho_max=2.0, mass=5.0)  # k = 1
    oracle = mo.enumerate_optimal(g, spec)
    assert len(oracle.ranking) == 4
    assert all(c.fractional_node is None for c in oracle.ranking)


def test_candidate_count_with_fraction():
    g = _grid_n(2)
    spec = mo.ProblemSpec(grid=g, rho_min=1.0, rho_max=2.0, mass=5.5)  # k = 1 + 1/2
    oracle = mo.enumerate_optimal(g, spec)
    assert len(oracle.ranking) == 4 * 3
    assert all(c.fractional_node is not None for c in oracle.ranking)
    oracle.density.validate(spec, two_valued=True)


def test_optimal_placements_closed_under_square_symmetry():
    g = _grid_n(2)
    spec = mo.ProblemSpec(grid=g, rho_min=1.0, rho_max=2.0, mass=5.0)
    oracle = mo.enumerate_optimal(g, spec)
    mus = sorted(c.eigenvalue for c in oracle.ranking)
    # all four single-node placements are equivalent under the symmetry group
    assert mus[-1] - mus[0] <= 1e-12 * abs(mus[0])
    assert sorted(c.high_nodes for c in oracle.ranking) == [(0,), (1,), (2,), (3,)]


def test_oracle_matches_multi_start_on_3x3():
    g = _grid_n(3)
    spec = mo.ProblemSpec(grid=g, rho_min=1.0, rho_max=2.0, mass=12.0)  # k = 3
    oracle = mo.enumerate_optimal(g, spec)
    sols = mo.multi_start(spec, range(8),
                          opts=mo.SolverOptions(cg_rel_tol=1e-13, eig_rel_tol=1e-12))
    best = min(s.eigenpair.eigenvalue for s in sols)
    assert abs(best - oracle.eigenvalue) <= 1e-10 * abs(oracle.eigenvalue)
    # the oracle is a lower bound for every single run, not just the best
    for s in sols:
        assert oracle.eigenvalue <= s.eigenpair.eigenvalue + 1e-10 * abs(oracle.eigenvalue)


def test_oracle_scale_cap():
    g = _grid_n(5)
    spec = mo.ProblemSpec(grid=g, rho_min=1.0, rho_max=2.0, mass=30.0)
    with pytest.raises(ValueError, match="oracle scale exceeded"):
        mo.enumerate_optimal(g, spec)


def test_oracle_requires_uniform_cells():
    g = mo.build_grid(mo.square_spec(1.0 / 3, background=lambda p: 0.2 * p[0]))
    spec = mo.ProblemSpec(grid=g, rho_min=0.5, rho_max=2.0, mass=mo.domain_volume(g))
    with pytest.raises(ValueError, match="uniform node volumes"):
        mo.enumerate_optimal(g, spec)


def test_oracle_partition_passes_sublevel_with_own_eigenfunction():
    g = _grid_n(3)
    spec = mo.ProblemSpec(grid=g, rho_min=1.0, rho_max=2.0, mass=12.5)
    oracle = mo.enumerate_optimal(g, spec)
    ok, margin = mo.sublevel_check(oracle.eigenvector, oracle.partition)
    assert ok, margin


# ---------------------------------------------------------------------------
# sub-level and connectivity checks

def test_sublevel_check_accepts_bathtub_output():
    g = _grid_n(3)
    spec = mo.ProblemSpec(grid=g, rho_min=1.0, rho_max=2.0, mass=12.0)
    rng = np.random.default_rng(0)
    phi = rng.standard_normal(9)
    _, part = mo.bathtub_rearrange(phi, g, spec)
    ok, margin = mo.sublevel_check(phi, part)
    assert ok and margin <= 1e-14


def test_sublevel_check_flags_swapped_pair():
    g = _grid_n(3)
    spec = mo.ProblemSpec(grid=g, rho_min=1.0, rho_max=2.0, mass=12.0)
    phi = np.arange(1.0, 10.0)
    _, part = mo.bathtub_rearrange(phi, g, spec)
    violating = mo.LevelSetPartition(
        low_nodes=np.sort(np.append(part.low_nodes[:-1], part.high_nodes[0])),
        high_nodes=np.sort(np.append(part.high_nodes[1:], part.low_nodes[-1])),
        threshold=part.threshold,
        fractional_node=part.fractional_node,
    )
    ok, margin = mo.sublevel_check(phi, violating)
    assert not ok
    assert margin > 0.0


def test_count_components_cases():
    g = _grid_n(3)
    assert mo.count_components([], g) == 0
    assert mo.count_components(np.arange(9), g) == 1
    # two opposite corners are not 4-connected
    assert mo.count_components([0, 8], g) == 2


def test_count_components_two_blobs_mask():
    def blobs(p):
        return (0.05 < p[0] < 0.4 or 0.6 < p[0] < 0.95) and 0.05 < p[1] < 0.95

    g = mo.build_grid(mo.GridSpec(2, 1.0 / 16, ((0.0, 1.0), (0.0, 1.0)), mo.Mask(blobs)))
    assert mo.count_components(np.arange(g.node_count), g) == 2


def test_count_components_order_invariant():
    g = mo.build_grid(mo.disk_spec(1.0 / 8))
    nodes = np.arange(g.node_count)
    rng = np.random.default_rng(3)
    assert mo.count_components(rng.permutation(nodes), g) == \
        mo.count_components(nodes, g)


# ---------------------------------------------------------------------------
# contours

def test_contour_of_linear_field_is_one_straight_polyline():
    g = mo.build_grid(mo.square_spec(1.0 / 16))
    phi = g.coordinates()[:, 0]
    level = 0.4031  # between node values
    contours = mo.extract_contour(phi, level, g)
    assert len(contours.polylines) == 1
    poly = contours.polylines[0]
    assert not poly.closed
    assert np.max(np.abs(poly.points[:, 0] - level)) <= 1e-9


def test_contour_above_max_is_empty():
    g = mo.build_grid(mo.square_spec(1.0 / 8))
    phi = g.coordinates()[:, 0]
    contours = mo.extract_contour(phi, 2.0, g)
    assert contours.polylines == ()


def test_contour_of_radial_field_is_a_circle():
    g = mo.build_grid(mo.disk_spec(1.0 / 32))
    r2 = np.sum(g.coordinates() ** 2, axis=1)
    phi = 1.0 - r2
    level = 0.5
    contours = mo.extract_contour(phi, level, g)
    assert contours.closed_count == 1
    assert len(contours.polylines) == 1
    radii = np.linalg.norm(contours.polylines[0].points, axis=1)
    assert np.max(np.abs(radii - math.sqrt(0.5))) <= 2.0 * g.spacing
    assert contours.region_components == 1


def test_contour_requires_2d():
    g = mo.build_grid(mo.square_spec(0.25, dimension=3))
    with pytest.raises(ValueError, match="two-dimensional"):
        mo.extract_contour(np.ones(g.node_count), 0.5, g)


def test_contour_csv_format():
    g = mo.build_grid(mo.disk_spec(1.0 / 16))
    phi = 1.0 - np.sum(g.coordinates() ** 2, axis=1)
    contours = mo.extract_contour(phi, 0.5, g)
    text = mo.contour_csv(contours, header_lines=["probe"])
    lines = text.strip().splitlines()
    assert lines[0] == "# probe"
    assert "curve,x,y" in lines
    assert any(line.startswith("0,") for line in lines)


# ---------------------------------------------------------------------------
# discrete regularity

def test_second_differences_of_smooth_field_converge():
    sups = []
    for k in (16, 32, 64):
        g = mo.build_grid(mo.square_spec(1.0 / k))
        xy = g.coordinates()
        phi = np.sin(math.pi * xy[:, 0]) * np.sin(math.pi * xy[:, 1])
        sups.append(pure_difference_sup(g, phi, order=2))
    for s in sups:
        assert s == pytest.approx(math.pi**2, rel=0.05)
    assert abs(sups[-1] / sups[-2] - 1.0) <= 0.05


def test_kink_profile_detected_by_second_differences():
    sups = []
    for k in (16, 32, 64):
        g = mo.build_grid(mo.square_spec(1.0 / k))
        xy = g.coordinates()
        tent = np.minimum(xy[:, 0], 1.0 - xy[:, 0]) * np.sin(math.pi * xy[:, 1])
        sups.append(pure_difference_sup(g, tent / np.max(np.abs(tent)), order=2))
    ratios = [sups[i + 1] / sups[i] for i in range(2)]
    assert all(r >= 1.8 for r in ratios)  # doubles per halving, far above 1.5


def test_step_profile_detected_one_derivative_lower():
    sups = []
    for k in (16, 32, 64):
        g = mo.build_grid(mo.square_spec(1.0 / k))
        xy = g.coordinates()
        step = np.where(xy[:, 0] > 0.5, 1.0, -1.0) * np.sin(math.pi * xy[:, 1])
        sups.append(pure_difference_sup(g, step, order=1))
    ratios = [sups[i + 1] / sups[i] for i in range(2)]
    assert all(r >= 1.8 for r in ratios)


def test_pure_difference_sup_validates_order():
    g = mo.build_grid(mo.square_spec(0.25))
    with pytest.raises(ValueError):
        pure_difference_sup(g, np.ones(g.node_count), order=3)


def test_regularity_trend_smooth_problem():
    def problem_at(h):
        g = mo.build_grid(mo.square_spec(h))
        return mo.ProblemSpec.from_exponent_bound(g, 0.0, mass=mo.domain_volume(g))

    report = mo.regularity_trend(problem_at, [1.0 / 8, 1.0 / 16, 1.0 / 32])
    assert report.bounded(1.5)
    assert all(abs(r - 1.0) <= 0.2 for r in report.ratios)


# ---------------------------------------------------------------------------
# radial structure

def test_radial_deviation_of_annular_set_is_zero():
    g = mo.build_grid(mo.disk_spec(1.0 / 16))
    radii = np.linalg.norm(g.coordinates(), axis=1)
    bins = np.floor(radii / g.spacing).astype(int)
    annular = np.nonzero((bins >= 5) & (bins <= 10))[0]  # full rings only
    assert mo.radial_deviation(annular, g) == 0.0


def test_radial_deviation_of_half_disk_is_one_half():
    g = mo.build_grid(mo.disk_spec(1.0 / 16))
    half = np.nonzero(g.coordinates()[:, 0] > 0.0)[0]
    assert mo.radial_deviation(half, g) == pytest.approx(0.5, abs=0.1)


def test_radial_deviation_requires_disk():
    g = mo.build_grid(mo.square_spec(0.25))
    with pytest.raises(ValueError, match="disk"):
        mo.radial_deviation([0], g)
