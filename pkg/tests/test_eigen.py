import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

import membrane_opt as mo
from membrane_opt.eigen import CGStagnationError, EigenConvergenceError, solve_spd


def _laplacian(h):
    g = mo.build_grid(mo.square_spec(h))
    return g, mo.assemble_stiffness(g)


def test_solve_single_node():
    _, a = _laplacian(0.5)
    x = solve_spd(a, np.array([1.0]), 1e-12)
    assert x == pytest.approx([0.25 / 4.0])


def test_solve_zero_rhs():
    _, a = _laplacian(0.25)
    assert np.array_equal(solve_spd(a, np.zeros(a.shape[0]), 1e-12), np.zeros(a.shape[0]))


def test_solve_recovers_manufactured_solution():
    g, a = _laplacian(1.0 / 16)
    rng = np.random.default_rng(7)
    x_true = rng.standard_normal(g.node_count)
    b = a.matrix @ x_true
    x = solve_spd(a, b, 1e-12)
    assert np.linalg.norm(x - x_true) / np.linalg.norm(x_true) <= 1e-8


def test_solve_honors_warm_start():
    g, a = _laplacian(1.0 / 16)
    b = np.ones(g.node_count)
    x = solve_spd(a, b, 1e-10)
    again = solve_spd(a, b, 1e-10, x0=x)
    assert np.linalg.norm(a.matrix @ again - b) <= 1e-10 * np.linalg.norm(b)


def test_solve_rejects_indefinite():
    bad = sp.csr_matrix(np.diag([1.0, -1.0]))
    with pytest.raises(CGStagnationError, match="CG stagnation"):
        solve_spd(bad, np.array([1.0, 1.0]), 1e-12)


def test_solve_rejects_nonfinite_rhs():
    _, a = _laplacian(0.5)
    with pytest.raises(ValueError, match="finite"):
        solve_spd(a, np.array([np.nan]), 1e-10)


def _diag_stiffness(values):
    return sp.csr_matrix(np.diag(np.asarray(values, dtype=float)))


def test_first_eigenpair_diagonal_identity_weight():
    pair = mo.first_eigenpair(_diag_stiffness([1.0, 2.0]), np.ones(2))
    assert pair.eigenvalue == pytest.approx(1.0, rel=1e-12)
    assert pair.vector == pytest.approx([1.0, 0.0], abs=1e-6)


def test_first_eigenpair_generalized_quotient():
    pair = mo.first_eigenpair(_diag_stiffness([4.0, 4.0]), np.array([1.0, 2.0]))
    assert pair.eigenvalue == pytest.approx(2.0, rel=1e-12)
    assert pair.vector == pytest.approx([0.0, 1.0 / math.sqrt(2.0)], abs=1e-6)


def test_unit_square_against_closed_forms():
    h = 1.0 / 64
    g, a = _laplacian(h)
    pair = mo.first_eigenpair(a, np.ones(g.node_count))
    discrete = 8.0 / h**2 * math.sin(math.pi * h / 2.0) ** 2
    assert pair.eigenvalue == pytest.approx(discrete, rel=1e-8)
    assert pair.eigenvalue == pytest.approx(2.0 * math.pi**2, rel=0.01)


def test_rayleigh_quotient_matches_returned_eigenvalue():
    g, a = _laplacian(1.0 / 16)
    w = np.linspace(0.5, 2.0, g.node_count)
    pair = mo.first_eigenpair(a, w)
    quotient = float(pair.vector @ (a.matrix @ pair.vector)) / float(pair.vector @ (w * pair.vector))
    assert abs(quotient - pair.eigenvalue) <= 1e-12 * abs(pair.eigenvalue)


def test_w_normalization_and_sign_convention():
    g, a = _laplacian(1.0 / 16)
    w = np.linspace(0.5, 2.0, g.node_count)
    pair = mo.first_eigenpair(a, w)
    assert abs(float(pair.vector @ (w * pair.vector)) - 1.0) <= 1e-12
    assert pair.vector[int(np.argmax(np.abs(pair.vector)))] > 0.0


def test_membrane_eigenvector_strictly_positive():
    for spec in (mo.square_spec(1.0 / 16), mo.disk_spec(1.0 / 16)):
        g = mo.build_grid(spec)
        a = mo.assemble_stiffness(g)
        pair = mo.first_eigenpair(a, np.ones(g.node_count))
        assert np.all(pair.vector > 0.0)


def test_eigenvalue_invariant_under_start_rescaling():
    g, a = _laplacian(1.0 / 16)
    w = np.ones(g.node_count)
    base = mo.first_eigenpair(a, w)
    scaled = mo.first_eigenpair(a, w, start=7.3 * np.ones(g.node_count))
    assert abs(scaled.eigenvalue - base.eigenvalue) <= 1e-10 * abs(base.eigenvalue)


@given(st.lists(st.floats(min_value=0.0, max_value=3.0), min_size=9, max_size=9))
@settings(max_examples=25, deadline=None)
def test_eigenvalue_monotone_in_weight(bumps):
    g = mo.build_grid(mo.square_spec(0.25))
    a = mo.assemble_stiffness(g)
    w = np.ones(g.node_count)
    w_up = w * (1.0 + np.asarray(bumps))
    mu = mo.first_eigenpair(a, w).eigenvalue
    mu_up = mo.first_eigenpair(a, w_up).eigenvalue
    assert mu_up <= mu * (1.0 + 5e-9)


def test_nonconvergence_carries_best_iterate():
    g, a = _laplacian(1.0 / 8)
    with pytest.raises(EigenConvergenceError) as info:
        mo.first_eigenpair(a, np.ones(g.node_count),
                           mo.SolverOptions(max_iterations=1))
    best = info.value.best
    assert best.vector.shape == (g.node_count,)
    assert best.residual > 0.0


def test_residual_is_as_measured():
    g, a = _laplacian(1.0 / 16)
    w = np.linspace(1.0, 3.0, g.node_count)
    pair = mo.first_eigenpair(a, w)
    wx = w * pair.vector
    recomputed = np.linalg.norm(a.matrix @ pair.vector - pair.eigenvalue * wx) / np.linalg.norm(wx)
    assert recomputed == pytest.approx(pair.residual, rel=1e-9)
    assert pair.residual <= 10.0 * 1e-9


def test_solver_options_validate():
    with pytest.raises(ValueError):
        mo.SolverOptions(cg_rel_tol=0.0)
    with pytest.raises(ValueError):
        mo.SolverOptions(eig_rel_tol=1.5)
    with pytest.raises(ValueError):
        mo.SolverOptions(max_iterations=0)


def test_weight_must_be_positive():
    _, a = _laplacian(0.25)
    with pytest.raises(ValueError, match="positive"):
        mo.first_eigenpair(a, np.zeros(a.shape[0]))
