import math

import numpy as np
import pytest
import scipy.linalg

import membrane_opt as mo
from membrane_opt.operators import coordinate_text


# ---------------------------------------------------------------------------
# an independent symbolic oracle for the clamped bilaplacian: apply the
# (2d+1)-point stencil twice with dictionary arithmetic, reflecting every
# non-interior neighbor of a Dirichlet-layer point through that point

def _symbolic_bilaplacian(grid):
    d = grid.dimension
    interior = {tuple(int(v) for v in t): k for k, t in enumerate(grid.nodes)}

    def shifted(point, axis, step):
        out = list(point)
        out[axis] += step
        return tuple(out)

    def inner_row(point):
        # h^2 * (-Lap phi) at an interior point; missing neighbors are zero
        row = {interior[point]: 2.0 * d}
        for ax in range(d):
            for step in (-1, 1):
                nb = shifted(point, ax, step)
                if nb in interior:
                    row[interior[nb]] = row.get(interior[nb], 0.0) - 1.0
        return row

    def layer_row(point):
        # h^2 * (-Lap phi) at a zero point next to the interior
        row = {}
        for ax in range(d):
            for step in (-1, 1):
                nb = shifted(point, ax, step)
                src = nb if nb in interior else shifted(point, ax, -step)
                if src in interior:
                    row[interior[src]] = row.get(interior[src], 0.0) - 1.0
        return row

    n = len(interior)
    dense = np.zeros((n, n))
    for point, i in interior.items():
        # outer stencil: 2d * value(point) - sum over the 2d lattice neighbors
        acc: dict[int, float] = {}
        for col, coef in inner_row(point).items():
            acc[col] = acc.get(col, 0.0) + 2.0 * d * coef
        for ax in range(d):
            for step in (-1, 1):
                nb = shifted(point, ax, step)
                row = inner_row(nb) if nb in interior else layer_row(nb)
                for col, coef in row.items():
                    acc[col] = acc.get(col, 0.0) - coef
        for col, coef in acc.items():
            dense[i, col] = coef
    return dense / grid.spacing**4


@pytest.mark.parametrize("spec", [
    mo.square_spec(0.5),
    mo.square_spec(0.25),
    mo.box_spec(0.5, [(0.0, 3.0)]),
    mo.disk_spec(0.25),
])
def test_bilaplacian_matches_symbolic_double_application(spec):
    g = mo.build_grid(spec)
    assembled = mo.assemble_stiffness(g, mo.OperatorSpec(order=4)).to_dense()
    assert np.array_equal(assembled, _symbolic_bilaplacian(g))


def test_single_node_stencils():
    g = mo.build_grid(mo.square_spec(0.5))
    a2 = mo.assemble_stiffness(g).to_dense()
    assert a2.item() == pytest.approx(4.0 / 0.25)
    a4 = mo.assemble_stiffness(g, mo.OperatorSpec(order=4)).to_dense()
    # hand value: 20 from the interior 13-point stencil plus 4 reflections
    assert a4.item() == pytest.approx(24.0 / 0.5**4)


def test_1d_clamped_beam_rows():
    h = 1.0 / 6
    g = mo.build_grid(mo.box_spec(h, [(0.0, 1.0)]))
    assert g.node_count == 5
    b = mo.assemble_stiffness(g, mo.OperatorSpec(order=4)).to_dense() * h**4
    expected = np.array([
        [7, -4, 1, 0, 0],
        [-4, 6, -4, 1, 0],
        [1, -4, 6, -4, 1],
        [0, 1, -4, 6, -4],
        [0, 0, 1, -4, 7],
    ], dtype=float)
    assert np.array_equal(b, expected)


def test_deep_interior_13_point_stencil():
    g = mo.build_grid(mo.square_spec(0.1))
    b = mo.assemble_stiffness(g, mo.OperatorSpec(order=4))
    center = g.find((5, 5))
    row = b.to_dense()[center] * g.spacing**4
    coefs = {}
    for j in np.nonzero(row)[0]:
        offset = tuple(g.nodes[j] - g.nodes[center])
        coefs[offset] = row[j]
    assert coefs[(0, 0)] == 20.0
    for off in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        assert coefs[off] == -8.0
    for off in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
        assert coefs[off] == 2.0
    for off in ((2, 0), (-2, 0), (0, 2), (0, -2)):
        assert coefs[off] == 1.0


@pytest.mark.parametrize("order", [2, 4])
@pytest.mark.parametrize("spec", [
    mo.square_spec(1.0 / 8),
    mo.disk_spec(1.0 / 8),
    mo.dumbbell_spec(1.0 / 16),
])
def test_stiffness_exactly_symmetric(order, spec):
    g = mo.build_grid(spec)
    a = mo.assemble_stiffness(g, mo.OperatorSpec(order=order)).matrix
    assert (a - a.T).nnz == 0


@pytest.mark.parametrize("order", [2, 4])
def test_stiffness_positive_definite(order):
    g = mo.build_grid(mo.disk_spec(1.0 / 8))
    dense = mo.assemble_stiffness(g, mo.OperatorSpec(order=order)).to_dense()
    assert scipy.linalg.eigh(dense, eigvals_only=True)[0] > 0.0
    ones = np.ones(g.node_count)
    assert ones @ (dense @ ones) > 0.0


def test_square_laplacian_eigenvalue_closed_form():
    # discrete 5-point eigenvalue on the unit square is (8/h^2) sin^2(pi h / 2)
    h = 1.0 / 16
    g = mo.build_grid(mo.square_spec(h))
    dense = mo.assemble_stiffness(g).to_dense()
    smallest = scipy.linalg.eigh(dense, eigvals_only=True, subset_by_index=[0, 0])[0]
    expected = 8.0 / h**2 * math.sin(math.pi * h / 2.0) ** 2
    assert smallest == pytest.approx(expected, rel=1e-12)


def test_stiffness_independent_of_background_bitwise():
    h = 1.0 / 16

    def bump(p):
        s2 = (p[0] ** 2 + p[1] ** 2)
        return 0.3 * math.exp(-4.0 * s2)

    flat = mo.build_grid(mo.disk_spec(h))
    curved = mo.build_grid(mo.disk_spec(h, background=bump))
    a = mo.assemble_stiffness(flat).matrix
    b = mo.assemble_stiffness(curved).matrix
    assert np.array_equal(a.indptr, b.indptr)
    assert np.array_equal(a.indices, b.indices)
    assert np.array_equal(a.data, b.data)

    rho = np.linspace(0.5, 1.5, flat.node_count)
    w_curved = mo.assemble_weight(curved, rho)
    w_flat = mo.assemble_weight(flat, rho * curved.e2w)
    assert np.max(np.abs(w_curved - w_flat) / w_curved) <= 1e-15


def test_weight_examples():
    g = mo.build_grid(mo.square_spec(1.0 / 3))
    assert np.array_equal(mo.assemble_weight(g, np.ones(4)), np.ones(4))

    curved = mo.build_grid(mo.square_spec(1.0 / 3, background=lambda p: math.log(3.0) / 2.0))
    assert mo.assemble_weight(curved, np.ones(4)) == pytest.approx(3.0 * np.ones(4), rel=1e-14)

    two_valued = np.array([0.25, 4.0, 0.25, 4.0])
    assert np.array_equal(mo.assemble_weight(g, two_valued), two_valued)


def test_weight_rejects_nonpositive():
    g = mo.build_grid(mo.square_spec(1.0 / 3))
    with pytest.raises(ValueError, match="positive"):
        mo.assemble_weight(g, np.array([1.0, 0.0, 1.0, 1.0]))


def test_order4_rejects_background():
    g = mo.build_grid(mo.square_spec(1.0 / 8, background=lambda p: 0.1))
    with pytest.raises(ValueError, match="flat background required for GJMS case"):
        mo.assemble_stiffness(g, mo.OperatorSpec(order=4))


def test_operator_spec_validates_order():
    with pytest.raises(ValueError, match="order"):
        mo.OperatorSpec(order=3)


def test_coordinate_text_round_trip():
    g = mo.build_grid(mo.square_spec(1.0 / 3))
    sm = mo.assemble_stiffness(g)
    rebuilt = np.zeros(sm.shape)
    for line in coordinate_text(sm).strip().splitlines():
        r, c, v = line.split()
        rebuilt[int(r), int(c)] = float(v)
    assert np.array_equal(rebuilt, sm.to_dense())
