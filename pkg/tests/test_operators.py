import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lrsidsa.angular import build_cl_quadrature
from lrsidsa.geometry import build_grid
from lrsidsa.operators import (
    build_angle_operator,
    build_dcross,
    build_dsa_operator,
    build_dxx,
    build_dyy,
    build_spatial_operators,
    build_transport_operator,
    cross_node_kappa,
)
from lrsidsa.problems import MaterialSamples, builtin_problem, problem_from_config, sample_materials

from conftest import random_problem


def _constant(value, domain=(-1, 1)):
    d = {"x0": domain[0], "x1": domain[1], "y0": domain[0], "y1": domain[1]}
    return problem_from_config({"domain": d, "sigma_s": float(value), "sigma_a": 0.0})


def _dense_dxx(grid, m):
    """Brute-force divergence-form assembly, looping over interior nodes."""
    ny1, nx1 = grid.interior_shape
    A = np.zeros((ny1 * nx1,) * 2)
    for j in range(ny1):
        for i in range(nx1):
            row = j * nx1 + i
            w = 1 / m.sigma_t_half_x[j + 1, i]
            e = 1 / m.sigma_t_half_x[j + 1, i + 1]
            A[row, row] = -(w + e) / grid.dx**2
            if i > 0:
                A[row, row - 1] = w / grid.dx**2
            if i < nx1 - 1:
                A[row, row + 1] = e / grid.dx**2
    return A


def test_dxx_unit_stencil():
    g = build_grid((0, 6), (0, 6), 6, 6)
    row = build_dxx(g, sample_materials(_constant(1.0, (0, 6)), g)).toarray()[7]
    assert (row[6], row[7], row[8]) == (1.0, -2.0, 1.0)
    assert np.count_nonzero(row) == 3


def test_dxx_scales_with_inverse_sigma():
    g = build_grid((0, 6), (0, 6), 6, 6)
    row = build_dxx(g, sample_materials(_constant(2.0, (0, 6)), g)).toarray()[7]
    assert (row[6], row[7], row[8]) == (0.5, -1.0, 0.5)


def test_dxx_dyy_dense_oracle(rng):
    g = build_grid((-1, 1), (-1, 1), 5, 5)
    m = sample_materials(random_problem(rng), g)
    D = build_dxx(g, m).toarray()
    np.testing.assert_allclose(D, _dense_dxx(g, m), rtol=1e-14, atol=1e-12)
    assert np.abs(D - D.T).max() <= 1e-14 * np.abs(D).max()
    # D_yy is D_xx of the transposed problem
    Dy = build_dyy(g, m).toarray()
    perm = np.arange(g.interior_count).reshape(g.interior_shape).T.ravel()
    swapped = type(m)(m.sigma_t_nodes.T, m.sigma_s_nodes.T, m.sigma_a_nodes.T, m.source_nodes.T,
                      m.sigma_t_half_y.T, m.sigma_t_half_x.T)
    np.testing.assert_allclose(Dy[np.ix_(perm, perm)], _dense_dxx(g, swapped), rtol=1e-14, atol=1e-12)
    for M in (D, Dy):
        assert np.linalg.eigvalsh(-M).min() > -1e-10


def test_dcross_second_derivative_of_xy():
    g = build_grid((-1, 1), (-1, 1), 40, 40)
    X, Y = g.interior_mesh()
    out = build_dcross(g, sample_materials(_constant(1.0), g)) @ (X * Y).ravel()
    inner = out.reshape(g.interior_shape)[1:-1, 1:-1]
    np.testing.assert_allclose(inner, 2.0, atol=1e-10)


def test_dcross_of_x_only_is_zero_inside():
    g = build_grid((-1, 1), (-1, 1), 12, 12)
    X, _ = g.interior_mesh()
    out = (build_dcross(g, sample_materials(_constant(1.0), g)) @ X.ravel()).reshape(g.interior_shape)
    np.testing.assert_allclose(out[1:-1, 1:-1], 0.0, atol=1e-12)


def test_dcross_symmetric(rng):
    g = build_grid((-1, 1), (-1, 1), 6, 6)
    D = build_dcross(g, sample_materials(random_problem(rng), g)).toarray()
    assert np.abs(D - D.T).max() <= 1e-14


def test_angle_operator_spd(rng):
    g = build_grid((-1, 1), (-1, 1), 5, 5)
    q = build_cl_quadrature(6, 3)
    ops = build_spatial_operators(g, sample_materials(_constant(1.0), g))
    for j in range(q.n_half):
        A = build_angle_operator(q, j, ops).toarray()
        assert np.abs(A - A.T).max() <= 1e-14
        assert np.linalg.eigvalsh(A).min() > 0


def test_angle_operator_without_x_component():
    g = build_grid((-1, 1), (-1, 1), 5, 5)
    q = build_cl_quadrature(2, 3)  # theta = pi/2 only on S+: Omega_x = 0
    ops = build_spatial_operators(g, sample_materials(_constant(1.0), g))
    for j in range(q.n_half):
        A = build_angle_operator(q, j, ops)
        oy = q.half_points[j, 1]
        np.testing.assert_allclose(A.toarray(), (-(oy * oy) * ops.dyy + ops.sigma_t).toarray(), atol=1e-13)


def test_angle_operator_on_constant():
    g = build_grid((-1, 1), (-1, 1), 8, 8)
    q = build_cl_quadrature(4, 2)
    ops = build_spatial_operators(g, sample_materials(_constant(1.0), g))
    out = (build_angle_operator(q, 0, ops) @ np.full(g.interior_count, 3.0)).reshape(g.interior_shape)
    np.testing.assert_allclose(out[1:-1, 1:-1], 3.0, atol=1e-12)


def test_dsa_operator_is_scaled_laplacian():
    g = build_grid((-1, 1), (-1, 1), 6, 6)
    ops = build_spatial_operators(g, sample_materials(_constant(1.0), g))
    lap = (ops.dxx + ops.dyy).toarray()
    row = lap[7]
    assert row[7] == pytest.approx(-4 / g.dx**2)
    np.testing.assert_allclose(build_dsa_operator(ops).toarray(), -lap / 3, atol=1e-13)


def test_dsa_absorber_shift():
    g = build_grid((0, 5), (0, 5), 20, 20)
    m = sample_materials(builtin_problem("lattice"), g)
    ops = build_spatial_operators(g, m)
    diff = build_dsa_operator(ops).diagonal() - (-(ops.dxx + ops.dyy) / 3).diagonal()
    sa = m.interior("sigma_a")
    np.testing.assert_allclose(diff, sa)
    assert set(np.unique(sa)) == {0.0, 100.0}


def test_dsa_spd_random(rng):
    g = build_grid((-1, 1), (-1, 1), 6, 6)
    A = build_dsa_operator(build_spatial_operators(g, sample_materials(random_problem(rng), g))).toarray()
    np.linalg.cholesky(A)
    assert np.abs(A - A.T).max() <= 1e-14


def test_kronecker_operator_consistency(tiny_system):
    grid, quad, mats, ops, K = tiny_system
    assert len(K.terms) == 4
    for t in K.terms:
        np.testing.assert_allclose(np.outer(t.z_factor, t.theta_factor).ravel(), t.angle, atol=1e-15)
    for j in range(quad.n_half):
        np.testing.assert_allclose(K.angle_block(j).toarray(), build_angle_operator(quad, j, ops).toarray(), atol=1e-13)
    A = K.to_dense()
    assert np.abs(A - A.T).max() <= 1e-14 * np.abs(A).max()
    np.linalg.cholesky(A)
    psi = np.random.default_rng(1).standard_normal((K.n_space, K.n_angle))
    np.testing.assert_allclose(K.apply_dense(psi).ravel("F"), A @ psi.ravel("F"), rtol=1e-12, atol=1e-12)


@settings(max_examples=10, deadline=None)
@given(st.integers(2, 6), st.integers(2, 6), st.floats(0.05, 50.0))
def test_sign_and_definiteness(nx, ny, sig):
    g = build_grid((-1, 1), (-1, 1), nx, ny)
    ops = build_spatial_operators(g, sample_materials(_constant(sig), g))
    for M in (ops.dxx, ops.dyy):
        assert np.all(M.diagonal() < 0)
        assert np.linalg.eigvalsh(-M.toarray()).min() > -1e-10


# -- definiteness of the mixed stencil under rough coefficients -------------


def test_cross_kappa_untouched_for_constant_and_smooth(rng):
    g = build_grid((-1, 1), (-1, 1), 12, 12)
    m = sample_materials(_constant(3.0), g)
    np.testing.assert_array_equal(cross_node_kappa(m), 1 / m.sigma_t_nodes)
    m = sample_materials(random_problem(rng), build_grid((-1, 1), (-1, 1), 40, 40))
    rel = np.abs(cross_node_kappa(m) * m.sigma_t_nodes - 1).max()
    assert rel < 1e-3


def test_cross_kappa_edge_condition(rng):
    n = 7
    draw = lambda shape: 10.0 ** rng.uniform(-2, 2, size=shape)
    st_ = draw((n + 1, n + 1))
    m = MaterialSamples(st_, st_, 0 * st_, 0 * st_, draw((n + 1, n)), draw((n, n + 1)))
    k = cross_node_kappa(m)
    assert np.all(k <= 1 / st_ + 1e-15) and np.all(k > 0)
    assert np.all(0.5 * (k[:, 1:] + k[:, :-1]) <= (1 / m.sigma_t_half_x) * (1 + 1e-12))
    assert np.all(0.5 * (k[1:, :] + k[:-1, :]) <= (1 / m.sigma_t_half_y) * (1 + 1e-12))


def test_pin_cell_odd_grid_blocks_definite():
    # interfaces at +-0.5 fall between nodes and half points on a 39 x 39 grid
    p = builtin_problem("pin_cell")
    g = build_grid(p.x_range, p.y_range, 13, 13)
    m = sample_materials(p, g)
    ops = build_spatial_operators(g, m)
    q = build_cl_quadrature(20, 10)
    floor = m.interior("sigma_t").min()
    for j in range(0, q.n_half, 3):
        assert np.linalg.eigvalsh(build_angle_operator(q, j, ops).toarray()).min() >= floor * (1 - 1e-10)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_angle_operator_floor_rough_fields(seed):
    """lambda_min(A_j) >= min sigma_t for arbitrary positive samples."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 8))
    draw = lambda shape: 10.0 ** rng.uniform(-2, 2, size=shape)
    st_ = draw((n + 1, n + 1))
    m = MaterialSamples(st_, st_, 0 * st_, 0 * st_, draw((n + 1, n)), draw((n, n + 1)))
    g = build_grid((-1, 1), (-1, 1), n, n)
    q = build_cl_quadrature(8, 4)
    A = build_angle_operator(q, int(rng.integers(q.n_half)), build_spatial_operators(g, m)).toarray()
    assert np.linalg.eigvalsh(A).min() >= m.interior("sigma_t").min() * (1 - 1e-10)
