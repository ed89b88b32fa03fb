import numpy as np
import pytest
import scipy.sparse.linalg as spla

from lrsidsa.diffusion_solver import (
    DiffusionConvergenceError,
    build_diffusion_solver,
    diffusion_operator,
    solve_diffusion,
)
from lrsidsa.geometry import build_grid
from lrsidsa.problems import builtin_problem, problem_from_config, sample_materials

from conftest import random_problem


def _setup(problem, n=16, **kw):
    g = build_grid(problem.x_range, problem.y_range, n, n)
    m = sample_materials(problem, g)
    return g, m, build_diffusion_solver(g, m, **kw)


def test_manufactured_solution(rng):
    g, m, s = _setup(random_problem(rng), 16)
    u = rng.standard_normal(g.interior_count)
    f = s.operator @ u
    x = solve_diffusion(s, f, 1e-12)
    assert np.linalg.norm(x - u) <= 1e-9 * np.linalg.norm(u)
    assert s.n_levels >= 2


def test_zero_rhs():
    _, _, s = _setup(builtin_problem("transport"), 8)
    assert np.all(s.solve(np.zeros(49)) == 0)


def test_laplacian_eigenvector():
    p = problem_from_config({"domain": {"x0": -1, "x1": 1, "y0": -1, "y1": 1}, "sigma_s": 1.0})
    g, m, s = _setup(p, 32)
    X, Y = g.interior_mesh()
    f = (np.cos(np.pi * X / 2) * np.cos(np.pi * Y / 2)).ravel()
    u = s.solve(f, 1e-12)
    dense = spla.spsolve(s.operator.tocsc(), f)
    np.testing.assert_allclose(u, dense, rtol=1e-9, atol=1e-12)
    lam1 = 2 * (np.pi / 2) ** 2
    assert np.max(np.abs(u - f / (lam1 / 3))) <= 0.01 * np.max(np.abs(f / (lam1 / 3)))


@pytest.mark.parametrize("name", ["diffusion", "transport", "variable_scattering", "pin_cell"])
@pytest.mark.parametrize("n", [32, 64])
def test_multigrid_iterations_resolution_robust(name, n, rng):
    g, m, s = _setup(builtin_problem(name), n, reaction="sigma_t")
    res = s.solve_block(rng.standard_normal((g.interior_count, 2)), tol=1e-8)
    assert np.all(res.converged) and res.iterations.max() <= 40


def test_odd_grid_single_direct_level():
    p = builtin_problem("diffusion")
    g, m, s = _setup(p, 15)
    assert s.n_levels == 1
    f = np.ones(g.interior_count)
    np.testing.assert_allclose(s.operator @ s.solve(f), f, rtol=1e-10)


def test_galerkin_hierarchy_converges(rng):
    g, m, s = _setup(random_problem(rng), 32, galerkin=True)
    res = s.solve_block(rng.standard_normal(g.interior_count), tol=1e-10)
    assert res.converged.all()


def test_nonconvergence_raises(rng):
    g, m, s = _setup(random_problem(rng), 32, maxiter=1)
    with pytest.raises(DiffusionConvergenceError) as exc:
        s.solve(rng.standard_normal(g.interior_count), 1e-14)
    assert exc.value.result.residuals.max() > 1e-14


def test_reaction_choice():
    g = build_grid((0, 5), (0, 5), 10, 10)
    m = sample_materials(builtin_problem("lattice"), g)
    a = diffusion_operator(g, m, "sigma_a")
    t = diffusion_operator(g, m, "sigma_t")
    np.testing.assert_allclose((t - a).diagonal(), m.interior("sigma_s"))
    with pytest.raises(ValueError):
        diffusion_operator(g, m, "sigma_x")
