import numpy as np
import pytest

from lrsidsa import lowrank as lr
from lrsidsa.angular import build_cl_quadrature
from lrsidsa.geometry import build_grid
from lrsidsa.lowrank import LowRankMatrix
from lrsidsa.problems import builtin_problem, problem_from_config
from lrsidsa.sidsa import SolverConfig, compression_ratios, solve

ABSORBER = problem_from_config({
    "name": "absorber", "domain": {"x0": -1, "x1": 1, "y0": -1, "y1": 1},
    "sigma_a": 2.0, "source": {"formula": "gaussian", "rate": 10.0},
})


@pytest.mark.parametrize("fmt", ["matrix", "htt", "fullrank"])
@pytest.mark.parametrize("n", [4, 8, 13])
def test_pure_absorber_one_iteration(fmt, n):
    g = build_grid((-1, 1), (-1, 1), n, n)
    rep = solve(ABSORBER, g, build_cl_quadrature(4, 2), SolverConfig(format=fmt, inner_pc="dpc"))
    assert rep.n_si == 1 and rep.converged
    assert rep.history[0].dsa_correction == 0.0


@pytest.mark.parametrize("fmt", ["matrix", "htt"])
def test_small_diffusion_run_invariants(fmt):
    p = builtin_problem("diffusion")
    g = build_grid(p.x_range, p.y_range, 16, 16)
    rep = solve(p, g, build_cl_quadrature(8, 4), SolverConfig(format=fmt))
    assert rep.converged and rep.n_si == len(rep.history)
    assert rep.history[-1].phi_diff <= 1e-5
    assert all(0 < h.solution_compression and 0 < h.iteration_compression for h in rep.history)
    assert all(h.eps_cg <= 1e-2 for h in rep.history)
    # inner tolerance follows min(eps_cg0, gamma * diff)
    for prev, cur in zip(rep.history, rep.history[1:]):
        assert cur.eps_cg == pytest.approx(min(1e-2, 0.1 * prev.phi_diff))
    np.testing.assert_allclose(rep.phi, lr.integrate_angle(rep.psi, build_cl_quadrature(8, 4)), atol=1e-12)
    s = rep.summary()
    assert "phi" not in s and len(s["history"]) == rep.n_si


def test_compression_ratios():
    z = LowRankMatrix.zeros(10, 6)
    assert compression_ratios(z, None, 60) == (0.0, 0.0)
    full = LowRankMatrix(np.eye(10)[:, :6], np.eye(6), np.eye(6))
    sol, it = compression_ratios(full, {"x": 60, "p": 60, "q": 60, "z": 60, "r": 60}, 60)
    assert sol == pytest.approx(full.dof() / 60) and it == 1.0
    with pytest.raises(ValueError):
        compression_ratios(z, None, 0)


@pytest.mark.parametrize("bad", [dict(gamma=1.0), dict(gamma=0.0), dict(format="cp"), dict(inner_pc="ilu"),
                                 dict(eps_trunc=0.0), dict(max_si=0), dict(inner_tol=-1.0),
                                 dict(dpc_reaction="x")])
def test_config_validation(bad):
    with pytest.raises(ValueError):
        SolverConfig(**bad)


def test_iteration_cap_not_converged():
    p = builtin_problem("transport")
    g = build_grid(p.x_range, p.y_range, 8, 8)
    rep = solve(p, g, build_cl_quadrature(4, 2), SolverConfig(max_si=1))
    assert rep.n_si == 1 and not rep.converged
