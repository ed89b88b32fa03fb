import numpy as np
import pytest

from lrsidsa.angular import build_cl_quadrature
from lrsidsa.geometry import build_grid
from lrsidsa.lowrank import HTTensor, LowRankMatrix
from lrsidsa.operators import build_spatial_operators, build_transport_operator
from lrsidsa.problems import problem_from_config, sample_materials


def random_lowrank(rng, n, m, r):
    return LowRankMatrix(rng.standard_normal((n, r)), np.diag(rng.standard_normal(r)), rng.standard_normal((m, r)))


def random_htt(rng, dims, ranks):
    """Random HTT with ranks (r1, r23, r2, r3); r1 must equal r23 or not, free."""
    n, nz, nt = dims
    r1, r23, r2, r3 = ranks
    return HTTensor(
        rng.standard_normal((n, r1)),
        rng.standard_normal((nz, r2)),
        rng.standard_normal((nt, r3)),
        rng.standard_normal((r2, r3, r23)),
        rng.standard_normal((r1, r23)),
    )


def random_problem(rng, scatter=1.0):
    """Smooth random positive cross sections on [-1, 1]^2."""
    a = rng.uniform(0.5, 2.0, size=3)

    class _F:
        def __init__(self, base, amp):
            self.base, self.amp = base, amp

        def __call__(self, x, y):
            return self.base + self.amp * np.sin(1.3 * x + 0.7) ** 2 * np.cos(0.9 * y - 0.2) ** 2

    spec = problem_from_config({"domain": {"x0": -1, "x1": 1, "y0": -1, "y1": 1}})
    from dataclasses import replace

    return replace(spec, sigma_s=_F(scatter * a[0], a[1]), sigma_a=_F(0.1, a[2]),
                   source=lambda x, y: np.exp(-(x * x + y * y)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def tiny_system(rng):
    """4x4 grid, CL(4,2): (grid, quad, materials, ops, transport operator)."""
    spec = random_problem(rng)
    grid = build_grid((-1, 1), (-1, 1), 4, 4)
    quad = build_cl_quadrature(4, 2)
    mats = sample_materials(spec, grid)
    ops = build_spatial_operators(grid, mats)
    return grid, quad, mats, ops, build_transport_operator(quad, ops)
