"""Geometric multigrid preconditioned CG for the diffusion operator.

The hierarchy coarsens a vertex-centred grid by a factor two as long as
both cell counts are even; each level re-discretizes
``-(D_xx + D_yy) / 3 + Sigma_a`` from injected material samples (or uses
the Galerkin product on request).  The coarsest level is factorized.
Grids with an odd cell count therefore get a single direct level.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import SpatialGrid
from .krylov import BlockCGResult, block_pcg
from .operators import build_spatial_operators, diag_matrix
from .problems import MaterialSamples

# below this many interior unknowns a level is solved directly
COARSEST_SIZE = 64


class DiffusionConvergenceError(RuntimeError):
    def __init__(self, message, result: BlockCGResult):
        super().__init__(message)
        self.result = result


def _prolongation_1d(n_fine: int) -> sp.csr_matrix:
    """Linear interpolation from the ``n/2 - 1`` coarse to ``n - 1`` fine interior nodes."""
    nc = n_fine // 2 - 1
    rows, cols, vals = [], [], []
    for c in range(nc):
        f = 2 * c + 1  # fine interior index of coarse node c
        rows += [f - 1, f, f + 1]
        cols += [c, c, c]
        vals += [0.5, 1.0, 0.5]
    return sp.csr_matrix((vals, (rows, cols)), shape=(n_fine - 1, nc))


@dataclass
class _Level:
    a: sp.csr_matrix
    inv_diag: np.ndarray
    p: sp.csr_matrix | None = None  # prolongation from the next coarser level
    lu: object = None


@dataclass
class DiffusionSolver:
    """SPD diffusion solve with a V(2,2) damped-Jacobi multigrid preconditioner."""

    levels: list = field(repr=False)
    tol: float = 1e-12
    maxiter: int = 200
    omega: float = 0.8
    sweeps: int = 2

    @property
    def operator(self) -> sp.csr_matrix:
        return self.levels[0].a

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def _vcycle(self, lev: int, b: np.ndarray) -> np.ndarray:
        L = self.levels[lev]
        if L.lu is not None:
            return L.lu.solve(b)
        w = self.omega * L.inv_diag[:, None]
        x = w * b
        for _ in range(self.sweeps - 1):
            x += w * (b - L.a @ x)
        r = b - L.a @ x
        x += L.p @ self._vcycle(lev + 1, 0.25 * (L.p.T @ r))
        for _ in range(self.sweeps):
            x += w * (b - L.a @ x)
        return x

    def precondition(self, r: np.ndarray) -> np.ndarray:
        """One V-cycle applied to every column of ``r``."""
        r = np.asarray(r, float)
        if r.ndim == 1:
            return self._vcycle(0, r[:, None])[:, 0]
        return self._vcycle(0, r)

    def solve_block(self, f, tol: float | None = None, maxiter: int | None = None, x0=None) -> BlockCGResult:
        """Column-wise MG-preconditioned CG; never raises on non-convergence."""
        a = self.operator
        return block_pcg(
            lambda p, cols: a @ p,
            f,
            self.tol if tol is None else tol,
            self.maxiter if maxiter is None else maxiter,
            apply_m=lambda r, cols: self._vcycle(0, r),
            x0=x0,
        )

    def solve(self, f, tol: float | None = None, maxiter: int | None = None) -> np.ndarray:
        """Solve ``A u = f`` (vector or column block) to relative residual ``tol``.

        Raises :class:`DiffusionConvergenceError` carrying the achieved
        residuals when the iteration cap is hit.
        """
        res = self.solve_block(f, tol, maxiter)
        if not np.all(res.converged):
            raise DiffusionConvergenceError(
                f"diffusion solve stalled at relative residual {np.max(res.residuals):.3e}", res
            )
        return res.x


REACTIONS = ("sigma_a", "sigma_t")


def diffusion_operator(grid: SpatialGrid, materials: MaterialSamples, reaction: str = "sigma_a"):
    """``-(D_xx + D_yy) / 3 + diag(reaction)`` on the interior unknowns."""
    if reaction not in REACTIONS:
        raise ValueError(f"reaction must be one of {REACTIONS}, got {reaction!r}")
    ops = build_spatial_operators(grid, materials)
    return (-(ops.dxx + ops.dyy) / 3.0 + diag_matrix(materials.interior(reaction))).tocsr()


def build_diffusion_solver(
    grid: SpatialGrid,
    materials: MaterialSamples,
    tol: float = 1e-12,
    maxiter: int = 200,
    galerkin: bool = False,
    coarsest_size: int = COARSEST_SIZE,
    reaction: str = "sigma_a",
) -> DiffusionSolver:
    """Multigrid solver for ``-(D_xx + D_yy) / 3 + diag(reaction)``.

    ``reaction="sigma_a"`` gives the DSA operator.  ``"sigma_t"`` gives the
    angular average of the per-direction operators, used by the
    diffusion preconditioner.
    """
    a = diffusion_operator(grid, materials, reaction)
    levels = []
    g, mats = grid, materials
    while True:
        coarsenable = g.nx % 2 == 0 and g.ny % 2 == 0 and g.nx >= 4 and g.ny >= 4
        if not coarsenable or g.interior_count <= coarsest_size:
            levels.append(_Level(a.tocsr(), 1.0 / a.diagonal(), lu=spla.splu(a.tocsc())))
            break
        p = sp.kron(_prolongation_1d(g.ny), _prolongation_1d(g.nx)).tocsr()
        levels.append(_Level(a.tocsr(), 1.0 / a.diagonal(), p=p))
        g, mats = g.coarsen(), mats.restrict()
        if galerkin:
            a = (0.25 * (p.T @ a @ p)).tocsr()
        else:
            a = diffusion_operator(g, mats, reaction)
    return DiffusionSolver(levels, tol=tol, maxiter=maxiter)


def solve_diffusion(solver: DiffusionSolver, f, tol: float | None = None) -> np.ndarray:
    return solver.solve(f, tol)
