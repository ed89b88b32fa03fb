"""Two-level diffusion preconditioner ``M = I (x) M_x``.

``M_x = -(D_xx + D_yy) / 3 + Sigma_a`` acts only on space, so its inverse
is applied column by column to the spatial factor of a low-rank object
(or to every angular block of a dense array).  The second level solves
each column by multigrid-preconditioned CG to a loose relative tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .diffusion_solver import DiffusionSolver
from .lowrank import HTTensor, LowRankMatrix


@dataclass
class DPCStats:
    applications: int = 0
    columns: int = 0
    iterations: int = 0

    def reset(self) -> None:
        self.applications = self.columns = self.iterations = 0


@dataclass
class DPC:
    solver: DiffusionSolver = field(repr=False)
    tol: float = 1e-2
    maxiter: int = 100
    stats: DPCStats = field(default_factory=DPCStats)

    def solve_columns(self, block: np.ndarray) -> np.ndarray:
        """Approximate ``M_x^{-1}`` on each column of ``block``."""
        if block.shape[1] == 0:
            return block.copy()
        res = self.solver.solve_block(block, tol=self.tol, maxiter=self.maxiter)
        self.stats.applications += 1
        self.stats.columns += block.shape[1]
        self.stats.iterations += res.total_iterations
        return res.x

    def __call__(self, r):
        return apply_dpc(self, r)


def apply_dpc(dpc: DPC, r):
    """Apply the preconditioner to a low-rank residual; ranks are unchanged."""
    if isinstance(r, (LowRankMatrix, HTTensor)):
        return r.map_space(dpc.solve_columns)
    raise TypeError(f"expected a low-rank container, got {type(r).__name__}")


def apply_dpc_fullrank(dpc: DPC, r: np.ndarray, cols=None) -> np.ndarray:
    """Apply ``M_x^{-1}`` to every angular column of a dense ``(space, angle)`` array.

    ``cols`` is accepted (and ignored) so the function can serve as a
    column-wise preconditioner for :func:`~lrsidsa.krylov.block_pcg`.
    """
    return dpc.solve_columns(np.asarray(r, float))
