"""Full-rank reference solver, effective ranks and solution comparison.

The even parity is stored as a dense ``(space, half-angle)`` array.  Inner
solves treat every angle independently with one of three per-angle
strategies:

``amg``
    CG preconditioned by one smoothed-aggregation V-cycle per angle.
``dpc``
    CG preconditioned by the full-rank diffusion preconditioner.
``direct``
    sparse LU per distinct angular operator (no inner iterations); used
    for fast near-exact references.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from . import lowrank as lr
from .angular import AngularQuadrature
from .geometry import SpatialGrid
from .krylov import CGConfig, fullrank_pcg
from .lowrank import HTTensor, LowRankMatrix, TruncationPolicy, tail_rank
from .precond import DPC, apply_dpc_fullrank
from .problems import ProblemSpec
from .sidsa import Discretization, SolverConfig, SolveReport, discretize, run_si_dsa

log = logging.getLogger(__name__)

# dense (space x angle) arrays alive at once inside the inner CG
_WORK_ARRAYS = 6


class DenseMemoryError(MemoryError):
    pass


@dataclass
class DenseSolution:
    psi: np.ndarray = field(repr=False)
    phi: np.ndarray = field(repr=False)
    dims: tuple = ()
    # quadrature data of the discrete L2 norm
    cell_area: float = 1.0
    angle_weights: np.ndarray | None = field(default=None, repr=False)

    @property
    def shape(self):
        return self.psi.shape

    def dof(self) -> int:
        return int(self.psi.size)

    def to_dense(self) -> np.ndarray:
        return self.psi


def dense_footprint(n_space: int, n_angle: int) -> int:
    """Bytes held by the dense inner solve."""
    return _WORK_ARRAYS * 8 * n_space * n_angle


def _unique_angles(disc: Discretization):
    """Group angles whose per-angle operators coincide (``Omega_z -> -Omega_z``)."""
    coeffs = np.stack([t.angle for t in disc.transport.terms])
    _, first, inverse = np.unique(np.round(coeffs, 13), axis=1, return_index=True, return_inverse=True)
    return first, inverse.ravel()


class _GroupedSolver:
    """Per-distinct-angle objects applied to column blocks."""

    def __init__(self, disc: Discretization, make):
        self.first, self.inverse = _unique_angles(disc)
        self.items = [make(disc.transport.angle_block(j)) for j in self.first]

    def groups(self, cols):
        labels = self.inverse[cols]
        for u in np.unique(labels):
            yield self.items[u], np.flatnonzero(labels == u)


class _AMGPreconditioner(_GroupedSolver):
    def __init__(self, disc):
        import pyamg

        super().__init__(disc, lambda a: pyamg.smoothed_aggregation_solver(a.tocsr()).aspreconditioner(cycle="V"))

    def __call__(self, r, cols):
        out = np.empty_like(r)
        for m, idx in self.groups(cols):
            for i in idx:
                out[:, i] = m @ r[:, i]
        return out


class _DirectSolver(_GroupedSolver):
    def __init__(self, disc):
        super().__init__(disc, lambda a: spla.splu(a.tocsc()))

    def __call__(self, b):
        out = np.empty_like(b)
        for lu, idx in self.groups(np.arange(b.shape[1])):
            out[:, idx] = lu.solve(np.ascontiguousarray(b[:, idx]))
        return out


class _FullRankInner:
    def __init__(self, disc: Discretization, config: SolverConfig):
        self.disc, self.config = disc, config
        self.weights = disc.quad.half_weights
        self.dpc = None
        self.precond = None
        self.direct = None
        if config.inner_pc == "amg":
            self.precond = _AMGPreconditioner(disc)
        elif config.inner_pc == "dpc":
            self.dpc = DPC(disc.dpc_solver(), tol=config.dpc_tol, maxiter=config.dpc_maxiter)
            self.precond = lambda r, cols: apply_dpc_fullrank(self.dpc, r, cols)
        else:
            self.direct = _DirectSolver(disc)
        self.angle_iterations = 0

    def __call__(self, source, psi0, tol):
        disc = self.disc
        b = np.repeat(source[:, None], disc.n_angle, axis=1)
        if self.direct is not None:
            psi = self.direct(b)
            its, res = 1.0, float("nan")
            self.angle_iterations += disc.n_angle
        else:
            x0 = psi0 if (self.config.warm_start and psi0 is not None) else None
            psi, rep = fullrank_pcg(
                disc.transport, b, self.precond, CGConfig(tol, self.config.max_cg), x0=x0
            )
            if not rep.converged:
                log.warning("full-rank inner CG hit the iteration cap (max residual %.2e)", rep.residuals.max())
            self.angle_iterations += int(rep.iterations.sum())
            its, res = rep.mean_iterations, float(rep.residuals.max())
        return psi, dict(
            inner_iterations=its,
            ranks=int(min(psi.shape)),
            dof=int(psi.size),
            solution_compression=1.0,
            iteration_compression=1.0,
            inner_residual=res,
        )

    def phi(self, psi):
        return psi @ self.weights

    def totals(self, n_si):
        mean_inner = self.angle_iterations / (self.disc.n_angle * max(n_si, 1))
        if self.dpc is None or not self.dpc.stats.columns:
            return mean_inner, float("nan")
        return mean_inner, self.dpc.stats.iterations / self.dpc.stats.columns


def solve_fullrank(
    problem: ProblemSpec,
    grid: SpatialGrid,
    quad: AngularQuadrature,
    config: SolverConfig = SolverConfig(format="fullrank", inner_pc="amg", inner_tol=1e-12),
) -> tuple[DenseSolution, SolveReport]:
    """SI-DSA with dense per-angle inner solves.

    Raises :class:`DenseMemoryError` when the dense working set would
    exceed ``config.dense_cap`` bytes.
    """
    config = config.with_(format="fullrank")
    need = dense_footprint(grid.interior_count, quad.n_half)
    if need > config.dense_cap:
        raise DenseMemoryError(
            f"dense solve needs about {need / 2**30:.2f} GiB, above the cap of "
            f"{config.dense_cap / 2**30:.2f} GiB"
        )
    disc = discretize(problem, grid, quad, config)
    report = run_si_dsa(disc, config, _FullRankInner(disc, config))
    # full-sphere weights of the half-sphere points: each stands for itself
    # and its mirror image, so the stored half weights count twice
    sol = DenseSolution(report.psi, report.phi, disc.dims, grid.dx * grid.dy, 0.5 * quad.half_weights)
    report.psi = sol
    return sol, report


def effective_rank(sol, policy: TruncationPolicy = TruncationPolicy()) -> int:
    """Number of singular values kept by the relative tail criterion."""
    psi = sol.psi if isinstance(sol, DenseSolution) else np.asarray(sol, float)
    s = lr.robust_svd(psi, compute_uv=False)
    norm = float(np.sqrt(np.sum(s * s)))
    if norm == 0.0:
        return 0
    return tail_rank(s, policy.eps * norm, policy.max_rank)


NORMS = ("l2", "frobenius")


def compare(lr_psi, lr_phi, ref: DenseSolution, norm: str = "l2") -> tuple[float, float]:
    """Norms of the even-parity and scalar-flux differences.

    ``norm="l2"`` is the discrete L2 norm of the grid functions:
    ``sqrt(dx dy sum_i sum_j w_j e_ij^2)`` for the even parity (``w_j``
    the full-sphere weights, summing to one half over the stored points)
    and ``sqrt(dx dy sum_i e_i^2)`` for the flux.  It is insensitive to the
    resolution, unlike ``norm="frobenius"`` (plain vector 2-norms).
    """
    if norm not in NORMS:
        raise ValueError(f"norm must be one of {NORMS}, got {norm!r}")
    psi = lr_psi.to_dense() if hasattr(lr_psi, "to_dense") else np.asarray(lr_psi, float)
    e_psi = psi - ref.psi
    e_phi = np.asarray(lr_phi, float) - ref.phi
    if norm == "frobenius":
        return float(np.linalg.norm(e_psi)), float(np.linalg.norm(e_phi))
    if ref.angle_weights is None:
        raise ValueError("reference carries no quadrature weights; use norm='frobenius'")
    area = ref.cell_area
    return (
        float(np.sqrt(area * np.sum(e_psi**2 @ ref.angle_weights))),
        float(np.sqrt(area) * np.linalg.norm(e_phi)),
    )


def hierarchical_singular_values(sol, dims=None) -> dict:
    """Singular values of every dimension-tree matricization.

    Keys ``x`` and ``oz_theta`` (identical, the root split), ``oz`` and
    ``theta``.  Dense inputs need ``dims = (n_space, n_z, n_theta_half)``
    unless they are :class:`DenseSolution` objects.
    """
    if isinstance(sol, HTTensor):
        return lr.ht_node_singular_values(sol)
    if isinstance(sol, DenseSolution):
        dims = dims or sol.dims
        sol = sol.psi
    elif isinstance(sol, LowRankMatrix):
        sol = sol.to_dense()
    if dims is None:
        raise ValueError("dims are required for dense input")
    sol = np.asarray(sol, float)
    if not np.any(sol):
        empty = np.zeros(0)
        return {"x": empty, "oz_theta": empty, "oz": empty, "theta": empty}
    return lr.dense_node_singular_values(sol, dims)
