"""Inexact source iteration with diffusion synthetic acceleration.

Each outer step solves the angle-decoupled even-parity system with the
current scattering source, integrates the scalar flux, stops once the
flux change is below ``eps_diff`` and otherwise adds a diffusion
correction.  The inner tolerance follows ``min(eps_cg0, gamma * diff)``.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import lowrank as lr
from .angular import AngularQuadrature
from .diffusion_solver import DiffusionSolver, build_diffusion_solver
from .geometry import SpatialGrid
from .krylov import CGConfig, lowrank_pcg
from .lowrank import TruncationPolicy
from .operators import (
    KroneckerOperator,
    SpatialOperators,
    build_spatial_operators,
    build_transport_operator,
)
from .precond import DPC
from .problems import MaterialSamples, ProblemSpec, sample_materials

log = logging.getLogger(__name__)

FORMATS = ("matrix", "htt", "fullrank")
INNER_PRECONDITIONERS = ("dpc", "amg", "direct")


@dataclass(frozen=True)
class SolverConfig:
    eps_diff: float = 1e-5
    max_si: int = 100
    eps_cg0: float = 1e-2
    gamma: float = 0.1
    max_cg: int = 200
    eps_trunc: float = 1e-6
    max_rank: int | None = None
    format: str = "matrix"
    inner_pc: str = "dpc"
    # fixed inner tolerance; None selects the adaptive schedule
    inner_tol: float | None = None
    # reaction term of the preconditioner's diffusion block
    dpc_reaction: str = "sigma_t"
    dpc_tol: float = 1e-2
    dpc_maxiter: int = 100
    dsa_tol: float = 1e-12
    warm_start: bool = True
    truncate_q: bool = True
    residual_atol: bool = True
    # project preconditioned residuals onto the Omega_z-even subspace
    z_symmetric: bool = True
    dense_cap: int = 4 * 2**30

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        for name in ("eps_diff", "eps_cg0", "eps_trunc", "dpc_tol", "dsa_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.inner_tol is not None and not self.inner_tol > 0:
            raise ValueError("inner_tol must be positive")
        if self.format not in FORMATS:
            raise ValueError(f"format must be one of {FORMATS}, got {self.format!r}")
        if self.inner_pc not in INNER_PRECONDITIONERS:
            raise ValueError(f"inner_pc must be one of {INNER_PRECONDITIONERS}")
        if self.dpc_reaction not in ("sigma_a", "sigma_t"):
            raise ValueError("dpc_reaction must be 'sigma_a' or 'sigma_t'")
        if self.max_si < 1 or self.max_cg < 1:
            raise ValueError("iteration caps must be at least 1")

    @property
    def policy(self) -> TruncationPolicy:
        return TruncationPolicy(self.eps_trunc, self.max_rank)

    def with_(self, **changes) -> "SolverConfig":
        return replace(self, **changes)


@dataclass
class Discretization:
    problem: ProblemSpec
    grid: SpatialGrid
    quad: AngularQuadrature
    materials: MaterialSamples = field(repr=False)
    ops: SpatialOperators = field(repr=False)
    transport: KroneckerOperator = field(repr=False)
    dsa: DiffusionSolver = field(repr=False)
    config: SolverConfig = field(repr=False, default=None)
    _dpc_solver: DiffusionSolver = field(repr=False, default=None)

    def dpc_solver(self) -> DiffusionSolver:
        """Multigrid for the preconditioner block (shared with DSA when identical)."""
        if self._dpc_solver is None:
            if self.config.dpc_reaction == "sigma_a":
                self._dpc_solver = self.dsa
            else:
                self._dpc_solver = build_diffusion_solver(self.grid, self.materials, reaction="sigma_t")
        return self._dpc_solver

    @property
    def n_space(self) -> int:
        return self.grid.interior_count

    @property
    def n_angle(self) -> int:
        return self.quad.n_half

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.n_space, self.quad.n_omega_z, self.quad.n_theta_half)

    @property
    def full_dof(self) -> int:
        return self.n_space * self.n_angle


def discretize(problem: ProblemSpec, grid: SpatialGrid, quad: AngularQuadrature, config: SolverConfig) -> Discretization:
    mats = sample_materials(problem, grid)
    ops = build_spatial_operators(grid, mats)
    return Discretization(
        problem,
        grid,
        quad,
        mats,
        ops,
        build_transport_operator(quad, ops),
        build_diffusion_solver(grid, mats, tol=config.dsa_tol),
        config,
    )


@dataclass
class IterationRecord:
    k: int
    phi_diff: float
    inner_iterations: float
    eps_cg: float
    ranks: object
    dof: int
    solution_compression: float
    iteration_compression: float
    dsa_correction: float
    inner_residual: float = float("nan")


@dataclass
class SolveReport:
    format: str
    phi: np.ndarray = field(repr=False)
    psi: object = field(repr=False)
    history: list = field(default_factory=list)
    converged: bool = False
    n_si: int = 0
    mean_inner_cg: float = 0.0
    mean_ipc: float = float("nan")
    wall_time: float = 0.0
    solution_compression: float = float("nan")
    iteration_compression: float = float("nan")
    ranks: object = None
    config: dict = field(default_factory=dict)

    def summary(self) -> dict:
        """JSON-ready scalars and histories (no arrays of solution values)."""
        out = {k: v for k, v in asdict(self).items() if k not in ("phi", "psi", "history")}
        out["history"] = [asdict(h) for h in self.history]
        return out


def compression_ratios(psi, cg_dofs: dict | None, full_dof: int) -> tuple[float, float]:
    """(solution ratio, per-iteration ratio).

    The per-iteration ratio sums the DOFs of the five CG iterates
    ``x, p, q, z, r`` and divides by five dense copies.  Without CG
    iterates (the inner solve returned immediately) only ``x`` is counted.
    """
    if full_dof <= 0:
        raise ValueError("full DOF count must be positive")
    sol = psi.dof() / full_dof
    if not cg_dofs:
        return sol, sol
    return sol, sum(cg_dofs.values()) / (len(cg_dofs) * full_dof)


def _ranks_of(v):
    return list(v.ranks) if isinstance(v, lr.HTTensor) else int(v.rank)


class _LowRankInner:
    """Inner solver of the low-rank formats (matrix or HTT)."""

    def __init__(self, disc: Discretization, config: SolverConfig):
        self.disc, self.config = disc, config
        self.dpc = DPC(disc.dpc_solver(), tol=config.dpc_tol, maxiter=config.dpc_maxiter)
        if config.z_symmetric:
            self.precond = lambda r: lr.z_even_part(self.dpc(r), disc.quad)
        else:
            self.precond = self.dpc
        self.cg_iterations = 0

    def __call__(self, source, psi0, tol):
        cfg = self.config
        b = lr.rank_one(source, self.disc.quad, cfg.format)
        x0 = psi0 if cfg.warm_start else None
        psi, rep = lowrank_pcg(self.disc.transport, b, self.precond, x0, CGConfig(tol, cfg.max_cg, cfg.policy, cfg.truncate_q, cfg.residual_atol))
        if not rep.converged:
            log.warning(
                "inner CG stopped at true relative residual %.2e (target %.2e) after %d iterations",
                rep.true_residual, tol, rep.iterations,
            )
        self.cg_iterations += rep.iterations
        sol, per_it = compression_ratios(psi, rep.dofs[-1] if rep.dofs else None, self.disc.full_dof)
        return psi, dict(
            inner_iterations=rep.iterations,
            ranks=_ranks_of(psi),
            dof=psi.dof(),
            solution_compression=sol,
            iteration_compression=per_it,
            inner_residual=rep.true_residual,
        )

    def phi(self, psi):
        return lr.integrate_angle(psi, self.disc.quad)

    def totals(self, n_si):
        st = self.dpc.stats
        ipc = st.iterations / st.columns if st.columns else float("nan")
        return self.cg_iterations / max(n_si, 1), ipc


def run_si_dsa(disc: Discretization, config: SolverConfig, inner) -> SolveReport:
    """Outer loop shared by the low-rank and full-rank paths."""
    t0 = time.perf_counter()
    mats = disc.materials
    sigma_s = mats.interior("sigma_s")
    source = mats.interior("source")
    scattering = bool(np.any(sigma_s > 0))
    report = SolveReport(format=config.format, phi=None, psi=None, config=asdict(config))

    phi = np.zeros(disc.n_space)
    psi = None
    eps_cg = config.eps_cg0
    for k in range(1, config.max_si + 1):
        tol = eps_cg if config.inner_tol is None else config.inner_tol
        if not scattering:
            # the source does not depend on phi: one accurate solve is final
            tol = min(tol, config.gamma * config.eps_diff)
        psi, info = inner(sigma_s * phi + source, psi, tol)
        phi_star = inner.phi(psi)
        diff = float(np.max(np.abs(phi_star - phi)))
        done = diff <= config.eps_diff or not scattering
        correction = 0.0
        if not done:
            dphi = disc.dsa.solve(sigma_s * (phi_star - phi))
            correction = float(np.max(np.abs(dphi)))
            phi_next = phi_star + dphi
        report.history.append(IterationRecord(k=k, phi_diff=diff, eps_cg=tol, dsa_correction=correction, **info))
        log.info("SI %d: |dphi|_inf = %.3e, inner its = %s, inner tol = %.1e", k, diff, info["inner_iterations"], tol)
        if done:
            phi = phi_star
            report.converged = True
            break
        phi = phi_next
        eps_cg = min(config.eps_cg0, config.gamma * diff)
    else:
        phi = phi_star

    report.phi, report.psi = phi, psi
    report.n_si = len(report.history)
    report.mean_inner_cg, report.mean_ipc = inner.totals(report.n_si)
    last = report.history[-1]
    report.solution_compression = last.solution_compression
    report.iteration_compression = last.iteration_compression
    report.ranks = last.ranks
    report.wall_time = time.perf_counter() - t0
    return report


def solve(problem: ProblemSpec, grid: SpatialGrid, quad: AngularQuadrature, config: SolverConfig = SolverConfig()) -> SolveReport:
    """Run SI-DSA in the configured format."""
    if config.format == "fullrank":
        from .fullrank import solve_fullrank

        return solve_fullrank(problem, grid, quad, config)[1]
    disc = discretize(problem, grid, quad, config)
    return run_si_dsa(disc, config, _LowRankInner(disc, config))
