"""Conjugate gradient solvers.

``block_pcg`` runs independent PCG iterations on the columns of a dense
block (shared by the multigrid, the full-rank inner solves and the
second level of the diffusion preconditioner).  ``lowrank_pcg`` is the
truncated low-rank PCG on matrix or HTT containers.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import lowrank as lr
from .lowrank import TruncationPolicy
from .operators import KroneckerOperator

log = logging.getLogger(__name__)


class BreakdownError(RuntimeError):
    """``<p, A p> <= 0``: the operator is indefinite or truncation destroyed conjugacy."""


# ---------------------------------------------------------------------------
# column-wise dense PCG


@dataclass
class BlockCGResult:
    x: np.ndarray
    iterations: np.ndarray
    residuals: np.ndarray
    converged: np.ndarray

    @property
    def total_iterations(self) -> int:
        return int(self.iterations.sum())


def block_pcg(apply_a, b, tol, maxiter=500, apply_m=None, x0=None) -> BlockCGResult:
    """Solve ``A_k x_k = b_k`` for every column ``k`` of ``b``.

    ``apply_a(P, cols)`` applies the operators of columns ``cols`` to the
    matching columns ``P``; ``apply_m`` has the same signature.  Columns
    leave the iteration as soon as their recurrence residual satisfies
    ``||r_k|| <= tol * ||b_k||``.
    """
    b = np.asarray(b, float)
    squeeze = b.ndim == 1
    if squeeze:
        b = b[:, None]
    n, m = b.shape
    bnorm = np.linalg.norm(b, axis=0)
    iters = np.zeros(m, dtype=int)
    allcols = np.arange(m)
    if x0 is None:
        x = np.zeros((n, m))
        r = b.copy()
    else:
        x = np.array(x0, float).reshape(n, m)
        r = b - apply_a(x, allcols)
    zero_b = bnorm == 0.0
    x[:, zero_b] = 0.0
    r[:, zero_b] = 0.0
    safe = np.where(zero_b, 1.0, bnorm)
    rel = np.linalg.norm(r, axis=0) / safe

    act = allcols[rel > tol]
    if act.size:
        ra = r[:, act]
        z = ra if apply_m is None else apply_m(ra, act)
        p = z.copy()
        rho = np.einsum("ij,ij->j", ra, z)
        for _ in range(maxiter):
            q = apply_a(p, act)
            pq = np.einsum("ij,ij->j", p, q)
            if np.any(pq <= 0):
                bad = act[pq <= 0]
                raise BreakdownError(f"non-positive curvature in columns {bad.tolist()}")
            alpha = rho / pq
            x[:, act] += alpha * p
            ra = ra - alpha * q
            r[:, act] = ra
            iters[act] += 1
            rel[act] = np.linalg.norm(ra, axis=0) / safe[act]
            keep = rel[act] > tol
            if not keep.any():
                break
            act, ra, p, rho = act[keep], ra[:, keep], p[:, keep], rho[keep]
            z = ra if apply_m is None else apply_m(ra, act)
            rho_new = np.einsum("ij,ij->j", ra, z)
            p = z + (rho_new / rho) * p
            rho = rho_new
    res = BlockCGResult(x, iters, rel, rel <= tol)
    if squeeze:
        res.x = x[:, 0]
    return res


# ---------------------------------------------------------------------------
# low-rank PCG


@dataclass(frozen=True)
class CGConfig:
    tol: float = 1e-2
    maxiter: int = 200
    policy: TruncationPolicy = field(default_factory=TruncationPolicy)
    # recompress q = A p as well (otherwise it keeps the full concatenated
    # rank of the operator output)
    truncate_q: bool = True
    # truncate the residual against eps * ||b|| instead of eps * ||r||; the
    # residual shrinks by orders of magnitude, and a tolerance tied to its
    # own norm keeps modes far below anything the stopping test can see
    residual_atol: bool = True

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("CG tolerance must be positive")
        if self.maxiter < 0:
            raise ValueError("maxiter must be nonnegative")


# iterates whose ranks and DOFs are tracked, in reporting order
TRACKED = ("x", "p", "q", "z", "r")


@dataclass
class CGReport:
    iterations: int = 0
    residuals: list = field(default_factory=list)
    ranks: list = field(default_factory=list)
    dofs: list = field(default_factory=list)
    converged: bool = False
    true_residual: float = float("nan")

    def record(self, residual: float, iterates: dict) -> None:
        self.residuals.append(float(residual))
        self.ranks.append({k: _rank_of(iterates[k]) for k in TRACKED})
        self.dofs.append({k: int(iterates[k].dof()) for k in TRACKED})


def _rank_of(v):
    return list(v.ranks) if isinstance(v, lr.HTTensor) else int(v.rank)


def lowrank_pcg(A: KroneckerOperator, b, M=None, x0=None, cfg: CGConfig = CGConfig()):
    """Preconditioned CG with truncation after every vector update.

    ``M`` maps a residual container to a preconditioned one (identity if
    ``None``).  ``x``, ``r`` and ``p`` are recompressed with ``cfg.policy``,
    ``q = A p`` too unless ``cfg.truncate_q`` is off.  With
    ``cfg.residual_atol`` the residual tolerance is ``eps * ||b||`` rather
    than relative to ``||r||``.  ``z = M r`` keeps the
    rank of ``r``.  The returned
    report's ``converged`` flag is decided by the true residual
    ``||b - A x|| / ||b||`` computed once at the end.
    """
    pol = cfg.policy
    trunc = lambda terms, coeffs: lr.truncated_sum(terms, pol, coeffs)
    precond = (lambda r: r) if M is None else M
    report = CGReport()

    bnorm = b.norm()
    if bnorm == 0.0:
        report.converged, report.true_residual = True, 0.0
        return lr.zeros_like(b), report
    r_atol = pol.eps * bnorm if cfg.residual_atol else 0.0

    if x0 is None or x0.norm() < 1e-15:
        x = lr.zeros_like(b)
        r = b
    else:
        x = x0
        r = trunc([b, lr.apply_operator(A, x)], [1.0, -1.0])

    rel = r.norm() / bnorm
    if rel > cfg.tol:
        z = precond(r)
        p = z
        rho = r.inner(z)
        for k in range(cfg.maxiter):
            q = lr.apply_operator(A, p)
            if cfg.truncate_q:
                q = trunc([q], None)
            pq = p.inner(q)
            if not pq > 0:
                raise BreakdownError(
                    f"<p, Ap> = {pq:.3e} at iteration {k + 1}; operator indefinite "
                    "or truncation too coarse"
                )
            alpha = rho / pq
            x = trunc([x, p], [1.0, alpha])
            r = lr.truncated_sum([r, q], pol, [1.0, -alpha], atol=r_atol)
            report.iterations = k + 1
            rel = r.norm() / bnorm
            if rel <= cfg.tol:
                report.record(rel, dict(x=x, p=p, q=q, z=z, r=r))
                break
            z = precond(r)
            rho_new = r.inner(z)
            p = trunc([z, p], [1.0, rho_new / rho])
            rho = rho_new
            report.record(rel, dict(x=x, p=p, q=q, z=z, r=r))

    true_r = trunc([b, lr.apply_operator(A, x)], [1.0, -1.0]).norm() / bnorm
    report.true_residual = float(true_r)
    report.converged = bool(true_r <= cfg.tol)
    if not report.converged:
        log.debug("low-rank PCG: true residual %.3e above tolerance %.3e", true_r, cfg.tol)
    return x, report


# ---------------------------------------------------------------------------
# full-rank PCG over independent angular blocks


@dataclass
class FullRankCGReport:
    iterations: np.ndarray
    residuals: np.ndarray
    converged: bool

    @property
    def mean_iterations(self) -> float:
        return float(np.mean(self.iterations)) if self.iterations.size else 0.0


def fullrank_pcg(A: KroneckerOperator, b, preconditioner=None, cfg: CGConfig = CGConfig(), x0=None):
    """Solve the block-diagonal system ``A_j psi_j = b_j`` for every angle ``j``.

    ``b`` is a dense ``(space, angle)`` array; ``preconditioner(R, cols)``
    acts on the columns ``cols`` (AMG per angle or full-rank DPC).
    """
    angle = np.stack([t.angle for t in A.terms])
    spaces = [t.space for t in A.terms]

    def apply_a(p, cols):
        out = np.zeros_like(p)
        for s, a in zip(spaces, angle):
            out += (s @ p) * a[cols]
        return out

    res = block_pcg(apply_a, b, cfg.tol, cfg.maxiter, preconditioner, x0)
    return res.x, FullRankCGReport(res.iterations, res.residuals, bool(np.all(res.converged)))
