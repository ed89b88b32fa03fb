"""Low-rank matrix format ``psi = U S V^T`` over (space, half-angle)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .truncation import TruncationPolicy, is_cancelled, robust_svd, tail_rank


@dataclass(frozen=True)
class LowRankMatrix:
    space_basis: np.ndarray
    core: np.ndarray
    angle_basis: np.ndarray

    def __post_init__(self):
        U, S, V = self.space_basis, self.core, self.angle_basis
        if U.ndim != 2 or V.ndim != 2 or S.shape != (U.shape[1], V.shape[1]):
            raise ValueError(
                f"inconsistent factor shapes {U.shape}, {S.shape}, {V.shape}"
            )

    @classmethod
    def zeros(cls, n_space: int, n_angle: int) -> "LowRankMatrix":
        return cls(np.zeros((n_space, 0)), np.zeros((0, 0)), np.zeros((n_angle, 0)))

    @classmethod
    def outer(cls, space_vec, angle_vec, scale: float = 1.0) -> "LowRankMatrix":
        u = np.asarray(space_vec, float)[:, None]
        v = np.asarray(angle_vec, float)[:, None]
        return cls(u, np.array([[float(scale)]]), v)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.space_basis.shape[0], self.angle_basis.shape[0])

    @property
    def rank(self) -> int:
        return self.core.shape[0]

    @property
    def ranks(self) -> tuple[int, ...]:
        return (self.rank,)

    def dof(self) -> int:
        n, m = self.shape
        return (n + m) * self.rank + self.rank ** 2

    def to_dense(self) -> np.ndarray:
        if self.rank == 0:
            return np.zeros(self.shape)
        return self.space_basis @ self.core @ self.angle_basis.T

    def scaled(self, alpha: float) -> "LowRankMatrix":
        return LowRankMatrix(self.space_basis, alpha * self.core, self.angle_basis)

    def map_space(self, f) -> "LowRankMatrix":
        """Replace the space basis by ``f(space_basis)``."""
        if self.rank == 0:
            return self
        return LowRankMatrix(f(self.space_basis), self.core, self.angle_basis)

    def map_angle(self, f) -> "LowRankMatrix":
        if self.rank == 0:
            return self
        return LowRankMatrix(self.space_basis, self.core, f(self.angle_basis))

    def integrate_angle(self, weights) -> np.ndarray:
        if self.rank == 0:
            return np.zeros(self.shape[0])
        return self.space_basis @ (self.core @ (self.angle_basis.T @ weights))

    def inner(self, other: "LowRankMatrix") -> float:
        if self.rank == 0 or other.rank == 0:
            return 0.0
        m = self.core.T @ (self.space_basis.T @ other.space_basis) @ other.core
        n = self.angle_basis.T @ other.angle_basis
        return float(np.sum(m * n))

    def norm(self) -> float:
        return float(np.sqrt(max(self.inner(self), 0.0)))


def lr_truncated_sum(terms, policy: TruncationPolicy, coeffs=None, atol: float = 0.0) -> LowRankMatrix:
    """Recompress ``sum(c_i * terms[i])`` by QR of the stacked bases and SVD of the core.

    The result ``R`` satisfies ``||R - sum||_F <= eps * ||sum||_F``; its
    bases are orthonormal and its core is diagonal and nonincreasing.
    """
    terms = list(terms)
    if coeffs is None:
        coeffs = [1.0] * len(terms)
    n, m = terms[0].shape
    live = [(c, t) for c, t in zip(coeffs, terms) if t.rank > 0 and c != 0]
    if not live:
        return LowRankMatrix.zeros(n, m)
    U = np.hstack([t.space_basis for _, t in live])
    V = np.hstack([t.angle_basis for _, t in live])
    S = sla.block_diag(*[c * t.core for c, t in live])
    qu, ru = np.linalg.qr(U)
    qv, rv = np.linalg.qr(V)
    p, s, wt = robust_svd(ru @ S @ rv.T)
    norm = float(np.sqrt(np.sum(s * s)))
    if is_cancelled(norm, sum(abs(c) * t.norm() for c, t in live)):
        return LowRankMatrix.zeros(n, m)
    k = tail_rank(s, max(policy.eps * norm, atol), policy.max_rank)
    if k == 0:
        return LowRankMatrix.zeros(n, m)
    return LowRankMatrix(qu @ p[:, :k], np.diag(s[:k]), qv @ wt[:k].T)


def lr_from_dense(dense, policy: TruncationPolicy) -> LowRankMatrix:
    dense = np.asarray(dense, float)
    u, s, vt = robust_svd(dense, full_matrices=False)
    norm = float(np.sqrt(np.sum(s * s)))
    k = tail_rank(s, policy.eps * norm, policy.max_rank)
    if k == 0:
        return LowRankMatrix.zeros(*dense.shape)
    return LowRankMatrix(u[:, :k], np.diag(s[:k]), vt[:k].T)
