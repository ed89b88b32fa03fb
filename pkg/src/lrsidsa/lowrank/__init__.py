"""Low-rank containers for the even parity and their arithmetic.

Both formats view the solution as a ``(n_space, n_half_angle)`` array;
the generic functions below dispatch on the container type.
"""

from __future__ import annotations

import numpy as np

from ..angular import AngularQuadrature
from ..operators import KroneckerOperator
from .htt import (
    HTTensor,
    dense_node_singular_values,
    ht_concat,
    ht_from_dense,
    ht_node_singular_values,
    ht_truncate,
    ht_truncated_sum,
)
from .matrix import LowRankMatrix, lr_from_dense, lr_truncated_sum
from .truncation import TruncationPolicy, robust_svd, tail_rank

__all__ = [
    "HTTensor",
    "LowRankMatrix",
    "TruncationPolicy",
    "robust_svd",
    "apply_operator",
    "dof",
    "from_dense",
    "inner_product",
    "integrate_angle",
    "node_singular_values",
    "rank_one",
    "tail_rank",
    "to_dense",
    "truncated_sum",
    "z_even_part",
    "zeros_like",
]


def _check_same_kind(terms):
    kinds = {type(t) for t in terms}
    if len(kinds) != 1:
        raise TypeError(f"cannot mix container types {kinds}")
    shapes = {t.shape for t in terms}
    if len(shapes) != 1:
        raise ValueError(f"dimension mismatch among terms: {shapes}")


def truncated_sum(terms, policy: TruncationPolicy, coeffs=None, atol: float = 0.0):
    """Recompressed linear combination ``sum(coeffs[i] * terms[i])``.

    The discarded part is at most ``max(policy.eps * ||sum||, atol)`` in
    Frobenius norm.
    """
    terms = list(terms)
    _check_same_kind(terms)
    if isinstance(terms[0], HTTensor):
        return ht_truncated_sum(terms, policy, coeffs, atol)
    return lr_truncated_sum(terms, policy, coeffs, atol)


def apply_operator(op: KroneckerOperator, v):
    """Exact (untruncated) application of a Kronecker-structured operator.

    The output rank is the input rank times the number of terms.
    """
    if v.shape != (op.n_space, op.n_angle):
        raise ValueError(f"operator acts on {(op.n_space, op.n_angle)}, got {v.shape}")
    if isinstance(v, HTTensor):
        outs = []
        for t in op.terms:
            if t.z_factor is None:
                raise ValueError("HTT application needs the rank-1 angular split of every term")
            outs.append(
                v.map_leaves(
                    fx=lambda u, s=t.space: s @ u,
                    fz=lambda u, z=t.z_factor: z[:, None] * u,
                    ft=lambda u, a=t.theta_factor: a[:, None] * u,
                )
            )
        return ht_concat(outs)
    if v.rank == 0:
        return v
    U = np.hstack([t.space @ v.space_basis for t in op.terms])
    V = np.hstack([t.angle[:, None] * v.angle_basis for t in op.terms])
    from scipy.linalg import block_diag

    S = block_diag(*([v.core] * len(op.terms)))
    return LowRankMatrix(U, S, V)


def inner_product(a, b) -> float:
    _check_same_kind([a, b])
    return a.inner(b)


def integrate_angle(v, quad: AngularQuadrature) -> np.ndarray:
    """Scalar flux ``sum_j w_j psi_j`` over the half sphere."""
    if isinstance(v, HTTensor):
        return v.integrate_angle(*quad.half_weight_factors())
    return v.integrate_angle(quad.half_weights)


def z_even_part(v, quad: AngularQuadrature):
    """Average of ``v`` and its reflection ``Omega_z -> -Omega_z``.

    Only the angular factor changes, so the rank is kept.  The even parity
    of an isotropic-source problem is invariant under the reflection and
    the transport operator commutes with it, so projecting Krylov vectors
    removes roundoff that would otherwise grow in the odd subspace.
    """
    nz, nt = quad.n_omega_z, quad.n_theta_half
    if isinstance(v, HTTensor):
        return v.map_leaves(fz=lambda u: 0.5 * (u + u[::-1]))
    return v.map_angle(lambda V: 0.5 * (V + V.reshape(nz, nt, -1)[::-1].reshape(V.shape)))


def to_dense(v) -> np.ndarray:
    return v.to_dense()


def from_dense(dense, policy: TruncationPolicy, fmt: str = "matrix", dims=None):
    """Compress a dense ``(n_space, n_angle)`` array.

    ``dims = (n_space, n_z, n_theta_half)`` is required for ``fmt="htt"``.
    """
    if fmt == "matrix":
        return lr_from_dense(dense, policy)
    if fmt == "htt":
        if dims is None:
            raise ValueError("HTT conversion needs dims=(n_space, n_z, n_theta)")
        return ht_from_dense(dense, dims, policy)
    raise ValueError(f"unknown low-rank format {fmt!r}")


def zeros_like(v):
    if isinstance(v, HTTensor):
        return HTTensor.zeros(*v.dims)
    return LowRankMatrix.zeros(*v.shape)


def rank_one(space_vec, quad: AngularQuadrature, fmt: str):
    """``space_vec (x) 1`` over the half sphere in the requested format."""
    if fmt == "htt":
        return HTTensor.outer(space_vec, np.ones(quad.n_omega_z), np.ones(quad.n_theta_half))
    return LowRankMatrix.outer(space_vec, np.ones(quad.n_half))


def dof(v) -> int:
    return v.dof()


def node_singular_values(v, dims=None) -> dict:
    """Per-node singular values of a container or a dense array."""
    if isinstance(v, HTTensor):
        return ht_node_singular_values(v)
    if isinstance(v, LowRankMatrix):
        if dims is None:
            return {"x": np.diag(v.core).copy() if v.rank else np.zeros(0)}
        v = v.to_dense()
    if dims is None:
        return {"x": robust_svd(np.asarray(v), compute_uv=False)}
    return dense_node_singular_values(v, dims)
