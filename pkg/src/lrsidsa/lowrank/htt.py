"""Hierarchical Tucker format on the tree {x, {Omega_z, theta}}.

Index convention: ``T[x, z, t] = sum U1[x,a] B123[a,c] B23[b,d,c] U2[z,b] U3[t,d]``.
The matrix view ``T.reshape(n_x, n_z * n_t)`` uses the same z-major angle
ordering as :class:`~lrsidsa.lowrank.matrix.LowRankMatrix`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .truncation import TruncationPolicy, is_cancelled, robust_svd, tail_rank

# non-root nodes of the tree: {x}, {z, theta}, {z}, {theta}
N_TREE_NODES = 4


@dataclass(frozen=True)
class HTTensor:
    leaf_x: np.ndarray
    leaf_oz: np.ndarray
    leaf_theta: np.ndarray
    transfer_23: np.ndarray
    transfer_root: np.ndarray

    def __post_init__(self):
        r1, r2, r3 = self.leaf_x.shape[1], self.leaf_oz.shape[1], self.leaf_theta.shape[1]
        b23, b123 = self.transfer_23, self.transfer_root
        if b23.ndim != 3 or b23.shape[:2] != (r2, r3) or b123.shape != (r1, b23.shape[2]):
            raise ValueError(
                f"inconsistent HTT shapes: leaves r=({r1},{r2},{r3}), "
                f"B23 {b23.shape}, B123 {b123.shape}"
            )

    @classmethod
    def zeros(cls, n_space: int, n_oz: int, n_theta: int) -> "HTTensor":
        return cls(
            np.zeros((n_space, 0)),
            np.zeros((n_oz, 0)),
            np.zeros((n_theta, 0)),
            np.zeros((0, 0, 0)),
            np.zeros((0, 0)),
        )

    @classmethod
    def outer(cls, space_vec, oz_vec, theta_vec, scale: float = 1.0) -> "HTTensor":
        col = lambda v: np.asarray(v, float)[:, None]
        return cls(
            col(space_vec), col(oz_vec), col(theta_vec), np.ones((1, 1, 1)), np.array([[float(scale)]])
        )

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.leaf_x.shape[0], self.leaf_oz.shape[0], self.leaf_theta.shape[0])

    @property
    def shape(self) -> tuple[int, int]:
        n, nz, nt = self.dims
        return (n, nz * nt)

    @property
    def ranks(self) -> tuple[int, int, int, int]:
        """(r1, r23, r2, r3)."""
        return (
            self.leaf_x.shape[1],
            self.transfer_23.shape[2],
            self.leaf_oz.shape[1],
            self.leaf_theta.shape[1],
        )

    @property
    def rank(self) -> int:
        return self.leaf_x.shape[1]

    @property
    def is_zero_rank(self) -> bool:
        return min(self.ranks) == 0

    def dof(self) -> int:
        n, nz, nt = self.dims
        r1, r23, r2, r3 = self.ranks
        return n * r1 + nz * r2 + nt * r3 + r1 * r23 + r2 * r3 * r23

    def angle_frame(self) -> np.ndarray:
        """``U23`` as an ``(n_z * n_t, r23)`` matrix."""
        u = np.einsum("zb,td,bdc->ztc", self.leaf_oz, self.leaf_theta, self.transfer_23)
        return u.reshape(-1, self.transfer_23.shape[2])

    def to_dense(self) -> np.ndarray:
        if self.is_zero_rank:
            return np.zeros(self.shape)
        return self.leaf_x @ self.transfer_root @ self.angle_frame().T

    def to_tensor(self) -> np.ndarray:
        return self.to_dense().reshape(self.dims)

    def scaled(self, alpha: float) -> "HTTensor":
        return HTTensor(self.leaf_x, self.leaf_oz, self.leaf_theta, self.transfer_23, alpha * self.transfer_root)

    def map_space(self, f) -> "HTTensor":
        if self.is_zero_rank:
            return self
        return HTTensor(f(self.leaf_x), self.leaf_oz, self.leaf_theta, self.transfer_23, self.transfer_root)

    def map_leaves(self, fx=None, fz=None, ft=None) -> "HTTensor":
        if self.is_zero_rank:
            return self
        ident = lambda a: a
        return HTTensor(
            (fx or ident)(self.leaf_x),
            (fz or ident)(self.leaf_oz),
            (ft or ident)(self.leaf_theta),
            self.transfer_23,
            self.transfer_root,
        )

    def integrate_angle(self, wz, wt) -> np.ndarray:
        """Contract the angular leaves with the rank-1 weights ``wz (x) wt``."""
        if self.is_zero_rank:
            return np.zeros(self.dims[0])
        u23 = np.einsum("bdc,b,d->c", self.transfer_23, self.leaf_oz.T @ wz, self.leaf_theta.T @ wt)
        return self.leaf_x @ (self.transfer_root @ u23)

    def inner(self, other: "HTTensor") -> float:
        if self.is_zero_rank or other.is_zero_rank:
            return 0.0
        g1 = self.leaf_x.T @ other.leaf_x
        g2 = self.leaf_oz.T @ other.leaf_oz
        g3 = self.leaf_theta.T @ other.leaf_theta
        t = np.einsum("bdc,bp,dq->pqc", self.transfer_23, g2, g3)
        g23 = t.reshape(-1, t.shape[2]).T @ other.transfer_23.reshape(-1, other.transfer_23.shape[2])
        return float(np.sum(self.transfer_root * (g1 @ other.transfer_root @ g23.T)))

    def norm(self) -> float:
        return float(np.sqrt(max(self.inner(self), 0.0)))


def _block_diag3(blocks):
    s0 = sum(b.shape[0] for b in blocks)
    s1 = sum(b.shape[1] for b in blocks)
    s2 = sum(b.shape[2] for b in blocks)
    out = np.zeros((s0, s1, s2))
    i = j = k = 0
    for b in blocks:
        out[i : i + b.shape[0], j : j + b.shape[1], k : k + b.shape[2]] = b
        i, j, k = i + b.shape[0], j + b.shape[1], k + b.shape[2]
    return out


def ht_concat(terms, coeffs=None) -> HTTensor:
    """Exact sum with block-structured transfer tensors (ranks add)."""
    terms = list(terms)
    if coeffs is None:
        coeffs = [1.0] * len(terms)
    live = [(c, t) for c, t in zip(coeffs, terms) if not t.is_zero_rank and c != 0]
    if not live:
        return HTTensor.zeros(*terms[0].dims)
    from scipy.linalg import block_diag

    return HTTensor(
        np.hstack([t.leaf_x for _, t in live]),
        np.hstack([t.leaf_oz for _, t in live]),
        np.hstack([t.leaf_theta for _, t in live]),
        _block_diag3([t.transfer_23 for _, t in live]),
        block_diag(*[c * t.transfer_root for c, t in live]),
    )


def _core_tensor(t: HTTensor):
    """Orthonormal leaf bases and the Tucker core ``C[a, b, d]`` of ``t``."""
    q1, r1 = np.linalg.qr(t.leaf_x)
    q2, r2 = np.linalg.qr(t.leaf_oz)
    q3, r3 = np.linalg.qr(t.leaf_theta)
    b23 = np.einsum("bdc,pb,qd->pqc", t.transfer_23, r2, r3)
    root = r1 @ t.transfer_root
    c = (root @ b23.reshape(-1, b23.shape[2]).T).reshape(root.shape[0], b23.shape[0], b23.shape[1])
    return q1, q2, q3, c


def _truncate_core(q1, q2, q3, core, policy: TruncationPolicy, scale: float = 0.0, atol: float = 0.0) -> HTTensor:
    """Leaves-to-root rounding of ``core x1 q1 x2 q2 x3 q3`` (orthonormal q's).

    Each of the three truncation steps (z leaf, theta leaf, {z, theta} node)
    discards a tail of norm at most ``eps ||T|| / sqrt(N_TREE_NODES)``; the
    errors are mutually orthogonal, so the total stays below ``eps ||T||``.
    The x leaf then has exactly the {z, theta} rank and costs nothing.
    """
    n, nz, nt = q1.shape[0], q2.shape[0], q3.shape[0]
    norm = float(np.linalg.norm(core))
    if norm == 0.0 or is_cancelled(norm, scale):
        return HTTensor.zeros(n, nz, nt)
    tol = max(policy.eps * norm, atol) / np.sqrt(N_TREE_NODES)
    r1 = core.shape[0]

    u, s, _ = robust_svd(core.transpose(1, 0, 2).reshape(core.shape[1], -1), full_matrices=False)
    k2 = tail_rank(s, tol, policy.max_rank)
    p2 = u[:, :k2]
    core = np.einsum("abd,bk->akd", core, p2)

    u, s, _ = robust_svd(core.transpose(2, 0, 1).reshape(core.shape[2], -1), full_matrices=False)
    k3 = tail_rank(s, tol, policy.max_rank)
    p3 = u[:, :k3]
    core = np.einsum("abd,dk->abk", core, p3)

    if k2 == 0 or k3 == 0:
        return HTTensor.zeros(n, nz, nt)
    w, s, zt = robust_svd(core.reshape(r1, k2 * k3).T, full_matrices=False)
    k = tail_rank(s, tol, policy.max_rank)
    if k == 0:
        return HTTensor.zeros(n, nz, nt)
    return HTTensor(
        leaf_x=q1 @ zt[:k].T,
        leaf_oz=q2 @ p2,
        leaf_theta=q3 @ p3,
        transfer_23=w[:, :k].reshape(k2, k3, k),
        transfer_root=np.diag(s[:k]),
    )


def ht_truncate(t: HTTensor, policy: TruncationPolicy) -> HTTensor:
    if t.is_zero_rank:
        return HTTensor.zeros(*t.dims)
    return _truncate_core(*_core_tensor(t), policy)


def ht_truncated_sum(terms, policy: TruncationPolicy, coeffs=None, atol: float = 0.0) -> HTTensor:
    terms = list(terms)
    if coeffs is None:
        coeffs = [1.0] * len(terms)
    total = ht_concat(terms, coeffs)
    if total.is_zero_rank:
        return total
    scale = sum(abs(c) * t.norm() for c, t in zip(coeffs, terms))
    return _truncate_core(*_core_tensor(total), policy, scale, atol)


def ht_from_dense(dense, dims, policy: TruncationPolicy) -> HTTensor:
    """Hierarchical SVD of a dense ``(n_x, n_z * n_t)`` array."""
    n, nz, nt = dims
    tensor = np.asarray(dense, float).reshape(n, nz, nt)
    q1 = robust_svd(tensor.reshape(n, -1), full_matrices=False)[0]
    q2 = robust_svd(tensor.transpose(1, 0, 2).reshape(nz, -1), full_matrices=False)[0]
    q3 = robust_svd(tensor.transpose(2, 0, 1).reshape(nt, -1), full_matrices=False)[0]
    core = np.einsum("xzt,xa,zb,td->abd", tensor, q1, q2, q3, optimize=True)
    return _truncate_core(q1, q2, q3, core, policy)


def ht_node_singular_values(t: HTTensor) -> dict:
    """Singular values of the matricization at every tree node."""
    if t.is_zero_rank:
        empty = np.zeros(0)
        return {"x": empty, "oz_theta": empty, "oz": empty, "theta": empty}
    _, _, _, c = _core_tensor(t)
    sv = lambda m: robust_svd(m, compute_uv=False)
    sx = sv(c.reshape(c.shape[0], -1))
    return {
        "x": sx,
        "oz_theta": sx.copy(),
        "oz": sv(c.transpose(1, 0, 2).reshape(c.shape[1], -1)),
        "theta": sv(c.transpose(2, 0, 1).reshape(c.shape[2], -1)),
    }


def dense_node_singular_values(dense, dims) -> dict:
    n, nz, nt = dims
    t = np.asarray(dense, float).reshape(n, nz, nt)
    sv = lambda m: robust_svd(m, compute_uv=False)
    sx = sv(t.reshape(n, -1))
    return {
        "x": sx,
        "oz_theta": sx.copy(),
        "oz": sv(t.transpose(1, 0, 2).reshape(nz, -1)),
        "theta": sv(t.transpose(2, 0, 1).reshape(nt, -1)),
    }
