"""Finite-difference operators of the even-parity system.

All spatial operators act on interior grid values (homogeneous Dirichlet
data eliminated) and use the divergence form with a negative centre
coefficient, so ``-D_xx`` and ``-D_yy`` are positive semidefinite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .angular import AngularQuadrature
from .geometry import SpatialGrid
from .problems import MaterialSamples


def _stencil_matrix(grid: SpatialGrid, stencil: dict) -> sp.csr_matrix:
    """Assemble ``{(di, dj): coeff}`` with coeff arrays of ``interior_shape``.

    Couplings that leave the interior are dropped (Dirichlet zero).
    """
    ny1, nx1 = grid.interior_shape
    jj, ii = np.meshgrid(np.arange(ny1), np.arange(nx1), indexing="ij")
    rows, cols, vals = [], [], []
    for (di, dj), coeff in stencil.items():
        coeff = np.broadcast_to(coeff, (ny1, nx1))
        ti, tj = ii + di, jj + dj
        m = (ti >= 0) & (ti < nx1) & (tj >= 0) & (tj < ny1) & (coeff != 0)
        rows.append((jj * nx1 + ii)[m])
        cols.append((tj * nx1 + ti)[m])
        vals.append(coeff[m])
    n = grid.interior_count
    mat = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    return mat.tocsr()


def build_dxx(grid: SpatialGrid, materials: MaterialSamples) -> sp.csr_matrix:
    inv = 1.0 / materials.sigma_t_half_x[1:-1, :]
    west, east = inv[:, :-1], inv[:, 1:]
    h2 = grid.dx ** 2
    return _stencil_matrix(grid, {(-1, 0): west / h2, (0, 0): -(west + east) / h2, (1, 0): east / h2})


def build_dyy(grid: SpatialGrid, materials: MaterialSamples) -> sp.csr_matrix:
    inv = 1.0 / materials.sigma_t_half_y[:, 1:-1]
    south, north = inv[:-1, :], inv[1:, :]
    h2 = grid.dy ** 2
    return _stencil_matrix(grid, {(0, -1): south / h2, (0, 0): -(south + north) / h2, (0, 1): north / h2})


def cross_node_kappa(materials: MaterialSamples) -> np.ndarray:
    """Node ``1/sigma_t`` used by the mixed stencils, limited for definiteness.

    Returns ``s_n * k_n`` with ``s_n = min(1, min_e k_e / mean(k at ends of e))``
    taken over the (up to four) edges incident to node ``n``. For smooth
    fields the ratio differs from one by ``O(h^2)``, so second-order
    consistency is kept.
    """
    k = 1.0 / materials.sigma_t_nodes
    kx = 1.0 / materials.sigma_t_half_x
    ky = 1.0 / materials.sigma_t_half_y
    rx = kx / (0.5 * (k[:, 1:] + k[:, :-1]))
    ry = ky / (0.5 * (k[1:, :] + k[:-1, :]))
    scale = np.ones_like(k)
    scale[:, 1:] = np.minimum(scale[:, 1:], rx)
    scale[:, :-1] = np.minimum(scale[:, :-1], rx)
    scale[1:, :] = np.minimum(scale[1:, :], ry)
    scale[:-1, :] = np.minimum(scale[:-1, :], ry)
    return scale * k


def build_dcross(grid: SpatialGrid, materials: MaterialSamples) -> sp.csr_matrix:
    """Sum of the two mixed-derivative stencils ``D_xy + D_yx``.

    The stencils use node samples of ``1/sigma_t``. Summation by parts turns
    their quadratic form into a sum of node terms ``k_n * dx(u) * dy(u)``
    over central differences, which the edge terms of ``D_xx`` and ``D_yy``
    dominate as long as each edge's half-point ``1/sigma_t`` is at least the
    mean of the two node values at its ends. Where a material jump falls
    between grid points that can fail, so node values are scaled down by
    the worst ratio over their incident edges (see :func:`cross_node_kappa`).
    Wherever the condition already holds the stencil is unchanged.
    """
    s = cross_node_kappa(materials)
    e, w = s[1:-1, 2:], s[1:-1, :-2]
    n, so = s[2:, 1:-1], s[:-2, 1:-1]
    f = 1.0 / (4.0 * grid.dx * grid.dy)
    return _stencil_matrix(
        grid,
        {
            (1, 1): f * (e + n),
            (1, -1): -f * (e + so),
            (-1, 1): -f * (w + n),
            (-1, -1): f * (w + so),
        },
    )


def diag_matrix(values) -> sp.csr_matrix:
    return sp.diags(np.asarray(values, float), format="csr")


@dataclass(frozen=True)
class SpatialOperators:
    dxx: sp.csr_matrix = field(repr=False)
    dyy: sp.csr_matrix = field(repr=False)
    dcross: sp.csr_matrix = field(repr=False)
    sigma_t: sp.csr_matrix = field(repr=False)
    sigma_s: sp.csr_matrix = field(repr=False)
    sigma_a: sp.csr_matrix = field(repr=False)


def build_spatial_operators(grid: SpatialGrid, materials: MaterialSamples) -> SpatialOperators:
    return SpatialOperators(
        dxx=build_dxx(grid, materials),
        dyy=build_dyy(grid, materials),
        dcross=build_dcross(grid, materials),
        sigma_t=diag_matrix(materials.interior("sigma_t")),
        sigma_s=diag_matrix(materials.interior("sigma_s")),
        sigma_a=diag_matrix(materials.interior("sigma_a")),
    )


def build_angle_operator(quad: AngularQuadrature, j: int, ops: SpatialOperators) -> sp.csr_matrix:
    """Per-direction operator for the ``j``-th half-sphere point."""
    ox, oy, _ = quad.half_points[j]
    return (-(ox * ox * ops.dxx + ox * oy * ops.dcross + oy * oy * ops.dyy) + ops.sigma_t).tocsr()


def build_dsa_operator(ops: SpatialOperators) -> sp.csr_matrix:
    return (-(ops.dxx + ops.dyy) / 3.0 + ops.sigma_a).tocsr()


@dataclass(frozen=True)
class KroneckerTerm:
    """``diag(angle) (x) space``; ``angle`` optionally split as ``z (x) theta``."""

    angle: np.ndarray
    space: sp.spmatrix
    z_factor: np.ndarray | None = None
    theta_factor: np.ndarray | None = None


@dataclass(frozen=True)
class KroneckerOperator:
    """Sum of Kronecker terms acting on (space x half-angle) arrays."""

    terms: tuple[KroneckerTerm, ...]

    @property
    def n_space(self) -> int:
        return self.terms[0].space.shape[0]

    @property
    def n_angle(self) -> int:
        return self.terms[0].angle.shape[0]

    def apply_dense(self, psi: np.ndarray) -> np.ndarray:
        """Apply to a dense ``(n_space, n_angle)`` array."""
        out = np.zeros_like(psi, dtype=float)
        for t in self.terms:
            out += (t.space @ psi) * t.angle
        return out

    def to_dense(self) -> np.ndarray:
        """Assembled matrix acting on the angle-major vector ``psi.ravel('F')``."""
        return sum(np.kron(np.diag(t.angle), t.space.toarray()) for t in self.terms)

    def angle_block(self, j: int) -> sp.csr_matrix:
        return sum(t.angle[j] * t.space for t in self.terms).tocsr()


def build_transport_operator(quad: AngularQuadrature, ops: SpatialOperators) -> KroneckerOperator:
    """``-(D_x2 (x) D_xx + D_xy (x) D_cross + D_y2 (x) D_yy) + I (x) Sigma_t``."""
    factors = quad.angular_factors()
    terms = []
    for key, space in (("xx", ops.dxx), ("xy", ops.dcross), ("yy", ops.dyy)):
        zf, tf = factors[key]
        terms.append(KroneckerTerm(np.outer(-zf, tf).ravel(), space, -zf, tf))
    nz, nt = quad.n_omega_z, quad.n_theta_half
    terms.append(KroneckerTerm(np.ones(nz * nt), ops.sigma_t, np.ones(nz), np.ones(nt)))
    return KroneckerOperator(tuple(terms))
