"""Chebyshev-Legendre (CL) product quadrature on the unit sphere.

Points are ordered with the polar (Gauss-Legendre) index outermost and the
azimuthal (Chebyshev) index innermost, i.e. ``j = j_z * n_theta + j_theta``.
The half sphere ``Omega_y > 0`` is exactly the first ``n_theta // 2``
azimuthal points for every polar node, so restricted arrays reshape to
``(n_omega_z, n_theta // 2)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _legendre_and_derivative(n, x):
    p_prev = np.ones_like(x)
    p = x.copy()
    for k in range(2, n + 1):
        p_prev, p = p, ((2 * k - 1) * x * p - (k - 1) * p_prev) / k
    # P_n'(x) = n (x P_n - P_{n-1}) / (x^2 - 1)
    return p, n * (x * p - p_prev) / (x * x - 1.0)


def gauss_legendre(n: int, tol: float = 1e-15, maxiter: int = 100):
    """Normalized Gauss-Legendre rule on [-1, 1].

    Roots of P_n are found by Newton iteration started from the
    Chebyshev-type guesses ``cos(pi (i - 1/4) / (n + 1/2))``.

    Parameters
    ----------
    n : int
        Number of nodes, ``n >= 1``.

    Returns
    -------
    nodes : ndarray, shape (n,)
        Ascending roots of the degree-n Legendre polynomial.
    weights : ndarray, shape (n,)
        Positive weights summing to 1 (standard weights divided by 2).
    """
    if n < 1:
        raise ValueError(f"gauss_legendre needs n >= 1, got {n}")
    i = np.arange(1, n + 1)
    x = np.cos(np.pi * (i - 0.25) / (n + 0.5))
    for _ in range(maxiter):
        p, dp = _legendre_and_derivative(n, x)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) <= tol:
            break
    _, dp = _legendre_and_derivative(n, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    order = np.argsort(x)
    x, w = x[order], w[order]
    # enforce exact symmetry of the rule
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    return x, w / w.sum()


@dataclass(frozen=True)
class AngularQuadrature:
    n_theta: int
    n_omega_z: int
    points: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    theta: np.ndarray = field(repr=False)
    theta_weights: np.ndarray = field(repr=False)
    omega_z: np.ndarray = field(repr=False)
    omega_z_weights: np.ndarray = field(repr=False)
    half_indices: np.ndarray = field(repr=False)
    half_weights: np.ndarray = field(repr=False)

    @property
    def n_points(self) -> int:
        return self.n_theta * self.n_omega_z

    @property
    def n_half(self) -> int:
        return self.n_points // 2

    @property
    def n_theta_half(self) -> int:
        return self.n_theta // 2

    @property
    def half_points(self) -> np.ndarray:
        return self.points[self.half_indices]

    @property
    def half_theta(self) -> np.ndarray:
        return self.theta[: self.n_theta_half]

    def half_weight_factors(self):
        """Rank-1 split of ``half_weights`` into (Omega_z, theta) vectors."""
        wz = self.omega_z_weights.copy()
        wt = 2.0 * self.theta_weights[: self.n_theta_half]
        return wz, wt

    def angular_factors(self):
        """Diagonals of Omega_x^2, Omega_x Omega_y, Omega_y^2 on S+.

        Each is returned as an exact rank-1 pair ``(z_factor, theta_factor)``
        whose outer product, flattened z-major, gives the diagonal.
        """
        th = self.half_theta
        oz = 1.0 - self.omega_z ** 2
        return {
            "xx": (oz, np.cos(th) ** 2),
            "xy": (oz, np.cos(th) * np.sin(th)),
            "yy": (oz, np.sin(th) ** 2),
        }


def build_cl_quadrature(n_theta: int, n_omega_z: int) -> AngularQuadrature:
    """Normalized CL(n_theta, n_omega_z) rule with its S+ restriction."""
    if n_theta < 2 or n_theta % 2:
        raise ValueError(f"n_theta must be a positive even integer, got {n_theta}")
    if n_omega_z < 1:
        raise ValueError(f"n_omega_z must be >= 1, got {n_omega_z}")
    j = np.arange(1, n_theta + 1)
    theta = 2.0 * j * np.pi / n_theta - np.pi / n_theta
    wt = np.full(n_theta, 1.0 / n_theta)
    oz, wz = gauss_legendre(n_omega_z)

    s = np.sqrt(1.0 - oz ** 2)
    px = np.outer(s, np.cos(theta)).ravel()
    py = np.outer(s, np.sin(theta)).ravel()
    pz = np.repeat(oz, n_theta)
    points = np.column_stack([px, py, pz])
    weights = np.outer(wz, wt).ravel()

    half = np.flatnonzero(py > 0.0)
    if half.size != points.shape[0] // 2:
        raise RuntimeError("half-sphere selection did not split the rule evenly")
    half_weights = 2.0 * weights[half]
    for arr in (points, weights, theta, wt, oz, wz, half, half_weights):
        arr.setflags(write=False)
    return AngularQuadrature(
        n_theta=n_theta,
        n_omega_z=n_omega_z,
        points=points,
        weights=weights,
        theta=theta,
        theta_weights=wt,
        omega_z=oz,
        omega_z_weights=wz,
        half_indices=half,
        half_weights=half_weights,
    )
