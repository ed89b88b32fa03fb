from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg


@dataclass(frozen=True)
class TruncationPolicy:
    """Relative Frobenius tolerance for recompression, plus optional rank cap."""

    eps: float = 1e-6
    max_rank: int | None = None

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"truncation tolerance must be positive, got {self.eps}")
        if self.max_rank is not None and self.max_rank < 0:
            raise ValueError("max_rank must be nonnegative")


def tail_rank(s, tol: float, max_rank: int | None = None) -> int:
    """Smallest k with ``sqrt(sum(s[k:]**2)) <= tol`` (s sorted descending).

    ``tol`` is absolute; callers scale it by the norm they want to be
    relative to.
    """
    s = np.asarray(s, float)
    if s.size == 0:
        return 0
    # tails[k] = ||s[k:]||, tails[len] = 0
    tails = np.sqrt(np.concatenate([np.cumsum((s * s)[::-1])[::-1], [0.0]]))
    k = int(np.argmax(tails <= tol))
    if max_rank is not None:
        k = min(k, max_rank)
    return k


# sums whose norm falls below this multiple of sum(|c_i| ||t_i||) are
# roundoff from cancellation and are returned as exact zeros
CANCELLATION_FLOOR = 64 * np.finfo(float).eps


def is_cancelled(norm: float, scale: float) -> bool:
    return norm <= CANCELLATION_FLOOR * scale


def robust_svd(a, full_matrices: bool = True, compute_uv: bool = True):
    """``numpy.linalg.svd`` with a fallback to LAPACK ``gesvd``.

    The divide-and-conquer driver used by numpy occasionally fails to
    converge on perfectly finite inputs; the QR-iteration driver is slower
    but does not share that failure mode.
    """
    try:
        return np.linalg.svd(a, full_matrices=full_matrices, compute_uv=compute_uv)
    except np.linalg.LinAlgError:
        return scipy.linalg.svd(a, full_matrices=full_matrices, compute_uv=compute_uv, lapack_driver="gesvd")
