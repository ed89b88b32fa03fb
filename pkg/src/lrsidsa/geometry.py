"""Uniform Cartesian grid for the X-Y geometry."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SpatialGrid:
    """Vertex grid with ``nx + 1`` by ``ny + 1`` points.

    Unknowns live on the ``(nx - 1) * (ny - 1)`` interior points, flattened
    with x fastest: ``k = (iy - 1) * (nx - 1) + (ix - 1)``.
    """

    x_range: tuple[float, float]
    y_range: tuple[float, float]
    nx: int
    ny: int

    @property
    def dx(self) -> float:
        return (self.x_range[1] - self.x_range[0]) / self.nx

    @property
    def dy(self) -> float:
        return (self.y_range[1] - self.y_range[0]) / self.ny

    @property
    def interior_shape(self) -> tuple[int, int]:
        """(rows, cols) = (ny - 1, nx - 1) of an interior grid function."""
        return (self.ny - 1, self.nx - 1)

    @property
    def interior_count(self) -> int:
        return (self.nx - 1) * (self.ny - 1)

    def x(self, i):
        """x-coordinate of (possibly fractional) index ``i``."""
        i = np.asarray(i, dtype=float)
        out = self.x_range[0] + i * self.dx
        return np.where(i == self.nx, self.x_range[1], out)

    def y(self, j):
        j = np.asarray(j, dtype=float)
        out = self.y_range[0] + j * self.dy
        return np.where(j == self.ny, self.y_range[1], out)

    @property
    def x_points(self) -> np.ndarray:
        return self.x(np.arange(self.nx + 1))

    @property
    def y_points(self) -> np.ndarray:
        return self.y(np.arange(self.ny + 1))

    def interior_mesh(self):
        """(X, Y) arrays of shape ``interior_shape``."""
        return np.meshgrid(self.x_points[1:-1], self.y_points[1:-1])

    def to_field(self, v) -> np.ndarray:
        """Reshape a flat interior vector to ``interior_shape``."""
        return np.asarray(v).reshape(self.interior_shape)

    def with_zero_boundary(self, v) -> np.ndarray:
        """Embed interior values in a ``(ny + 1, nx + 1)`` array with zero boundary."""
        out = np.zeros((self.ny + 1, self.nx + 1))
        out[1:-1, 1:-1] = self.to_field(v)
        return out

    def coarsen(self) -> "SpatialGrid":
        if self.nx % 2 or self.ny % 2:
            raise ValueError("only grids with even nx and ny can be coarsened")
        return SpatialGrid(self.x_range, self.y_range, self.nx // 2, self.ny // 2)


def build_grid(x_range, y_range, nx: int, ny: int) -> SpatialGrid:
    x0, x1 = (float(v) for v in x_range)
    y0, y1 = (float(v) for v in y_range)
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate domain {x_range} x {y_range}")
    if int(nx) != nx or int(ny) != ny or nx < 2 or ny < 2:
        raise ValueError(f"need integer nx, ny >= 2, got {nx}, {ny}")
    return SpatialGrid((x0, x1), (y0, y1), int(nx), int(ny))
