"""Cross sections, sources and the built-in benchmark problems.

Problems are described by small JSON-compatible dictionaries::

    {
      "name": "pin_cell",
      "domain": {"x0": -1, "x1": 1, "y0": -1, "y1": 1},
      "sigma_s": {"default": 100.0,
                  "boxes": [{"x": [-0.5, 0.5], "y": [-0.5, 0.5],
                             "value": 1.0, "closed": false}]},
      "sigma_a": {"formula": "constant", "value": 0.0},
      "source": {"formula": "gaussian", "amplitude": 1.0, "rate": 100.0}
    }

A field is either piecewise constant (``default`` plus ``boxes``; later boxes
win, ``closed`` decides whether box edges belong to the box) or one of the
named formulas in ``FORMULAS``.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np

from .geometry import SpatialGrid

Field = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _constant(value=0.0):
    value = float(value)
    return lambda x, y: np.full(np.broadcast(x, y).shape, value)


def _gaussian(amplitude=1.0, rate=100.0, center=(0.0, 0.0)):
    cx, cy = center
    return lambda x, y: amplitude * np.exp(-rate * ((x - cx) ** 2 + (y - cy) ** 2))


def _radial_blend(inner=1.0, outer=100.0, center=(0.0, 0.0)):
    # (outer - inner) r^4 (r^2 - 2)^2 + inner inside the unit disc, outer beyond
    cx, cy = center

    def f(x, y):
        r2 = (x - cx) ** 2 + (y - cy) ** 2
        inside = (outer - inner) * r2 ** 2 * (r2 - 2.0) ** 2 + inner
        return np.where(r2 <= 1.0, inside, outer)

    return f


FORMULAS = {
    "constant": _constant,
    "gaussian": _gaussian,
    "radial_blend": _radial_blend,
}


def _boxes(default, boxes):
    default = float(default)
    parsed = []
    for b in boxes:
        (xa, xb), (ya, yb) = b["x"], b["y"]
        parsed.append((float(xa), float(xb), float(ya), float(yb), float(b["value"]), bool(b.get("closed", True))))

    def f(x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        out = np.full(x.shape, default)
        for xa, xb, ya, yb, value, closed in parsed:
            if closed:
                m = (x >= xa) & (x <= xb) & (y >= ya) & (y <= yb)
            else:
                m = (x > xa) & (x < xb) & (y > ya) & (y < yb)
            out[m] = value
        return out

    return f


def make_field(desc) -> Field:
    """Build a vectorized field ``f(x, y)`` from its config description."""
    if isinstance(desc, (int, float)):
        return _constant(desc)
    desc = dict(desc)
    if "formula" in desc:
        name = desc.pop("formula")
        if name not in FORMULAS:
            raise ValueError(f"unknown field formula {name!r}; known: {sorted(FORMULAS)}")
        return FORMULAS[name](**desc)
    if "default" in desc or "boxes" in desc:
        return _boxes(desc.get("default", 0.0), desc.get("boxes", []))
    raise ValueError(f"cannot interpret field description {desc!r}")


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    x_range: tuple[float, float]
    y_range: tuple[float, float]
    sigma_s: Field = field(repr=False)
    sigma_a: Field = field(repr=False)
    source: Field = field(repr=False)
    config: dict = field(default_factory=dict, repr=False, compare=False)

    def sigma_t(self, x, y):
        return self.sigma_s(x, y) + self.sigma_a(x, y)


def problem_from_config(cfg: dict) -> ProblemSpec:
    dom = cfg["domain"]
    x_range = (float(dom["x0"]), float(dom["x1"]))
    y_range = (float(dom["y0"]), float(dom["y1"]))
    if not (x_range[1] > x_range[0] and y_range[1] > y_range[0]):
        raise ValueError(f"degenerate domain {dom}")
    return ProblemSpec(
        name=str(cfg.get("name", "custom")),
        x_range=x_range,
        y_range=y_range,
        sigma_s=make_field(cfg.get("sigma_s", 0.0)),
        sigma_a=make_field(cfg.get("sigma_a", 0.0)),
        source=make_field(cfg.get("source", 0.0)),
        config=copy.deepcopy(cfg),
    )


def load_problem(path) -> ProblemSpec:
    """Read a problem definition from a JSON file."""
    with open(path) as fh:
        return problem_from_config(json.load(fh))


_UNIT_SQUARE = {"x0": -1.0, "x1": 1.0, "y0": -1.0, "y1": 1.0}
_GAUSSIAN = {"formula": "gaussian", "amplitude": 1.0, "rate": 100.0}
_NONE = {"formula": "constant", "value": 0.0}

BUILTIN_CONFIGS = {
    "diffusion": {
        "name": "diffusion",
        "domain": _UNIT_SQUARE,
        "sigma_s": {"formula": "constant", "value": 100.0},
        "sigma_a": _NONE,
        "source": _GAUSSIAN,
    },
    "transport": {
        "name": "transport",
        "domain": _UNIT_SQUARE,
        "sigma_s": {"formula": "constant", "value": 1.0},
        "sigma_a": _NONE,
        "source": _GAUSSIAN,
    },
    "variable_scattering": {
        "name": "variable_scattering",
        "domain": _UNIT_SQUARE,
        "sigma_s": {"formula": "radial_blend", "inner": 1.0, "outer": 100.0},
        "sigma_a": _NONE,
        "source": _GAUSSIAN,
    },
    "pin_cell": {
        "name": "pin_cell",
        "domain": _UNIT_SQUARE,
        # open box: interface nodes take the high-scattering value
        "sigma_s": {
            "default": 100.0,
            "boxes": [{"x": [-0.5, 0.5], "y": [-0.5, 0.5], "value": 1.0, "closed": False}],
        },
        "sigma_a": _NONE,
        "source": _GAUSSIAN,
    },
}


def _lattice_config() -> dict:
    text = resources.files("lrsidsa").joinpath("data/lattice.json").read_text()
    return json.loads(text)


def builtin_names() -> list[str]:
    return [*BUILTIN_CONFIGS, "lattice"]


def builtin_problem(name: str) -> ProblemSpec:
    """One of the five benchmark configurations."""
    if name == "lattice":
        return problem_from_config(_lattice_config())
    if name not in BUILTIN_CONFIGS:
        raise KeyError(f"unknown problem {name!r}; choose from {builtin_names()}")
    return problem_from_config(BUILTIN_CONFIGS[name])


def get_problem(name_or_path) -> ProblemSpec:
    """Built-in name or path to a JSON problem file."""
    if str(name_or_path) in builtin_names():
        return builtin_problem(str(name_or_path))
    path = Path(name_or_path)
    if path.is_file():
        return load_problem(path)
    raise KeyError(f"{name_or_path!r} is neither a built-in problem nor a file")


@dataclass(frozen=True)
class MaterialSamples:
    """Pointwise samples of the material fields on a grid.

    Node arrays have shape ``(ny + 1, nx + 1)``; ``sigma_t_half_x[j, i]`` is
    sigma_t at ``(x_{i+1/2}, y_j)`` (shape ``(ny + 1, nx)``) and
    ``sigma_t_half_y[j, i]`` at ``(x_i, y_{j+1/2})`` (shape ``(ny, nx + 1)``).
    """

    sigma_t_nodes: np.ndarray = field(repr=False)
    sigma_s_nodes: np.ndarray = field(repr=False)
    sigma_a_nodes: np.ndarray = field(repr=False)
    source_nodes: np.ndarray = field(repr=False)
    sigma_t_half_x: np.ndarray = field(repr=False)
    sigma_t_half_y: np.ndarray = field(repr=False)

    def interior(self, name: str) -> np.ndarray:
        """Flattened interior values of a node array, e.g. ``"sigma_s"``."""
        return getattr(self, f"{name}_nodes")[1:-1, 1:-1].ravel()

    def restrict(self) -> "MaterialSamples":
        """Injection onto the grid with half the spacing in each direction.

        Coarse half points coincide with odd fine nodes, so every coarse
        sample is an existing fine sample.
        """
        ny, nx = self.sigma_t_nodes.shape[0] - 1, self.sigma_t_nodes.shape[1] - 1
        if nx % 2 or ny % 2:
            raise ValueError("cannot restrict samples of a grid with odd nx or ny")
        tn = self.sigma_t_nodes
        return MaterialSamples(
            sigma_t_nodes=tn[::2, ::2],
            sigma_s_nodes=self.sigma_s_nodes[::2, ::2],
            sigma_a_nodes=self.sigma_a_nodes[::2, ::2],
            source_nodes=self.source_nodes[::2, ::2],
            sigma_t_half_x=tn[::2, 1::2],
            sigma_t_half_y=tn[1::2, ::2],
        )


def sample_materials(spec: ProblemSpec, grid: SpatialGrid) -> MaterialSamples:
    ix = np.arange(grid.nx + 1)
    iy = np.arange(grid.ny + 1)
    xn, yn = grid.x(ix), grid.y(iy)
    xh, yh = grid.x(ix[:-1] + 0.5), grid.y(iy[:-1] + 0.5)

    Xn, Yn = np.meshgrid(xn, yn)
    ss = np.asarray(spec.sigma_s(Xn, Yn), float)
    sa = np.asarray(spec.sigma_a(Xn, Yn), float)
    src = np.asarray(spec.source(Xn, Yn), float)
    if np.any(ss < 0) or np.any(sa < 0):
        raise ValueError(f"{spec.name}: negative cross section sample")
    st = ss + sa

    Xh, Yh = np.meshgrid(xh, yn)
    st_hx = np.asarray(spec.sigma_t(Xh, Yh), float)
    Xh, Yh = np.meshgrid(xn, yh)
    st_hy = np.asarray(spec.sigma_t(Xh, Yh), float)

    for arr in (st, st_hx, st_hy):
        if np.any(arr <= 0) or not np.all(np.isfinite(arr)):
            raise ValueError(
                f"{spec.name}: sigma_t must be strictly positive at every sample "
                "(second-order form undefined otherwise)"
            )
    return MaterialSamples(st, ss, sa, src, st_hx, st_hy)
