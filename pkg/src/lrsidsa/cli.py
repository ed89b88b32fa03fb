"""Command-line front end.

``lrsidsa run`` solves one benchmark and writes a report directory;
``lrsidsa sweep`` runs a refinement ladder and writes one aggregate
table.  Every flag can also come from a JSON config file (``--config``);
explicit flags win over the file.

Output schema (version 1), inside ``--out``:

``report.json``
    manifest, solver configuration, totals, final ranks and per-iteration
    history (plus errors against a full-rank reference with ``--reference``).
``history.csv``
    ``k, phi_diff, inner_iterations, eps_cg, ranks, dof,
    solution_compression, iteration_compression, dsa_correction``.
``singular_values.csv``
    ``node, index, value`` for every dimension-tree node of the solution.
``phi.csv``
    ``x, y, phi`` on all grid points (boundary values are zero).
``psi.lrf`` / ``psi.npy``
    optional even-parity dump (``--dump-psi``): low-rank factors in the
    binary factor format, or the dense array for the full-rank format.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .angular import build_cl_quadrature
from .fullrank import DenseMemoryError, compare, hierarchical_singular_values, solve_fullrank
from .geometry import build_grid
from .lowrank.io import save_factors
from .problems import get_problem
from .sidsa import FORMATS, SolverConfig, solve

log = logging.getLogger("lrsidsa")

SCHEMA_VERSION = 1

# (nx, ny, n_theta, n_omega_z) at refinement level L
LADDERS = {
    "diffusion": lambda L: (16 * L, 16 * L, 10 * L, 5 * L),
    "transport": lambda L: (16 * L, 16 * L, 8 * L, 4 * L),
    "variable_scattering": lambda L: (16 * L, 16 * L, 10 * L, 5 * L),
    "pin_cell": lambda L: (13 * L, 13 * L, 20, 10),
    "lattice": lambda L: (25 * L, 25 * L, 20, 10),
}

# flag name -> SolverConfig field
_CONFIG_FLAGS = {
    "inner_pc": "inner_pc",
    "eps_trunc": "eps_trunc",
    "eps_diff": "eps_diff",
    "eps_cg0": "eps_cg0",
    "gamma": "gamma",
    "max_si": "max_si",
    "max_cg": "max_cg",
    "max_rank": "max_rank",
    "dense_cap": "dense_cap",
    "dpc_reaction": "dpc_reaction",
}


class ManifestError(ValueError):
    pass


@dataclass
class RunManifest:
    problem: str
    resolution: tuple
    format: str = "matrix"
    overrides: dict = field(default_factory=dict)
    out: str = "lrsidsa-out"
    seed: int = 0
    reference: bool = False
    dump_psi: bool = False

    def __post_init__(self):
        res = tuple(int(v) for v in self.resolution)
        if len(res) != 4 or min(res) < 1:
            raise ManifestError(f"resolution must be four positive integers, got {self.resolution}")
        if res[2] % 2:
            raise ManifestError(f"n_theta must be even, got {res[2]}")
        if min(res[:2]) < 2:
            raise ManifestError("need at least two cells per direction")
        if self.format not in FORMATS:
            raise ManifestError(f"format must be one of {FORMATS}")
        self.resolution = res

    def solver_config(self) -> SolverConfig:
        cfg = dict(self.overrides)
        cfg["format"] = self.format
        if self.format == "fullrank":
            cfg.setdefault("inner_pc", "amg")
        elif cfg.get("inner_pc", "dpc") != "dpc":
            raise ManifestError("low-rank formats support only the dpc inner preconditioner")
        try:
            return SolverConfig(**cfg)
        except (TypeError, ValueError) as exc:
            raise ManifestError(str(exc)) from exc


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _ranks_str(ranks) -> str:
    return " ".join(str(r) for r in ranks) if isinstance(ranks, (list, tuple)) else str(ranks)


def execute(manifest: RunManifest) -> dict:
    """Run one manifest; write the artifacts and return the report dict."""
    np.random.seed(manifest.seed)
    config = manifest.solver_config()
    if manifest.reference and config.format == "fullrank":
        raise ManifestError("--reference compares a low-rank run against the full-rank solver")
    problem = get_problem(manifest.problem)
    nx, ny, nt, nz = manifest.resolution
    grid = build_grid(problem.x_range, problem.y_range, nx, ny)
    quad = build_cl_quadrature(nt, nz)
    dims = (grid.interior_count, quad.n_omega_z, quad.n_theta_half)

    if config.format == "fullrank":
        sol, report = solve_fullrank(problem, grid, quad, config)
        sv = hierarchical_singular_values(sol)
    else:
        report = solve(problem, grid, quad, config)
        sv = hierarchical_singular_values(report.psi, dims)

    out = report.summary()
    out.update(
        schema_version=SCHEMA_VERSION,
        manifest=_jsonable(asdict(manifest)),
        problem=problem.name,
        resolution=list(manifest.resolution),
        n_space=grid.interior_count,
        n_angle=quad.n_half,
        dof=int(report.psi.dof()),
        full_dof=grid.interior_count * quad.n_half,
    )

    if manifest.reference:
        ref_cfg = SolverConfig(format="fullrank", inner_pc="amg", inner_tol=1e-12, eps_diff=config.eps_diff,
                               max_si=config.max_si, dense_cap=config.dense_cap)
        ref, ref_report = solve_fullrank(problem, grid, quad, ref_cfg)
        e_psi, e_phi = compare(report.psi, report.phi, ref)
        out["reference"] = dict(error_psi=e_psi, error_phi=e_phi, n_si=ref_report.n_si,
                                wall_time=ref_report.wall_time)

    dest = Path(manifest.out)
    dest.mkdir(parents=True, exist_ok=True)
    with open(dest / "report.json", "w") as fh:
        json.dump(_jsonable(out), fh, indent=2)
    _write_csv(
        dest / "history.csv",
        ["k", "phi_diff", "inner_iterations", "eps_cg", "ranks", "dof",
         "solution_compression", "iteration_compression", "dsa_correction"],
        [[h.k, h.phi_diff, h.inner_iterations, h.eps_cg, _ranks_str(h.ranks), h.dof,
          h.solution_compression, h.iteration_compression, h.dsa_correction] for h in report.history],
    )
    _write_csv(
        dest / "singular_values.csv",
        ["node", "index", "value"],
        [[node, i, float(s)] for node, vals in sv.items() for i, s in enumerate(vals)],
    )
    field_ = grid.with_zero_boundary(report.phi)
    X, Y = np.meshgrid(grid.x_points, grid.y_points)
    _write_csv(dest / "phi.csv", ["x", "y", "phi"], zip(X.ravel(), Y.ravel(), field_.ravel()))
    if manifest.dump_psi:
        if config.format == "fullrank":
            np.save(dest / "psi.npy", report.psi.to_dense())
        else:
            save_factors(report.psi, dest / "psi.lrf")
    return out


def sweep(problem: str, levels, fmt: str = "matrix", out: str = "lrsidsa-sweep", overrides=None,
          reference: bool = False, angles=None) -> list[dict]:
    """Run the refinement ladder of ``problem`` and write ``sweep.csv``.

    ``angles = (n_theta, n_omega_z)`` pins the angular resolution.
    """
    if problem not in LADDERS:
        raise ManifestError(f"no refinement ladder for {problem!r}; known: {sorted(LADDERS)}")
    rows = []
    for L in levels:
        res = list(LADDERS[problem](L))
        if angles is not None:
            res[2:] = angles
        t0 = time.perf_counter()
        m = RunManifest(problem, tuple(res), fmt, dict(overrides or {}), str(Path(out) / f"L{L}"),
                        reference=reference)
        rep = execute(m)
        row = dict(
            level=L, nx=res[0], ny=res[1], n_theta=res[2], n_omega_z=res[3],
            ranks=_ranks_str(rep["ranks"]), dof=rep["dof"], full_dof=rep["full_dof"],
            solution_compression=rep["solution_compression"], n_si=rep["n_si"],
            mean_inner_cg=rep["mean_inner_cg"], wall_time=time.perf_counter() - t0,
        )
        if reference:
            row.update(error_psi=rep["reference"]["error_psi"], error_phi=rep["reference"]["error_phi"])
        rows.append(row)
    Path(out).mkdir(parents=True, exist_ok=True)
    header = list(rows[0]) if rows else ["level", "nx", "ny", "n_theta", "n_omega_z", "ranks", "dof", "full_dof"]
    _write_csv(Path(out) / "sweep.csv", header, [[r[k] for k in header] for r in rows])
    return rows


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON file with any of the flags below")
    p.add_argument("--format", choices=FORMATS)
    p.add_argument("--inner-pc", choices=("dpc", "amg", "direct"))
    p.add_argument("--eps-trunc", type=float)
    p.add_argument("--eps-diff", type=float)
    p.add_argument("--eps-cg0", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--max-si", type=int)
    p.add_argument("--max-cg", type=int)
    p.add_argument("--max-rank", type=int)
    p.add_argument("--dpc-reaction", choices=("sigma_a", "sigma_t"))
    p.add_argument("--dense-cap", type=int, metavar="BYTES")
    p.add_argument("--out", help="output directory")
    p.add_argument("--reference", action="store_true", default=None,
                   help="also solve with the full-rank solver and report the differences")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lrsidsa", description="Low-rank SI-DSA for the even-parity RTE.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="solve one benchmark")
    run.add_argument("problem", nargs="?", help="builtin name or problem JSON file")
    run.add_argument("dims", nargs="*", type=int, metavar="N", help="nx ny n_theta n_omega_z")
    run.add_argument("--problem", dest="problem_flag")
    run.add_argument("--nx", type=int)
    run.add_argument("--ny", type=int)
    run.add_argument("--ntheta", type=int)
    run.add_argument("--noz", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--dump-psi", action="store_true", default=None)
    _add_solver_flags(run)

    sw = sub.add_parser("sweep", help="run a refinement ladder")
    sw.add_argument("problem", choices=sorted(LADDERS))
    sw.add_argument("--levels", type=int, nargs="*", default=None)
    sw.add_argument("--ntheta", type=int, help="pin the angular resolution")
    sw.add_argument("--noz", type=int)
    _add_solver_flags(sw)
    return parser


def _merged(args: argparse.Namespace) -> dict:
    """Config-file values overlaid with the explicitly given flags."""
    merged = {}
    if args.config is not None:
        try:
            merged.update(json.loads(Path(args.config).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ManifestError(f"cannot read config {args.config}: {exc}") from exc
        merged = {k.replace("-", "_"): v for k, v in merged.items()}
    for k, v in vars(args).items():
        if v is not None and k not in ("config", "command", "verbose"):
            merged[k] = v
    if "problem_flag" in merged:
        merged["problem"] = merged.pop("problem_flag")
    return merged


def _overrides(opts: dict) -> dict:
    return {_CONFIG_FLAGS[k]: v for k, v in opts.items() if k in _CONFIG_FLAGS}


def manifest_from_options(opts: dict) -> RunManifest:
    if not opts.get("problem"):
        raise ManifestError("a problem name or file is required")
    dims = list(opts.get("dims") or [])
    if dims and len(dims) != 4:
        raise ManifestError("give all four of nx ny n_theta n_omega_z")
    if not dims:
        dims = [opts.get(k) for k in ("nx", "ny", "ntheta", "noz")]
        if None in dims:
            raise ManifestError("resolution missing: pass nx ny n_theta n_omega_z or --nx/--ny/--ntheta/--noz")
    return RunManifest(
        problem=opts["problem"],
        resolution=tuple(dims),
        format=opts.get("format", "matrix"),
        overrides=_overrides(opts),
        out=opts.get("out", "lrsidsa-out"),
        seed=int(opts.get("seed", 0)),
        reference=bool(opts.get("reference", False)),
        dump_psi=bool(opts.get("dump_psi", False)),
    )


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        opts = _merged(args)
        if args.command == "run":
            rep = execute(manifest_from_options(opts))
            line = (f"{rep['problem']} {rep['format']}: N_SI={rep['n_si']} ranks={rep['ranks']} "
                    f"compression={100 * rep['solution_compression']:.2f}% converged={rep['converged']}")
            if "reference" in rep:
                line += f" error_psi={rep['reference']['error_psi']:.3e} error_phi={rep['reference']['error_phi']:.3e}"
            print(line)
            return 0 if rep["converged"] else 1
        levels = opts.get("levels")
        if levels is None:
            levels = [2, 3]
        angles = None
        if opts.get("ntheta") is not None or opts.get("noz") is not None:
            if opts.get("ntheta") is None or opts.get("noz") is None:
                raise ManifestError("--ntheta and --noz go together")
            angles = (opts["ntheta"], opts["noz"])
        rows = sweep(opts["problem"], levels, opts.get("format", "matrix"), opts.get("out", "lrsidsa-sweep"),
                     _overrides(opts), bool(opts.get("reference", False)), angles)
        for r in rows:
            print(f"L={r['level']} ({r['nx']},{r['ny']},{r['n_theta']},{r['n_omega_z']}) "
                  f"ranks={r['ranks']} dof={r['dof']} full={r['full_dof']}")
        return 0
    except ManifestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DenseMemoryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
