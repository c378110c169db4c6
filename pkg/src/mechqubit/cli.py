"""Command-line driver: ``mechqubit <verb> [options]``.

Exit status: 0 success, 2 invalid configuration, 3 no post-selection angle,
4 numerical failure (Fock tail overflow, vanishing post-selection
probability, integrator failure).
"""

import argparse
import json
import os
import sys
import warnings
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .config import ENV_NAMES, PRESETS, build_config
from .errors import ConfigError, CutoffError, DegeneratePostSelection, IntegrationError, \
    NoSolutionError
from .experiments import run
from .io import REPORT_FORMAT, Table, format_report, format_table, read_config_file

EXIT_OK, EXIT_CONFIG, EXIT_NO_SOLUTION, EXIT_NUMERIC = 0, 2, 3, 4
TABLE_FORMAT = "mechqubit-table/1"

# flag -> config key; every flag defaults to "unset" so layering can tell
FLAGS = [
    ("--lambda", "lambda", "spin-oscillator coupling"),
    ("--t", "t", "evolution time in units of the inverse mechanical frequency"),
    ("--gamma", "gamma", "mechanical damping rate"),
    ("--Gamma", "Gamma", "spin relaxation rate"),
    ("--gamma-phi", "gamma_phi", "spin dephasing rate"),
    ("--nbar-m", "nbar_m", "mechanical bath occupancy"),
    ("--nbar-q", "nbar_q", "spin bath occupancy"),
    ("--theta", "theta", "post-selection polar angle, or 'solve'"),
    ("--phi", "phi", "post-selection azimuth"),
    ("--branch", "branch", "root used when theta is solved: plus or minus"),
    ("--n-max", "n_max", "Fock cutoff, or 'auto'"),
    ("--dt", "dt", "RK4 step"),
    ("--method", "method", "rk4 or adaptive"),
    ("--model", "model", "auto, analytic or lindblad"),
    ("--rel-tol-theta", "rel_tol_theta", "relative jitter on theta"),
    ("--rel-tol-phi", "rel_tol_phi", "relative jitter on phi"),
    ("--distribution", "distribution", "jitter distribution: uniform or gaussian"),
    ("--n-samples", "n_samples", "Monte-Carlo sample count"),
    ("--theta-min", "theta_min", "start of the theta scan"),
    ("--theta-max", "theta_max", "end of the theta scan"),
    ("--n-theta", "n_theta", "points in the theta scan"),
    ("--resolution", "resolution", "Wigner grid points per axis"),
    ("--extent", "extent", "Wigner grid half-width"),
    ("--seed", "seed", "random seed"),
    ("--out", "out", "output directory (default: standard output)"),
    ("--format", "format", "csv or report"),
    ("--threads", "threads", "worker threads (default: CPU count)"),
]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    for flag, key, text in FLAGS:
        common.add_argument(flag, dest=key, metavar=key.upper(), help=text)
    common.add_argument("--axis", dest="axes", action="append", metavar="SPEC",
                        help="swept parameter: name=start:stop:num[:log] or name=v1,v2")
    common.add_argument("--wigner", dest="wigner", action="store_const", const="true",
                        help="also compute the Wigner function")
    common.add_argument("--config", dest="config_file", metavar="FILE",
                        help="flat 'key = value' file; flags override it")

    parser = argparse.ArgumentParser(
        prog="mechqubit",
        description="Post-selected spin-oscillator state preparation.",
        epilog="Environment variables " + ", ".join(sorted(ENV_NAMES.values())[:3])
        + ", ... override the config file; flags override both.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="experiment", required=True)
    sub.add_parser("solve-angle", parents=[common],
                   help="equal-superposition post-selection angles")
    fig = sub.add_parser("figure", parents=[common], help="figure data presets")
    fig.add_argument("preset", choices=PRESETS)
    sub.add_parser("sweep", parents=[common], help="grid over one or two parameters")
    sub.add_parser("monte-carlo", parents=[common], help="angle-jitter statistics")
    sub.add_parser("aav-compare", parents=[common], help="weak-value versus exact <x>")
    sub.add_parser("evolve", parents=[common], help="single parameter point")
    return parser


def config_from_args(args: argparse.Namespace, environ=None):
    values = dict(vars(args))
    experiment = values.pop("experiment")
    preset = values.pop("preset", None)
    config_file = values.pop("config_file", None)
    if "axes" in values:
        values["axes"] = list(values["axes"])
    file_values = read_config_file(config_file) if config_file else {}
    return build_config(experiment, preset, file_values, environ, values)


def _plain(value):
    """JSON-ready copy of ``value`` (numpy scalars and tuples converted)."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


def _flatten(d: dict, prefix=""):
    for k, v in d.items():
        if isinstance(v, dict):
            yield from _flatten(v, f"{prefix}{k}.")
        else:
            yield f"{prefix}{k}", v


def _grid_table(grid) -> Table:
    rows = [(float(x), float(p), float(grid.values[i, j]))
            for i, p in enumerate(grid.ps) for j, x in enumerate(grid.xs)]
    return Table(["x", "p", "value"], rows)


def render(cfg, output, created: str) -> dict:
    """File name -> contents for one run. Only ``created`` varies between reruns."""
    config_echo = json.dumps(_plain(cfg.to_dict()), sort_keys=True)
    meta = {"format": TABLE_FORMAT, "config": config_echo, "version": __version__,
            "seed": str(cfg.seed), "created": created}
    files = {}
    for name, grid in output.grids.items():
        t = _grid_table(grid)
        t.meta = dict(meta, table=name)
        files[f"{name}.csv"] = format_table(t)
    scalars = _plain(output.scalars)
    if cfg.format == "report":
        report = {
            "format": REPORT_FORMAT,
            "config": _plain(cfg.to_dict()),
            "results": {
                "scalars": scalars,
                "tables": {name: {"columns": list(cols), "rows": _plain(rows)}
                           for name, (cols, rows) in output.tables.items()},
                "wigner": {name: f"{name}.csv" for name in output.grids},
            },
            "provenance": {"version": __version__, "seed": cfg.seed, "created": created},
        }
        files["report.json"] = format_report(report)
        return files
    for name, (cols, rows) in output.tables.items():
        files[f"{name}.csv"] = format_table(Table(list(cols), list(rows), dict(meta, table=name)))
    if scalars:
        name = f"{cfg.scope.replace('-', '_')}_summary"
        files[f"{name}.csv"] = format_table(
            Table(["key", "value"], list(_flatten(scalars)), dict(meta, table=name)))
    return files


def emit(cfg, files: dict, stdout=None, stderr=None) -> None:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    if cfg.out:
        os.makedirs(cfg.out, exist_ok=True)
        for name, text in files.items():
            path = os.path.join(cfg.out, name)
            with open(path, "w", newline="") as fh:
                fh.write(text)
            print(f"wrote {path}", file=stderr)
        return
    for name, text in files.items():
        if name.endswith("_wigner.csv"):
            print(f"skipping {name}: Wigner grids are written only with --out", file=stderr)
            continue
        stdout.write(text)
        if cfg.format == "csv":
            stdout.write("\n")


def main(argv=None, environ=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args, environ)
        created = datetime.now(timezone.utc).isoformat(timespec="seconds")
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            warnings.showwarning = _show_warning
            output = run(cfg)
        emit(cfg, render(cfg, output, created))
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NoSolutionError as exc:
        print(f"no solution: {exc}", file=sys.stderr)
        return EXIT_NO_SOLUTION
    except (CutoffError, DegeneratePostSelection, IntegrationError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"warning: {message}", file=sys.stderr)


def main_entry() -> None:
    sys.exit(main())
