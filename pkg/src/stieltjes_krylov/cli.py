"""Command-line experiment runner.

Examples
--------
::

    stieltjes-krylov table2 --out table2.csv
    stieltjes-krylov gamma-sweep --gammas 0.65 0.8 0.99 --methods two_pass mscg restarted
    stieltjes-krylov work-units --M 10 14 --json
    stieltjes-krylov run --methods mscg restarted --tol 1e-8
"""

from __future__ import annotations

import argparse
import logging
import math
import sys

from . import __version__
from .experiments import ExperimentConfig, Table, break_even, run_experiment
from .predict import METHODS

log = logging.getLogger("stieltjes_krylov")

COMMANDS = {
    "table2": "table2",
    "gamma-sweep": "gamma_sweep",
    "work-units": "work_units",
    "perturbed-rate": "perturbed_rate",
    "run": "single_run",
}


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, default=1000, help="matrix dimension (default 1000)")
    p.add_argument("--lmin", type=float, default=0.1, help="smallest eigenvalue")
    p.add_argument("--lmax", type=float, default=200.1, help="largest eigenvalue")
    p.add_argument("--tol", type=float, default=1e-6, help="relative target accuracy")
    p.add_argument("--function", default="inv_sqrt", help="inv_sqrt, log1p_over_z or inv_power_<alpha>")
    p.add_argument("--methods", nargs="+", choices=METHODS, default=list(METHODS))
    p.add_argument("--restart-length", type=int, default=30, help="restart length m_re")
    p.add_argument("--poles", type=int, default=None, help="fixed Zolotarev pole count")
    p.add_argument("--rhs", choices=("ones", "random"), default="ones")
    p.add_argument("--seed", type=int, default=0, help="seed for --rhs random")
    p.add_argument("--stopping", choices=("oracle", "practical"), default="oracle")
    p.add_argument("--out", default="-", help="output file ('-' for stdout)")
    p.add_argument("--json", action="store_true", help="write JSON instead of CSV")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stieltjes-krylov",
                                     description="Krylov methods for Stieltjes matrix functions.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "table2": "predicted and measured matvecs on the Chebyshev instance",
        "gamma-sweep": "matvecs on clustered spectra",
        "work-units": "work-unit estimates of multi-shift CG and restarted Lanczos",
        "perturbed-rate": "perturbed shift-and-invert rate and an inexact run",
        "run": "run the selected methods once",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        _common(p)
        if name == "gamma-sweep":
            p.add_argument("--gammas", nargs="+", type=float, default=None)
        if name == "work-units":
            p.add_argument("--M", nargs="+", type=float, default=[10.0, 14.0], dest="M_costs",
                           help="matvec cost in vector operations")
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    kw = dict(
        experiment=COMMANDS[args.command], n=args.n, lambda_min=args.lmin, lambda_max=args.lmax,
        function=args.function, tol=args.tol, methods=tuple(args.methods), m_re=args.restart_length,
        p=args.poles, rhs=args.rhs, seed=args.seed, stopping=args.stopping,
    )
    if getattr(args, "gammas", None):
        kw["gammas"] = tuple(args.gammas)
    if getattr(args, "M_costs", None):
        kw["M_costs"] = tuple(args.M_costs)
    return ExperimentConfig(**kw)


def succeeded(table: Table, config: ExperimentConfig) -> bool:
    """True if every requested method met the tolerance."""
    if table.name in ("table2", "gamma_sweep", "single_run"):
        return all(r.get("converged") for r in table.rows)
    if table.name == "perturbed_rate":
        err = float(table.meta.get("si_final_error", "nan"))
        return math.isfinite(err) and err <= config.tol
    return bool(table.rows)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        config = config_from_args(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    table = run_experiment(config)
    if table.name == "work_units":
        for M in config.M_costs:
            table.meta[f"break_even_M{M:g}"] = repr(break_even(table, M))
    text = table.to_json() if args.json else table.to_csv()
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        log.info("wrote %s", args.out)
    ok = succeeded(table, config)
    if not ok:
        log.warning("not all methods reached the tolerance")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
