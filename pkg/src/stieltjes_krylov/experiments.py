"""Experiment drivers producing CSV tables.

Each driver takes an :class:`ExperimentConfig` and returns a
:class:`Table`: metadata, a header and rows. Tables serialise to CSV with
``#``-prefixed metadata lines or to JSON. Nothing time- or
machine-dependent is written, so repeated runs give identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import __version__
from .lanczos import two_pass_fAb
from .mscg import mscg_fAb, min_poles_for_tolerance
from .operators import SpectralBounds, make_diagonal_chebyshev, make_diagonal_clustered
from .predict import METHODS, perturbed_rate, predict_total_matvecs, work_units
from .rational import extended_krylov_fAb, optimal_shift, si_lanczos_fAb
from .report import KrylovError
from .restarted import restarted_lanczos_fAb
from .stieltjes import by_name

EXPERIMENTS = ("table2", "gamma_sweep", "work_units", "perturbed_rate", "single_run")
TABLE2_POLES = 15
DEFAULT_GAMMAS = (0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95, 0.99)


@dataclass
class ExperimentConfig:
    """Settings shared by all experiment drivers.

    ``stopping`` selects how the methods decide to stop: ``"oracle"``
    compares against the exact diagonal solution (the setting used for
    measured counts), ``"practical"`` uses each method's own estimate.
    """

    experiment: str = "table2"
    n: int = 1000
    lambda_min: float = 0.1
    lambda_max: float = 200.1
    function: str = "inv_sqrt"
    tol: float = 1e-6
    methods: tuple[str, ...] = METHODS
    m_re: int = 30
    p: int | None = None
    gammas: tuple[float, ...] = DEFAULT_GAMMAS
    M_costs: tuple[float, ...] = (10.0, 14.0)
    accuracies: tuple[float, ...] = tuple(10.0 ** (-k / 4) for k in range(8, 49))
    eps_grid: tuple[float, ...] = tuple(10.0 ** (k / 2) for k in range(-28, -4))
    rhs: str = "ones"
    seed: int = 0
    stopping: str = "oracle"

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if self.m_re < 1:
            raise ValueError("m_re must be at least 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValueError(f"unknown methods {bad}")
        if self.rhs not in ("ones", "random"):
            raise ValueError("rhs must be 'ones' or 'random'")
        if self.stopping not in ("oracle", "practical"):
            raise ValueError("stopping must be 'oracle' or 'practical'")
        self.methods = tuple(self.methods)
        try:
            by_name(self.function)
        except KeyError as exc:
            raise ValueError(str(exc)) from None
        SpectralBounds(self.lambda_min, self.lambda_max)

    @property
    def bounds(self) -> SpectralBounds:
        return SpectralBounds(self.lambda_min, self.lambda_max)


@dataclass
class Table:
    """Experiment output: metadata, column names and rows."""

    name: str
    columns: list[str]
    rows: list[dict] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def column(self, name: str) -> list:
        return [r[name] for r in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        for k, v in self.meta.items():
            buf.write(f"# {k}: {v}\n")
        w = csv.DictWriter(buf, fieldnames=self.columns, lineterminator="\n", extrasaction="ignore")
        w.writeheader()
        for r in self.rows:
            w.writerow({k: _fmt(r.get(k)) for k in self.columns})
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"name": self.name, "meta": self.meta, "columns": self.columns,
                           "rows": self.rows}, indent=2, sort_keys=True, default=_json_default)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else "nan"
    return v


def _json_default(v):
    if isinstance(v, np.generic):
        return v.item()
    raise TypeError(type(v))


def _meta(config: ExperimentConfig) -> dict:
    d = asdict(config)
    d.pop("accuracies")
    d.pop("eps_grid")
    return {"artifact_version": __version__, **{k: d[k] for k in sorted(d)}}


def make_rhs(n: int, kind: str = "ones", seed: int = 0) -> np.ndarray:
    """Normalised right-hand side: all ones, or Gaussian with a fixed seed."""
    if kind == "ones":
        b = np.ones(n)
    else:
        b = np.random.default_rng(seed).standard_normal(n)
    return b / np.linalg.norm(b)


def run_method(method: str, op, f, b, tol: float, bounds: SpectralBounds, reference=None,
               m_re: int = 30, p: int | None = None, stopping: str = "oracle"):
    """Run one method and return ``(x, report)``.

    With ``stopping="oracle"`` every method stops as soon as its true error
    against ``reference`` is below ``tol``; otherwise each uses its own
    practical stopping rule.
    """
    oracle = stopping == "oracle" and reference is not None
    rule = {"stopping": "oracle", "reference": reference} if oracle else {"reference": reference}
    if method == "two_pass":
        return two_pass_fAb(op, f, b, tol, bounds=None if oracle else bounds, **rule)
    if method == "restarted":
        return restarted_lanczos_fAb(op, f, b, m_re, tol, bounds=None if oracle else bounds, **rule)
    if method == "mscg":
        return mscg_fAb(op, f, b, tol, bounds, p=p, **rule)
    if method == "si":
        return si_lanczos_fAb(op, f, b, tol, bounds, **rule)
    if method == "eksm":
        return extended_krylov_fAb(op, f, b, tol, bounds=bounds, **rule)
    raise ValueError(f"unknown method {method!r}")


def measured_work_units(method: str, report, M_cost: float) -> float:
    """Work units of a finished run (``nan`` for methods without a model)."""
    if method == "mscg":
        return work_units("mscg", {"active": report.extra["active"], "p": report.extra["p"]}, M_cost)
    if method == "restarted":
        return work_units("restarted", {"iterations": report.iterations,
                                        "m_re": report.extra["restart_length"],
                                        "cycles": report.extra["cycles"]}, M_cost)
    return float("nan")


def predicted_work_units(method: str, pred, M_cost: float) -> float:
    if method == "mscg":
        return work_units("mscg", {"active": pred.extra["active"], "p": pred.extra["p"]}, M_cost)
    if method == "restarted":
        return work_units("restarted", {"iterations": pred.total_matvecs,
                                        "m_re": pred.extra["m_re"], "cycles": pred.cycles}, M_cost)
    return float("nan")


def _problem(config: ExperimentConfig, op):
    f = by_name(config.function)
    b = make_rhs(op.n, config.rhs, config.seed)
    ref = op.exact_function_apply(f, b)
    return f, b, ref


def _measure_row(config, method, op, f, b, ref, bounds) -> dict:
    row = {"method": method}
    op.reset_count()
    try:
        x, rep = run_method(method, op, f, b, config.tol, bounds, ref, config.m_re, config.p,
                            config.stopping)
        err = float(np.linalg.norm(x - ref) / np.linalg.norm(ref))
        row.update(measured_matvecs=rep.matvecs, relative_error=err,
                   converged=bool(rep.converged and err <= config.tol),
                   work_units=measured_work_units(method, rep, config.M_costs[0]), status="ok")
    except (KrylovError, ArithmeticError, ValueError) as exc:
        row.update(measured_matvecs=op.matvec_count, relative_error=float("nan"), converged=False,
                   work_units=float("nan"), status=f"{type(exc).__name__}: {exc}")
    return row


def _params(config: ExperimentConfig) -> dict:
    params = {"m_re": config.m_re}
    if config.p is not None:
        params["p"] = config.p
    return params


def run_table2(config: ExperimentConfig) -> Table:
    """Predicted and measured matvecs for each method on the Chebyshev instance.

    Multi-shift CG uses ``TABLE2_POLES`` poles unless ``config.p`` is set.
    """
    if config.p is None:
        config = replace(config, p=TABLE2_POLES)
    bounds = config.bounds
    op = make_diagonal_chebyshev(config.n, bounds)
    f, b, ref = _problem(config, op)
    nf = float(np.linalg.norm(ref))
    cols = ["method", "predicted_matvecs", "measured_matvecs", "relative_error", "work_units",
            "converged", "status"]
    table = Table("table2", cols, meta=_meta(config) | {"norm_fAb": repr(nf)})
    for m in config.methods:
        row = _measure_row(config, m, op, f, b, ref, bounds)
        try:
            row["predicted_matvecs"] = predict_total_matvecs(m, bounds, f, nf, config.tol,
                                                             _params(config)).total_matvecs
        except KrylovError as exc:
            row["predicted_matvecs"] = None
            row["status"] += f"; prediction failed: {exc}"
        table.rows.append(row)
    return table


def run_gamma_sweep(config: ExperimentConfig) -> Table:
    """Measured matvecs on clustered spectra for each ``gamma``, with predictions."""
    bounds = config.bounds
    cols = ["gamma", "method", "measured_matvecs", "ratio_to_mscg", "predicted_matvecs",
            "relative_error", "work_units", "converged", "status"]
    table = Table("gamma_sweep", cols, meta=_meta(config))
    methods = list(config.methods)
    for g in config.gammas:
        if not (0 < g < 1):
            raise ValueError("gamma must lie in (0, 1)")
        op = make_diagonal_clustered(config.n, bounds, g)
        f, b, ref = _problem(config, op)
        nf = float(np.linalg.norm(ref))
        rows = []
        for m in methods:
            row = {"gamma": g, **_measure_row(config, m, op, f, b, ref, bounds)}
            row["predicted_matvecs"] = predict_total_matvecs(m, bounds, f, nf, config.tol,
                                                             _params(config)).total_matvecs
            rows.append(row)
        base = next((r["measured_matvecs"] for r in rows if r["method"] == "mscg"), None)
        for r in rows:
            r["ratio_to_mscg"] = r["measured_matvecs"] / base if base else float("nan")
        table.rows.extend(rows)
    return table


def run_work_units(config: ExperimentConfig) -> Table:
    """Predicted work of multi-shift CG and restarted Lanczos over an accuracy grid.

    The restart length is ``2p`` with ``p`` the Zolotarev pole count
    needed at each accuracy; the rational error gets half the budget.
    """
    bounds = config.bounds
    f = by_name(config.function)
    op = make_diagonal_chebyshev(config.n, bounds)
    b = make_rhs(op.n, config.rhs, config.seed)
    nf = float(np.linalg.norm(op.exact_function_apply(f, b)))
    nb = float(np.linalg.norm(b))
    cols = ["accuracy", "p", "m_re", "mscg_matvecs", "restarted_matvecs"]
    for M in config.M_costs:
        cols += [f"mscg_work_M{M:g}", f"restarted_work_M{M:g}"]
    table = Table("work_units", cols, meta=_meta(config) | {"norm_fAb": repr(nf)})
    for acc in config.accuracies:
        try:
            p = min_poles_for_tolerance(bounds, config.function, acc * nf / (2.0 * nb))
        except KrylovError:
            continue
        pm = predict_total_matvecs("mscg", bounds, f, nf, acc, {"p": p, "norm_b": nb})
        pr = predict_total_matvecs("restarted", bounds, f, nf, acc, {"m_re": 2 * p})
        row = {"accuracy": acc, "p": p, "m_re": 2 * p, "mscg_matvecs": pm.total_matvecs,
               "restarted_matvecs": pr.total_matvecs}
        for M in config.M_costs:
            row[f"mscg_work_M{M:g}"] = predicted_work_units("mscg", pm, M)
            row[f"restarted_work_M{M:g}"] = predicted_work_units("restarted", pr, M)
        table.rows.append(row)
    return table


def break_even(table: Table, M_cost: float) -> float | None:
    """Loosest accuracy from which restarted Lanczos stays cheaper than multi-shift CG.

    Rows are scanned from the tightest accuracy outwards; ``None`` if the
    restarted method is not cheaper at the tightest accuracy.
    """
    rows = sorted(table.rows, key=lambda r: r["accuracy"])
    found = None
    for r in rows:
        if r[f"restarted_work_M{M_cost:g}"] < r[f"mscg_work_M{M_cost:g}"]:
            found = r["accuracy"]
        else:
            break
    return found


def run_perturbed_rate(config: ExperimentConfig) -> Table:
    """Perturbed convergence rate over an ``eps`` grid plus an inexact SI trace.

    Rows with ``kind == "rate"`` tabulate the rate; rows with
    ``kind == "si_iteration"`` log the error and tracked ``||E_m||`` bound
    of an inexact shift-and-invert run per outer iteration.
    """
    bounds = config.bounds
    xi = optimal_shift(bounds)
    thr = 1.0 / (bounds.lambda_max - xi)
    cols = ["kind", "index", "eps", "rate", "saturated", "relative_error", "em_bound"]
    table = Table("perturbed_rate", cols, meta=_meta(config) | {"threshold": repr(thr)})
    for e in sorted(set(config.eps_grid) | {thr}):
        rate, sat = perturbed_rate(e, bounds, return_flag=True)
        table.rows.append({"kind": "rate", "eps": e, "rate": rate, "saturated": sat})

    op = make_diagonal_chebyshev(config.n, bounds)
    f, b, ref = _problem(config, op)
    x, rep = si_lanczos_fAb(op, f, b, config.tol, bounds, stopping="oracle", reference=ref,
                            record_history=True)
    for j, (err, em) in enumerate(zip(rep.extra["errors"], rep.extra["em_bounds"]), start=1):
        table.rows.append({"kind": "si_iteration", "index": j, "relative_error": err,
                           "em_bound": em, "saturated": em >= thr})
    table.meta["si_final_error"] = repr(float(np.linalg.norm(x - ref) / np.linalg.norm(ref)))
    return table


def run_single(config: ExperimentConfig) -> Table:
    """Measured results for the requested methods on the Chebyshev instance."""
    bounds = config.bounds
    op = make_diagonal_chebyshev(config.n, bounds)
    f, b, ref = _problem(config, op)
    cols = ["method", "measured_matvecs", "relative_error", "work_units", "converged", "status"]
    table = Table("single_run", cols, meta=_meta(config))
    for m in config.methods:
        table.rows.append(_measure_row(config, m, op, f, b, ref, bounds))
    return table


RUNNERS = {
    "table2": run_table2,
    "gamma_sweep": run_gamma_sweep,
    "work_units": run_work_units,
    "perturbed_rate": run_perturbed_rate,
    "single_run": run_single,
}


def run_experiment(config: ExperimentConfig) -> Table:
    return RUNNERS[config.experiment](config)
