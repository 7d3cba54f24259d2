"""Scenario runner: seeded experiments writing report.json, metrics.csv and SVG plots."""

from __future__ import annotations

import csv
import io
import json
import math
import platform
import re
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .constructions import (
    APConfig,
    arithmetic_progression_set,
    commutator_coverage,
    lift_to_group,
    verify_nongrowth,
)
from .delta_sets import (
    AdjointAction,
    GenerationBudget,
    ScalarAction,
    ball_coverage,
    covering_number,
    generate_bracket,
    k_fold,
    snap,
)
from .errors import BudgetExceeded, ResourceLimitError, UsageError
from .groups import Abelian, get_backend
from .linearize import LinearMap, linearize, linearize_constrained, sample_function
from .word_synth import approximation_error, certify, synthesize

SCHEMA_VERSION = 1
EMIT_KINDS = ("json", "csv", "svg")
PARAM_ALIASES = {"l": "order", "ell": "order"}


def parse_number(text) -> float:
    """Accepts plain numbers, fractions like ``1/4`` and powers like ``2^-10``."""
    if isinstance(text, (int, float)):
        return float(text)
    t = str(text).strip().replace("**", "^")
    m = re.fullmatch(r"([-+]?\d+(?:\.\d*)?)\^([-+]?\d+(?:\.\d*)?)", t)
    if m:
        return float(m.group(1)) ** float(m.group(2))
    try:
        return float(Fraction(t))
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"not a number: {text!r}") from exc


def _parse_list(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [parse_number(x) for x in text]
    return [parse_number(x) for x in str(text).split(",") if x.strip()]


def _coerce(value, default):
    if isinstance(default, bool):
        if isinstance(value, bool):
            return value
        if str(value).lower() in ("1", "true", "yes"):
            return True
        if str(value).lower() in ("0", "false", "no"):
            return False
        raise UsageError(f"not a boolean: {value!r}")
    if isinstance(default, int):
        x = parse_number(value)
        if x != int(x):
            raise UsageError(f"expected an integer, got {value!r}")
        return int(x)
    if isinstance(default, float):
        return parse_number(value)
    if isinstance(default, list):
        return _parse_list(value)
    return str(value)


# ---------------------------------------------------------------------------
# config and report
# ---------------------------------------------------------------------------

@dataclass
class ScenarioConfig:
    scenario: str
    params: dict = field(default_factory=dict)
    out: Path = Path("out")
    emit: tuple[str, ...] = EMIT_KINDS

    def resolved(self) -> dict:
        if self.scenario not in SCENARIOS:
            raise UsageError(f"unknown scenario {self.scenario!r}; choose from {', '.join(SCENARIOS)}")
        spec = SCENARIOS[self.scenario]
        params = {PARAM_ALIASES.get(k, k): v for k, v in self.params.items()}
        unknown = set(params) - set(spec.defaults)
        if unknown:
            raise UsageError(f"{self.scenario}: unknown parameters {sorted(unknown)}")
        out = {}
        for key, default in spec.defaults.items():
            out[key] = _coerce(params[key], default) if key in params else default
        if spec.randomized and "seed" not in out:
            raise UsageError(f"{self.scenario} needs a seed")
        for kind in self.emit:
            if kind not in EMIT_KINDS:
                raise UsageError(f"unknown emit kind {kind!r}")
        return out


@dataclass
class Metric:
    name: str
    value: object
    unit: str
    context: str


@dataclass
class RunReport:
    scenario: str
    config: dict
    metrics: list[Metric]
    truncated: bool = False
    complete: bool = True
    wall_clock: float = 0.0
    artifacts: list[str] = field(default_factory=list)
    error: str | None = None
    plots: list = field(default_factory=list, repr=False)

    def metric(self, name: str):
        for m in self.metrics:
            if m.name == name:
                return m.value
        raise KeyError(name)

    def metrics_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["metric", "value", "unit", "context"])
        for m in self.metrics:
            w.writerow([m.name, _fmt(m.value), m.unit, m.context])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "scenario": self.scenario,
            "config": self.config,
            "metrics": [{"name": m.name, "value": _jsonable(m.value), "unit": m.unit, "context": m.context}
                        for m in self.metrics],
            "truncated": self.truncated,
            "complete": self.complete,
            "wall_clock_seconds": self.wall_clock,
            "artifacts": self.artifacts,
            "error": self.error,
            "versions": {"lie_expand": __version__, "python": platform.python_version(), "numpy": np.__version__},
        }

    @classmethod
    def from_json(cls, data: dict) -> RunReport:
        metrics = [Metric(m["name"], m["value"], m["unit"], m["context"]) for m in data["metrics"]]
        return cls(data["scenario"], data["config"], metrics, data.get("truncated", False),
                   data.get("complete", True), data.get("wall_clock_seconds", 0.0), data.get("artifacts", []),
                   data.get("error"))


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _jsonable(v):
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


@dataclass(frozen=True)
class Plot:
    """Data for one SVG: series of (label, x, y) with axis scales."""

    name: str
    title: str
    xlabel: str
    ylabel: str
    series: tuple
    kind: str = "loglog"  # "loglog" | "bar"


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScenarioSpec:
    defaults: dict
    runner: Callable
    randomized: bool


def _slope(x, y) -> float:
    x, y = np.asarray(x, float), np.asarray(y, float)
    ok = (x > 0) & (y > 0)
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


def _bch_order(p: dict, out: Path):
    backend = get_backend(p["backend"])
    approx = synthesize(p["s"], p["order"])
    cert = certify(approx)
    rng = np.random.default_rng(p["seed"])
    dirs = rng.standard_normal((p["s"], backend.dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    hs = np.logspace(math.log10(p["h_min"]), math.log10(p["h_max"]), p["samples"])
    errs = [approximation_error(approx, list(h * dirs), backend) for h in hs]
    slope = _slope(hs, errs)
    metrics = [
        Metric("C", approx.C, "1", "scale of the target exp(C(x1+...+xs))"),
        Metric("word_length", len(approx.word), "letters", "free-reduced word"),
        Metric("defect_valuation", cert.valuation if math.isfinite(cert.valuation) else "inf", "degree",
               f"certified when >= {p['order']}"),
        Metric("certified", cert.certified, "bool", "exact symbolic certificate"),
        Metric("fitted_slope", slope, "log-log", f"expected >= {p['order'] - 0.3} on {backend.name}"),
    ]
    plots = [Plot("error_vs_h", f"word error, s={p['s']}, l={p['order']}", "h", "error", (("error", tuple(hs), tuple(errs)),))]
    return metrics, plots, False


def _synth_word(p: dict, out: Path):
    approx = synthesize(p["s"], p["order"], max_length=p["max_length"])
    cert = certify(approx)
    (out / "word.txt").write_text(str(approx.word) + "\n")
    metrics = [
        Metric("C", approx.C, "1", "scale"),
        Metric("word_length", len(approx.word), "letters", f"cap {p['max_length']}"),
        Metric("defect_valuation", cert.valuation if math.isfinite(cert.valuation) else "inf", "degree",
               f"certified when >= {p['order']}"),
        Metric("certified", cert.certified, "bool", "exact symbolic certificate"),
    ]
    return metrics, [], False


def _nongrowth(p: dict, out: Path):
    cfg = APConfig(p["d"], p["kappa"], p["delta"], p["r"])
    P = arithmetic_progression_set(cfg)
    backend = get_backend(p["backend"] or f"abelian:{p['d']}")
    A = P if isinstance(backend, Abelian) else lift_to_group(P, backend, p["r"])
    rep = verify_nongrowth(A, r_max=p["r"], point_cap=p["point_cap"])
    metrics = [
        Metric("N_A", rep.n_a, "cells", "covering number at delta"),
        Metric("N_AAA", rep.n_aaa, "cells", "covering number at delta"),
        Metric("ratio", rep.ratio, "1", f"expected <= {3 ** p['d'] * 8}"),
        Metric("min_quotient_kappa_hat", rep.min_kappa_hat, "exponent", f"expected >= {p['kappa'] - 0.1}"),
        Metric("away_threshold", rep.away_threshold, "chart distance", "min over catalog of max_a d(a, H)"),
    ]
    for q in rep.quotient_profiles:
        metrics.append(Metric(f"kappa_hat[{q.subgroup}]", q.kappa_hat, "exponent", f"quotient {q.target}"))
    series = tuple((q.subgroup, q.ladder, q.counts) for q in rep.quotient_profiles)
    plots = [
        Plot("quotient_profiles", "covering profiles of the quotients", "rho", "N", series),
        Plot("ratio", "N(AAA)/N(A)", "set", "ratio", (("ratio", ("AAA/A",), (rep.ratio,)),), kind="bar"),
    ]
    return metrics, plots, rep.truncated


def _growth_su2(p: dict, out: Path):
    backend = get_backend("su2")
    rng = np.random.default_rng(p["seed"])
    A = snap(backend.random_algebra(rng, p["n_points"], p["radius"]), p["delta"], backend)
    aaa = k_fold(A, 3, point_cap=p["point_cap"])
    n_a, n_aaa = covering_number(A, A.delta), covering_number(aaa, A.delta)
    metrics = [
        Metric("N_A", n_a, "cells", "covering number at delta"),
        Metric("N_AAA", n_aaa, "cells", "covering number at delta"),
        Metric("ratio", n_aaa / n_a, "1", "diagnostic; no threshold"),
    ]
    plots = [Plot("ratio", "N(AAA)/N(A) in SU(2)", "set", "ratio", (("ratio", ("AAA/A",), (n_aaa / n_a,)),), kind="bar")]
    return metrics, plots, aaa.truncated


def parse_action(text: str):
    kind, _, arg = text.partition(":")
    if kind == "scalar":
        return ScalarAction(int(arg or 1))
    if kind == "adjoint":
        return AdjointAction(arg or "su2")
    raise UsageError(f"unknown action {text!r}; use scalar:<n> or adjoint:<backend>")


def _sum_product(p: dict, out: Path):
    action = parse_action(p["action"])
    rng = np.random.default_rng(p["seed"])
    G, V = action.group, action.space
    A = snap(rng.uniform(-p["a_radius"], p["a_radius"], (p["n_a"], G.dim)), p["delta"], G)
    X = snap(rng.uniform(-p["x_radius"], p["x_radius"], (p["n_x"], V.dim)), p["delta"], V)
    budget = GenerationBudget(p["s"], p["region_cap"], p["point_cap"])
    Y = generate_bracket(A, X, p["s"], action, budget)
    cov = ball_coverage(Y, p["ball_radius"], p["delta"])
    metrics = [
        Metric("size", len(Y), "points", f"<A,X>_s with s={p['s']}"),
        Metric("truncated", Y.truncated, "bool", "budget caps hit"),
        Metric("ball_coverage", cov, "fraction", f"grid points of B(0,{p['ball_radius']}) within delta"),
    ]
    return metrics, [], Y.truncated


def _commutator_coverage(p: dict, out: Path):
    backend = get_backend("heis3")
    metrics, series_x, series_y = [], [], []
    for rho in p["rho"]:
        res = commutator_coverage(backend, rho, p["k"])
        metrics.append(Metric(f"fraction[rho={rho!r}]", res.fraction, "fraction", "best scanned c"))
        metrics.append(Metric(f"c[rho={rho!r}]", res.c if res.c is not None else "none", "1",
                              "largest c with full coverage"))
        series_x.append(rho)
        series_y.append(res.fraction)
    plots = [Plot("coverage", "commutator coverage", "rho", "fraction", (("fraction", tuple(series_x), tuple(series_y)),), kind="bar")]
    return metrics, plots, False


def _linearize_demo(p: dict, out: Path):
    rng = np.random.default_rng(p["seed"])
    dim, m = p["dim"], p["dim_out"]
    phi0 = rng.uniform(-0.3, 0.3, (m, dim))
    noise = p["noise"] * p["rho1"]

    def sigma_fn(x):
        eps = rng.uniform(-1, 1, (len(x), m))
        eps *= noise / np.sqrt(m)
        return x @ phi0.T + eps

    sigma = sample_function(sigma_fn, dim, p["delta"], p["rho1"], p["rho2"])
    res = linearize(sigma, rng=np.random.default_rng(p["seed"] + 1))
    bound = 10 * (math.log2(1 / p["delta"]) + 1) * p["rho1"]
    metrics = [
        Metric("sup_error", res.sup_error, "norm", f"expected <= {bound!r}"),
        Metric("K", res.K, "1", "sup_error / ((log2(1/delta)+1) rho1)"),
        Metric("phi_error", float(np.abs(res.phi.as_array() - phi0).max()), "entry", "distance to the planted map"),
    ]
    # constrained: V = V' + R^m, pi the projection, sigma a section
    half = LinearMap.from_array(np.eye(dim) / 2)

    def section(x):
        return np.concatenate([x / 2, sigma_fn(x)], axis=1)

    sigma2 = sample_function(section, dim, p["delta"], p["rho1"], p["rho2"])
    pi = LinearMap.from_array(np.eye(dim, dim + m))
    res2 = linearize_constrained(sigma2, pi, half, rng=np.random.default_rng(p["seed"] + 2))
    metrics.append(Metric("constrained_sup_error", res2.sup_error, "norm", f"expected <= {bound!r}"))
    metrics.append(Metric("constraint_residual", str(res2.constraint_residual), "exact", "pi o phi - psi"))
    (out / "phi.json").write_text(json.dumps(res.to_json(), indent=2, sort_keys=True) + "\n")
    return metrics, [], False


SCENARIOS: dict[str, ScenarioSpec] = {
    "bch-order": ScenarioSpec(
        {"backend": "su2", "s": 2, "order": 3, "seed": 0, "samples": 20, "h_min": 1e-3, "h_max": 10**-1.5},
        _bch_order, True),
    "synth-word": ScenarioSpec({"s": 2, "order": 3, "max_length": 10**6}, _synth_word, False),
    "nongrowth-ap": ScenarioSpec(
        {"backend": "", "d": 1, "kappa": 0.5, "delta": 2.0**-10, "r": 1.0, "point_cap": 20_000_000},
        _nongrowth, False),
    "growth-su2": ScenarioSpec(
        {"seed": 0, "n_points": 200, "delta": 2.0**-7, "radius": 0.5, "point_cap": 20_000_000},
        _growth_su2, True),
    "sum-product-generate": ScenarioSpec(
        {"action": "scalar:2", "seed": 0, "n_a": 3, "n_x": 3, "s": 3, "delta": 2.0**-6, "a_radius": 0.5,
         "x_radius": 0.5, "ball_radius": 0.25, "region_cap": 4.0, "point_cap": 2_000_000},
        _sum_product, True),
    "commutator-coverage": ScenarioSpec({"rho": [0.1, 0.05], "k": 1}, _commutator_coverage, False),
    "linearize-demo": ScenarioSpec(
        {"seed": 0, "dim": 2, "dim_out": 2, "delta": 2.0**-10, "rho1": 1e-3, "rho2": 1.0, "noise": 1 / 3},
        _linearize_demo, True),
}


# ---------------------------------------------------------------------------
# running
# ---------------------------------------------------------------------------

def _write_svg(plot: Plot, path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "lie-expand", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for label, xs, ys in plot.series:
            if plot.kind == "bar":
                ax.bar([str(x) for x in xs], ys, label=label)
            else:
                ax.loglog(xs, ys, "o-", label=label, markersize=3)
        ax.set_title(plot.title)
        ax.set_xlabel(plot.xlabel)
        ax.set_ylabel(plot.ylabel)
        if len(plot.series) > 1:
            ax.legend()
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)


class RunFailed(Exception):
    """Carries the partial report of a failed run."""

    def __init__(self, report: RunReport, exit_code: int, cause: BaseException):
        super().__init__(str(cause))
        self.report = report
        self.exit_code = exit_code
        self.cause = cause


def run(config: ScenarioConfig) -> RunReport:
    """Execute one scenario and write its artifacts under ``config.out``.

    Budget exhaustion writes a partial report (``complete`` false) and raises
    :class:`RunFailed` with exit code 3; truncated results also count as
    incomplete.
    """
    params = config.resolved()
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    spec = SCENARIOS[config.scenario]
    failure = None
    try:
        metrics, plots, truncated = spec.runner(params, out)
    except (BudgetExceeded, ResourceLimitError) as exc:
        metrics, plots, truncated = [], [], True
        failure = exc
    report = RunReport(config.scenario, params, metrics, truncated, not truncated,
                       time.perf_counter() - t0, error=str(failure) if failure else None, plots=plots)
    _emit(report, out, config.emit)
    if failure is not None:
        raise RunFailed(report, 3, failure)
    return report


def _emit(report: RunReport, out: Path, emit) -> None:
    paths = []
    if "csv" in emit:
        (out / "metrics.csv").write_text(report.metrics_csv())
        paths.append("metrics.csv")
    if "svg" in emit:
        for plot in report.plots:
            _write_svg(plot, out / f"{plot.name}.svg")
            paths.append(f"{plot.name}.svg")
    extra = sorted(p.name for p in out.iterdir() if p.suffix in (".txt",) or p.name == "phi.json")
    report.artifacts = ["report.json"] + paths + [p for p in extra if p not in paths]
    # the JSON report is always written so partial failures stay inspectable
    (out / "report.json").write_text(json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n")


def compare(reports: list[RunReport]) -> str:
    """CSV with one row per report and one column per metric."""
    if not reports:
        raise UsageError("compare needs at least one report")
    families = {r.scenario for r in reports}
    if len(families) > 1:
        raise UsageError(f"cannot compare different scenarios: {sorted(families)}")
    varying = sorted({k for r in reports for k in r.config if any(r.config.get(k) != o.config.get(k) for o in reports)})
    names: list[str] = []
    for r in reports:
        for m in r.metrics:
            if m.name not in names:
                names.append(m.name)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scenario"] + varying + names)
    for r in reports:
        values = {m.name: _fmt(m.value) for m in r.metrics}
        w.writerow([r.scenario] + [_fmt(r.config.get(k)) for k in varying] + [values.get(n, "") for n in names])
    return buf.getvalue()


def load_report(path: str | Path) -> RunReport:
    p = Path(path)
    if p.is_dir():
        p = p / "report.json"
    return RunReport.from_json(json.loads(p.read_text()))
