"""Command line entry point ``lie-expand``.

Scenarios take free-form ``--name value`` parameters validated against the
scenario's schema.  Exit codes: 0 success, 2 invalid input, 3 budget
exhausted (a partial report is still written), 4 internal error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path

from . import experiments
from .errors import BudgetExceeded, LieExpandError, ResourceLimitError, UsageError

EXIT_OK, EXIT_USAGE, EXIT_BUDGET, EXIT_INTERNAL = 0, 2, 3, 4


def _free_params(tokens: list[str]) -> dict:
    params: dict = {}
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--"):
            raise UsageError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, value = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(tokens):
                raise UsageError(f"missing value for {tok}")
            value = tokens[i + 1]
            i += 2
        params[key.replace("-", "_")] = value
    return params


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--emit", action="append", choices=experiments.EMIT_KINDS,
                   help="artifact kinds to write (repeatable; default all)")
    p.add_argument("--config", type=Path, help="JSON file with scenario, params, out, emit")
    p.add_argument("--threads", type=int, help="worker threads for product sets")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lie-expand", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in experiments.SCENARIOS:
        p = sub.add_parser(name, help=f"run the {name} scenario")
        _common(p)
    p = sub.add_parser("run", help="run the scenario named in --config")
    _common(p)

    p = sub.add_parser("bch", help="print log(exp x1 ... exp xs) truncated at an order")
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("construct-ap", help="progression set (optionally lifted) plus hypothesis report")
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--kappa", default="1/2")
    p.add_argument("--delta", default="2^-10")
    p.add_argument("--r", default="1")
    p.add_argument("--backend", default="")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("nongrowth", help="CSV rows of N(AAA)/N(A) over a kappa/delta sweep")
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--kappa", default="1/4,1/2,3/4")
    p.add_argument("--delta", default="2^-8,2^-10")
    p.add_argument("--r", default="1")

    p = sub.add_parser("compare", help="align metrics of several reports into one CSV")
    p.add_argument("reports", nargs="*", type=Path)
    return parser


def _scenario_config(args, extra: list[str]) -> experiments.ScenarioConfig:
    data: dict = {}
    if args.config:
        try:
            data = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
    scenario = args.command if args.command != "run" else data.get("scenario")
    if scenario is None:
        raise UsageError("run needs a config with a 'scenario' field")
    if data.get("scenario") not in (None, scenario):
        raise UsageError(f"config is for {data['scenario']!r}, not {scenario!r}")
    params = dict(data.get("params", {}))
    params.update(_free_params(extra))
    out = args.out or (Path(data["out"]) if "out" in data else None)
    if out is None:
        raise UsageError("--out is required")
    emit = tuple(args.emit or data.get("emit") or experiments.EMIT_KINDS)
    return experiments.ScenarioConfig(scenario, params, out, emit)


def _cmd_bch(args) -> int:
    from .free_lie import FreeLieElement, bch, format_element

    x, y = FreeLieElement.generators(2, args.order)
    z = bch(x, y, args.order)
    if args.json:
        print(json.dumps({"".join(map(str, w)): str(c) for w, c in z.terms.items()}, indent=2))
    else:
        print(format_element(z))
    return EXIT_OK


def _cmd_construct_ap(args) -> int:
    from .constructions import APConfig, arithmetic_progression_set, lift_to_group, verify_nongrowth
    from .delta_sets import save_delta_set
    from .groups import Abelian, get_backend

    cfg = APConfig(args.d, experiments.parse_number(args.kappa), experiments.parse_number(args.delta),
                   experiments.parse_number(args.r))
    P = arithmetic_progression_set(cfg)
    backend = get_backend(args.backend or f"abelian:{args.d}")
    A = P if isinstance(backend, Abelian) else lift_to_group(P, backend, cfg.r)
    args.out.mkdir(parents=True, exist_ok=True)
    save_delta_set(A, args.out / "set.csv")
    rep = verify_nongrowth(A, r_max=cfg.r)
    report = {
        "config": {"d": cfg.d, "kappa": cfg.kappa, "delta": cfg.delta, "r": cfg.r, "backend": backend.name},
        "points": len(A),
        "N_A": rep.n_a,
        "N_AAA": rep.n_aaa,
        "ratio": rep.ratio,
        "truncated": rep.truncated,
        "quotient_kappa_hat": {q.subgroup: q.kappa_hat for q in rep.quotient_profiles},
        "subgroup_distances": {s.subgroup: s.max_distance for s in rep.subgroup_distances},
    }
    (args.out / "hypotheses.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(json.dumps({"points": len(A), "ratio": rep.ratio}))
    return EXIT_OK


def _cmd_nongrowth(args) -> int:
    from .constructions import APConfig, arithmetic_progression_set, verify_nongrowth

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["d", "kappa", "delta", "N_A", "N_AAA", "ratio", "min_kappa_hat"])
    r = experiments.parse_number(args.r)
    for kappa in experiments._parse_list(args.kappa):
        for delta in experiments._parse_list(args.delta):
            rep = verify_nongrowth(arithmetic_progression_set(APConfig(args.d, kappa, delta, r)), r_max=r,
                                   with_subgroups=False)
            w.writerow([args.d, repr(kappa), repr(delta), rep.n_a, rep.n_aaa, repr(rep.ratio), repr(rep.min_kappa_hat)])
    sys.stdout.write(buf.getvalue())
    return EXIT_OK


def _cmd_compare(args) -> int:
    reports = [experiments.load_report(p) for p in args.reports]
    sys.stdout.write(experiments.compare(reports))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args, extra = parser.parse_known_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_USAGE
    try:
        if args.command in experiments.SCENARIOS or args.command == "run":
            if args.threads:
                os.environ["LIE_EXPAND_THREADS"] = str(args.threads)
            config = _scenario_config(args, extra)
            report = experiments.run(config)
            for m in report.metrics:
                print(f"{m.name} = {experiments._fmt(m.value)}")
            word = Path(config.out) / "word.txt"
            if report.scenario == "synth-word" and word.exists():
                print(f"word = {word.read_text().strip()}")
            print(f"report = {Path(config.out) / 'report.json'} (complete={report.complete})")
            return EXIT_OK if report.complete else EXIT_BUDGET
        if extra:
            raise UsageError(f"unexpected arguments {extra}")
        handler = {"bch": _cmd_bch, "construct-ap": _cmd_construct_ap, "nongrowth": _cmd_nongrowth,
                   "compare": _cmd_compare}[args.command]
        return handler(args)
    except experiments.RunFailed as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (BudgetExceeded, ResourceLimitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (UsageError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except LieExpandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
