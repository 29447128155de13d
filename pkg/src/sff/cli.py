"""Command-line entry point.

Exit codes: 0 success, 1 other error, 2 usage error, 3 translation failed,
4 rejected by the feasibility filter, 5 planner infeasible. Machine output
goes to stdout as JSON; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .decompose import decompose
from .errors import Infeasible, SffError, TranslationError
from .feasibility import FilterConfig, run_filter
from .feedback import build_feedback, make_adapter, paraphrase, translate
from .fields import read_field, write_field
from .planner import SolveConfig, encode, export_lp, solve
from .plot import render_svg
from .scenario import load_scenario
from .stl import parse_stl, robustness

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_TRANSLATION = 3
EXIT_REJECTED = 4
EXIT_INFEASIBLE = 5

log = logging.getLogger("sff")


def _emit(doc: dict) -> None:
    sys.stdout.write(json.dumps(doc, sort_keys=True, default=_jsonable) + "\n")
    sys.stdout.flush()


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _check(formula, scenario, level: int, dump_dir: str | None):
    cfg = FilterConfig.from_scenario(scenario, keep_fields=dump_dir is not None)
    report = run_filter(formula, scenario, level, cfg=cfg)
    if dump_dir:
        out = Path(dump_dir)
        out.mkdir(parents=True, exist_ok=True)
        for v in report.verdicts:
            if v.value_field is not None:
                write_field(v.value_field, out / f"subformula_{v.index}.bin")
    return report


def _plan(formula, scenario, level: int, args):
    target = decompose(formula, level)
    enc = encode(target, scenario, margin=args.margin)
    if args.export_lp:
        Path(args.export_lp).write_text(export_lp(enc.model))
    result = solve(enc, scenario, SolveConfig(solver=args.solver, time_limit=args.time_limit))
    doc = result.to_json()
    doc["level"] = level
    doc["robustness_original"] = float(robustness(result.trajectory, 0, formula, scenario))
    return doc


def cmd_translate(args) -> int:
    sc = load_scenario(args.scenario)
    try:
        tr = translate(args.command, sc.description, make_adapter(args.adapter), sc)
    except TranslationError as exc:
        _emit({"error": "TranslationError", "diagnostics": exc.diagnostics, "raw": exc.raw})
        return EXIT_TRANSLATION
    _emit(tr.to_json())
    return EXIT_OK


def cmd_check(args) -> int:
    sc = load_scenario(args.scenario)
    f = parse_stl(args.stl, sc.table)
    report = _check(f, sc, args.level, args.dump_fields)
    _emit(report.to_json())
    return EXIT_OK if report.decision == "Proceed" else EXIT_REJECTED


def cmd_plan(args) -> int:
    sc = load_scenario(args.scenario)
    f = parse_stl(args.stl, sc.table)
    if not args.skip_check:
        report = _check(f, sc, args.level, None)
        if report.decision != "Proceed":
            _emit(report.to_json())
            return EXIT_REJECTED
    try:
        doc = _plan(f, sc, args.level, args)
    except Infeasible as exc:
        _emit({"error": "Infeasible", "message": str(exc)})
        return EXIT_INFEASIBLE
    _emit(doc)
    return EXIT_OK


def cmd_pipeline(args) -> int:
    sc = load_scenario(args.scenario)
    adapter = make_adapter(args.adapter)
    try:
        tr = translate(args.command, sc.description, adapter, sc)
    except TranslationError as exc:
        _emit({"stage": "translate", "ok": False, "diagnostics": exc.diagnostics})
        return EXIT_TRANSLATION
    _emit({"stage": "translate", "ok": True, **tr.to_json()})
    linked = tr.scenario(sc)
    report = _check(tr.formula, linked, args.level, None)
    _emit({"stage": "check", **report.to_json()})
    if report.decision != "Proceed":
        fb = build_feedback(report, linked)
        text = paraphrase(fb, adapter if args.paraphrase else None)
        _emit({"stage": "feedback", **fb.to_json(), "text": text})
        return EXIT_REJECTED
    try:
        doc = _plan(tr.formula, linked, args.level, args)
    except Infeasible as exc:
        _emit({"stage": "plan", "ok": False, "error": "Infeasible", "message": str(exc)})
        return EXIT_INFEASIBLE
    _emit({"stage": "plan", "ok": True, **doc})
    return EXIT_OK


def cmd_plot(args) -> int:
    sc = load_scenario(args.scenario)
    field = read_field(args.field) if args.field else None
    traj = None
    if args.traj:
        doc = json.loads(Path(args.traj).read_text())
        traj = np.asarray(doc["states"], dtype=float)
    Path(args.out).write_text(render_svg(sc, field, traj, title=args.title))
    return EXIT_OK


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sff", description="STL mission feasibility checking and planning.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="cmd", required=True)

    def common(sp, stl=True):
        sp.add_argument("--scenario", required=True, help="scenario JSON path or bundled name")
        if stl:
            sp.add_argument("--stl", required=True, help="mission formula")
        sp.add_argument("--level", type=int, choices=(0, 1, 2), default=1, help="decomposition level")

    def planner_opts(sp):
        sp.add_argument("--export-lp", metavar="PATH", help="write the MILP in CPLEX LP format")
        sp.add_argument("--solver", choices=("auto", "bnb", "highs"), default="auto")
        sp.add_argument("--time-limit", type=float, default=None, help="MILP time limit in seconds")
        sp.add_argument("--margin", type=float, default=1e-3,
                        help="required predicate clearance at every planned step")

    sp = sub.add_parser("translate", help="translate a natural-language command to STL")
    sp.add_argument("--scenario", required=True)
    sp.add_argument("--adapter", required=True, help="fixture key, 'echo' or 'http'")
    sp.add_argument("--command", required=True)
    sp.set_defaults(func=cmd_translate)

    sp = sub.add_parser("check", help="run the feasibility filter")
    common(sp)
    sp.add_argument("--dump-fields", metavar="DIR", help="write each subformula field to DIR")
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("plan", help="check, then plan a trajectory")
    common(sp)
    planner_opts(sp)
    sp.add_argument("--skip-check", action="store_true", help="plan without running the filter")
    sp.set_defaults(func=cmd_plan)

    sp = sub.add_parser("pipeline", help="translate, check, then plan or explain")
    common(sp, stl=False)
    sp.add_argument("--adapter", required=True)
    sp.add_argument("--command", required=True)
    sp.add_argument("--paraphrase", action="store_true", help="let the adapter reword the feedback")
    planner_opts(sp)
    sp.set_defaults(func=cmd_pipeline)

    sp = sub.add_parser("plot", help="render the map as SVG")
    sp.add_argument("--scenario", required=True)
    sp.add_argument("--field", help="value field dump")
    sp.add_argument("--traj", help="plan JSON with a 'states' list")
    sp.add_argument("--title")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_plot)
    return p


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (SffError, OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
