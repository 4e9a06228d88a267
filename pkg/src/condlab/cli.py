"""Command-line front end.

Usage:
    condlab classify scenario.json [--replay] [--out DIR]
    condlab capacity scenario.json [--out DIR]
    condlab verify-example NAME [--out DIR]
    condlab report scenario.json --out DIR [--replay]
    condlab schema                  Print the scenario JSON schema
    condlab list                    Registered conductivities, surfaces, examples, theorems

Exit status: 0 on a decisive verdict or a completed computation, 3 when every
criterion is Undecided, 1 on any error (including a failed replay or a failed
example claim).  ``CONDLAB_THREADS`` caps the worker threads of the
capacity ladder.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import traceback
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from . import classifier as cl
from . import conductivity_zoo as zoo
from . import scenario as sc
from . import submanifold as sub
from .capacity_solver import capacity
from .errors import NotPolarAdapted, SchemaError
from .geometry import curvature, inverse_metric
from .tensor_core import box_samples
from .verification import EXAMPLES, verify_example

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_UNDECIDED = 3

DEFAULT_LADDER = ((64, 64), (128, 128), (256, 256))


class Outcome:
    """What a task produced: the report payload, CSV plot data and an exit status."""

    def __init__(self, payload: dict, status: int, csv_header=None, csv_rows=None, summary: str = ""):
        self.payload = payload
        self.status = status
        self.csv_header = csv_header
        self.csv_rows = csv_rows or []
        self.summary = summary


def _json_default(o):
    if isinstance(o, np.floating):
        return sc.finite(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def dumps(payload: dict) -> str:
    """Deterministic JSON: sorted keys, fixed indentation, no timestamps."""
    return json.dumps(payload, sort_keys=True, indent=2, default=_json_default, allow_nan=False) + "\n"


# ---------------------------------------------------------------------------
# tasks
# ---------------------------------------------------------------------------


def run_classify(scenario: dict, replay: bool = False) -> Outcome:
    setting = sc.build_setting(scenario)
    if setting.conductivity is None:
        raise SchemaError("field conductivity: classification needs a conductivity")
    reports, replays = [], []
    for raw in sc.criteria(scenario):
        spec = sc.build_criterion(raw)
        if setting.surface is not None:
            if spec.theorem not in cl.EXTRINSIC_THEOREMS:
                raise SchemaError(f"field criterion/theorem: {spec.theorem} is intrinsic but the manifold is a surface")
            rep = sub.classify_extrinsic(setting.surface, setting.conductivity, spec)
            if replay:
                replays.append(sub.replay_extrinsic(rep, setting.surface, setting.conductivity, spec))
        else:
            rep = cl.classify(setting.manifold, setting.conductivity, spec, raw.get("reference_verdict"))
            if replay:
                replays.append(cl.replay(rep, setting.manifold, setting.conductivity, spec))
        reports.append(rep)
    verdict = cl.combine(reports)
    payload = {"task": "classify", "scenario": scenario.get("name", ""), "verdict": verdict,
               "reports": [r.as_dict() for r in reports], "version": __version__}
    if replay:
        payload["replay"] = all(replays)
    rows = []
    for r in reports:
        for mg in r.margins:
            rows.append([r.theorem, mg.condition, sc.finite(mg.worst), sc.finite(mg.slack), mg.satisfied]
                        + [repr(float(v)) for v in mg.witness])
    width = max((len(row) for row in rows), default=5) - 5
    header = ["theorem", "condition", "worst", "slack", "satisfied"] + [f"x{i + 1}" for i in range(width)]
    status = EXIT_OK if verdict != cl.UNDECIDED else EXIT_UNDECIDED
    lines = [f"{r.theorem}: {r.verdict} ({r.reason})" for r in reports]
    if replay:
        ok = payload["replay"]
        lines.append("replay: " + ("margins reproduced exactly" if ok else "MISMATCH"))
        if not ok:
            status = EXIT_ERROR
    lines.append(f"verdict: {verdict}")
    return Outcome(payload, status, header, rows, "\n".join(lines))


def run_capacity(scenario: dict) -> Outcome:
    setting = sc.build_setting(scenario)
    if setting.manifold is None:
        raise SchemaError("field manifold: capacity needs a two-dimensional chart with a pole")
    if setting.manifold.pole is None:
        raise NotPolarAdapted("capacity needs a chart with a pole")
    solver = scenario["solver"]
    ladder = tuple(tuple(lv) for lv in solver.get("ladder", DEFAULT_LADDER))
    est = capacity(setting.manifold, setting.conductivity, float(solver["rho"]), float(solver["R"]), ladder)
    payload = {"task": "capacity", "scenario": scenario.get("name", ""), "value": est.richardson_extrapolate,
               "estimators_agree": est.estimators_agree, "estimate": est.as_dict(), "version": __version__}
    header = ["n_r", "n_theta", "energy", "flux", "iterations", "range_violation"]
    rows = [[lv[k] for k in header] for lv in est.ladder]
    summary = (f"capacity {est.richardson_extrapolate:.10g} +- {est.error_bar:.2g} "
               f"(observed order {est.observed_order:.3g}, energy/flux agree: {est.estimators_agree})")
    return Outcome(payload, EXIT_OK, header, rows, summary)


def run_verify(name: str) -> Outcome:
    rows = verify_example(name)
    passed = all(r.status == "PASS" for r in rows)
    payload = {"task": "verify-example", "example": name, "passed": passed,
               "rows": [r.as_dict() for r in rows], "version": __version__}
    table = [[r.claim, r.anchor, json.dumps(r.as_dict()["computed"], default=_json_default),
              json.dumps(r.as_dict()["expected"], default=_json_default), r.status] for r in rows]
    lines = [f"{r.status}  {r.claim}: {table[i][2]} (expected {table[i][3]})" for i, r in enumerate(rows)]
    failed = sum(r.status != "PASS" for r in rows)
    lines.append(f"{name}: {len(rows) - failed}/{len(rows)} claims pass")
    return Outcome(payload, EXIT_OK if passed else EXIT_ERROR, ["claim", "anchor", "computed", "expected", "status"],
                   table, "\n".join(lines))


def run_curvature_report(scenario: dict) -> Outcome:
    setting = sc.build_setting(scenario)
    m = setting.manifold
    if m is None:
        raise SchemaError("field manifold: curvature-report needs a chart, not a surface")
    smp = scenario.get("sampling", {})
    budget, seed, step = int(smp.get("budget", 64)), int(smp.get("seed", 0)), float(smp.get("step", 1e-3))
    if m.pole is not None:
        pts = m.sample_shell(float(smp.get("rho", 0.5)), float(smp.get("horizon", 2.0)), budget, seed)
    else:
        b = np.asarray(m.bounds, dtype=float)
        if not np.all(np.isfinite(b)):
            raise SchemaError("field manifold/box: a chart without a pole needs a finite box to sample")
        pts = box_samples(m.bounds, budget, seed)
    pack = curvature(m, pts, step)
    ric_eig = np.sort(np.linalg.eigvals(inverse_metric(pack.metric) @ pack.ricci).real, axis=-1)
    n = m.dim
    planes = [(i, j) for i in range(n) for j in range(i + 1, n)]
    sec = np.array([pack.sectional(np.eye(n)[i] + 0 * pts, np.eye(n)[j] + 0 * pts) for i, j in planes]).T
    payload = {
        "task": "curvature-report",
        "scenario": scenario.get("name", ""),
        "n_points": len(pts),
        "scalar": {"min": sc.finite(pack.scalar.min()), "max": sc.finite(pack.scalar.max())},
        "ricci_eigenvalues": {"min": sc.finite(ric_eig.min()), "max": sc.finite(ric_eig.max())},
        "coordinate_sectional": {"min": sc.finite(sec.min()), "max": sc.finite(sec.max())} if planes else None,
        "step": step,
        "version": __version__,
    }
    header = [f"x{i + 1}" for i in range(n)] + ["scalar"] + [f"ricci_eig{i + 1}" for i in range(n)]
    rows = [[repr(float(v)) for v in p] + [repr(float(s))] + [repr(float(e)) for e in ev]
            for p, s, ev in zip(pts, pack.scalar, ric_eig)]
    summary = (f"scalar curvature in [{payload['scalar']['min']:.6g}, {payload['scalar']['max']:.6g}] "
               f"over {len(pts)} points")
    return Outcome(payload, EXIT_OK, header, rows, summary)


def run_scenario(scenario: dict, replay: bool = False) -> Outcome:
    task = scenario["task"]
    if task == "classify":
        return run_classify(scenario, replay)
    if task == "capacity":
        return run_capacity(scenario)
    if task == "verify-example":
        return run_verify(scenario["example"])
    return run_curvature_report(scenario)


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def write_outputs(outcome: Outcome, out_dir: Path, outputs: Optional[dict] = None, csv_name: str = "data.csv") -> list:
    outputs = outputs or {}
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    report = out_dir / outputs.get("report", "report.json")
    report.write_text(dumps(outcome.payload))
    written.append(report)
    if outcome.csv_header:
        path = out_dir / outputs.get("csv", csv_name)
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(outcome.csv_header)
            wr.writerows(outcome.csv_rows)
        written.append(path)
    return written


def format_error(exc: BaseException) -> str:
    """``[module] Name: message`` where module is the innermost condlab frame that raised."""
    module = type(exc).__module__.rsplit(".", 1)[-1]
    for frame, _ in traceback.walk_tb(exc.__traceback__):
        name = frame.f_globals.get("__name__", "")
        if name.startswith("condlab."):
            module = name.rsplit(".", 1)[-1]
    return f"[{module}] {type(exc).__name__}: {exc}"


def _finish(outcome: Outcome, args, scenario: Optional[dict], csv_name: str) -> int:
    print(outcome.summary)
    out = getattr(args, "out", None)
    outputs = (scenario or {}).get("outputs")
    if out is None and outputs and "report" in outputs:
        out = "."
    if out is not None:
        for path in write_outputs(outcome, Path(out), outputs, csv_name):
            print(f"wrote {path}")
    return outcome.status


def _load_task(path: str, expected: Optional[str]) -> dict:
    scenario = sc.load(path)
    scenario.setdefault("name", Path(path).stem)
    if expected is not None and scenario["task"] != expected:
        raise SchemaError(f"field task: scenario declares {scenario['task']!r}, command expects {expected!r}")
    return scenario


def cmd_classify(args) -> int:
    scenario = _load_task(args.scenario, "classify")
    return _finish(run_classify(scenario, args.replay), args, scenario, "margins.csv")


def cmd_capacity(args) -> int:
    scenario = _load_task(args.scenario, "capacity")
    return _finish(run_capacity(scenario), args, scenario, "ladder.csv")


def cmd_verify(args) -> int:
    return _finish(run_verify(args.name), args, None, "checks.csv")


def cmd_report(args) -> int:
    scenario = _load_task(args.scenario, None)
    names = {"classify": "margins.csv", "capacity": "ladder.csv", "verify-example": "checks.csv",
             "curvature-report": "curvature.csv"}
    return _finish(run_scenario(scenario, args.replay), args, scenario, names[scenario["task"]])


def cmd_schema(args) -> int:
    print(json.dumps(sc.SCHEMA, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_list(args) -> int:
    print("conductivities: " + ", ".join(sorted(zoo.REGISTRY)))
    print("surfaces:       " + ", ".join(sorted(sc.SURFACES)))
    print("examples:       " + ", ".join(sorted(EXAMPLES)))
    print("theorems:       " + ", ".join(cl.THEOREMS))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="condlab", description="Conductive Laplacian laboratory")
    p.add_argument("--version", action="version", version=f"condlab {__version__}")
    subs = p.add_subparsers(dest="command", required=True)

    c = subs.add_parser("classify", help="classify a conductivity with the scenario's criteria")
    c.add_argument("scenario")
    c.add_argument("--replay", action="store_true", help="re-check every certificate margin at its witness")
    c.add_argument("--out", help="directory for report.json and margins.csv")
    c.set_defaults(func=cmd_classify)

    c = subs.add_parser("capacity", help="capacity of an annulus on a refinement ladder")
    c.add_argument("scenario")
    c.add_argument("--out", help="directory for report.json and ladder.csv")
    c.set_defaults(func=cmd_capacity)

    c = subs.add_parser("verify-example", help="run the checks of a named example")
    c.add_argument("name", help="one of: " + ", ".join(sorted(EXAMPLES)))
    c.add_argument("--out", help="directory for report.json and checks.csv")
    c.set_defaults(func=cmd_verify)

    c = subs.add_parser("report", help="run any scenario and write report.json plus CSV data")
    c.add_argument("scenario")
    c.add_argument("--out", required=True)
    c.add_argument("--replay", action="store_true")
    c.set_defaults(func=cmd_report)

    subs.add_parser("schema", help="print the scenario JSON schema").set_defaults(func=cmd_schema)
    subs.add_parser("list", help="list registered names").set_defaults(func=cmd_list)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - every failure becomes exit status 1 with its provenance
        print(format_error(exc), file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
