"""Command-line harness: validate scenarios, run them, sweep parameters.

Exit codes: 0 success, 1 runtime failure (diverged run or failed
feasibility check), 2 input error (unparsable or invalid scenario,
unknown sweep parameter).
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from .errors import ScenarioError
from .scenario import PRESETS, load_scenario, scenario_from_dict
from .simulate import check_conditions, metrics, run


def _load(ref: str):
    try:
        return load_scenario(ref)
    except json.JSONDecodeError as exc:
        print(f"error: {ref}: invalid JSON at line {exc.lineno}, column {exc.colno}: "
              f"{exc.msg}", file=sys.stderr)
        sys.exit(2)
    except (ScenarioError, FileNotFoundError, ValueError) as exc:
        print(f"error: {ref}: {exc}", file=sys.stderr)
        sys.exit(2)


def _apply_overrides(scn, args):
    cfg = scn.config
    fields = {}
    if getattr(args, "mode", None):
        fields["autopilot_mode"] = args.mode
    if getattr(args, "vdot", None):
        fields["vdot_mode"] = args.vdot
    if getattr(args, "t_end", None) is not None:
        fields["t_end"] = args.t_end
    if getattr(args, "dt", None) is not None:
        fields["dt"] = args.dt
    if getattr(args, "seed", None) is not None:
        fields["seed"] = args.seed
    return replace(cfg, **fields) if fields else cfg


def cmd_validate(args) -> int:
    scn = _load(args.scenario)
    rep = check_conditions(scn.config)
    print(f"scenario            {scn.name}")
    print(f"kappa_max = {rep.kappa_max:.6g}")
    print(f"Y_min = {rep.y_min:.6g}   X_max = {rep.x_max:.6g}   "
          f"Y_min/X_max = {rep.ratio:.6g}")
    print(f"curvature condition: kappa_max < Y_min/X_max  ->  "
          f"{'PASS' if rep.kappa_ok else 'FAIL'}")
    print(f"mu bound = {rep.mu_bound:.6g} m   mu = {rep.mu:.6g} m  ->  "
          f"{'PASS' if rep.mu_ok else 'FAIL'}")
    if not rep.params_ok:
        for v in rep.violations:
            print(f"parameter violation: {v}")
    print(f"overall: {'PASS' if rep.ok else 'FAIL'}")
    return 0 if rep.ok else 1


def _run_one(cfg, force: bool):
    t0 = time.monotonic()
    log = run(cfg, force=force)
    elapsed = time.monotonic() - t0
    return log, elapsed


def _json_safe(obj):
    """Map non-finite floats to null so the summary stays strict JSON."""
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def cmd_run(args) -> int:
    scn = _load(args.scenario)
    cfg = _apply_overrides(scn, args)
    rep = check_conditions(cfg)
    if not rep.ok and not args.force:
        print("error: feasibility conditions fail; rerun with --force to override",
              file=sys.stderr)
        for line in rep.as_dict().items():
            print(f"  {line[0]} = {line[1]}", file=sys.stderr)
        return 1

    log, elapsed = _run_one(cfg, args.force)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{scn.name}.csv"
    with open(csv_path, "w") as fh:
        log.to_csv(fh)

    summary = {
        "scenario": scn.name,
        "source": scn.source,
        "mode": cfg.autopilot_mode,
        "vdot_mode": cfg.vdot_mode,
        "completed": log.completed,
        "failure": log.failure,
        "theta_clamped_steps": log.theta_clamped,
        "runtime_s": elapsed,
        "conditions": rep.as_dict(),
    }
    if log.completed:
        summary["metrics"] = metrics(log, rate_required=False).as_dict()
    with open(out_dir / f"{scn.name}_summary.json", "w") as fh:
        json.dump(_json_safe(summary), fh, indent=2)
        fh.write("\n")

    print(f"wrote {csv_path} ({len(log)} rows, {elapsed:.2f}s)")
    if log.completed:
        for key, val in summary["metrics"].items():
            print(f"  {key} = {val}")
        return 0
    print(f"error: run did not complete: {log.failure}", file=sys.stderr)
    return 1


def _set_doc_field(doc: dict, dotted: str, value: float) -> None:
    keys = dotted.split(".")
    node = doc
    for key in keys[:-1]:
        if not isinstance(node, dict) or key not in node:
            raise KeyError(dotted)
        node = node[key]
    leaf = keys[-1]
    if not isinstance(node, dict) or leaf not in node or not isinstance(
            node[leaf], (int, float)) or isinstance(node[leaf], bool):
        raise KeyError(dotted)
    node[leaf] = value


def _sweep_worker(task):
    doc, base_dir, value, force = task
    scn = scenario_from_dict(doc, base_dir=base_dir, source="sweep")
    log, elapsed = _run_one(scn.config, force)
    row = {"value": value, "completed": log.completed, "runtime_s": elapsed}
    if log.completed:
        row.update(metrics(log, rate_required=False).as_dict())
    return row


def cmd_sweep(args) -> int:
    ref = args.scenario
    if ref in PRESETS:
        import importlib.resources
        doc = json.loads(
            importlib.resources.files("formsim").joinpath(f"data/{ref}.json").read_text())
        base_dir = None
    else:
        path = Path(ref)
        if not path.exists():
            print(f"error: scenario {ref!r} not found", file=sys.stderr)
            return 2
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            print(f"error: {ref}: invalid JSON at line {exc.lineno}, column "
                  f"{exc.colno}: {exc.msg}", file=sys.stderr)
            return 2
        base_dir = path.parent

    values = [float(v) for v in args.values.split(",") if v.strip() != ""]
    header = ("value", "completed", "convergence_time", "exp_rate_fit",
              "max_sway", "formation_rms", "crosstrack_rms", "runtime_s")
    if not values:
        print("\t".join(header))
        return 0

    tasks = []
    for v in values:
        d = copy.deepcopy(doc)
        try:
            _set_doc_field(d, args.param, v)
        except KeyError:
            print(f"error: unknown or non-numeric parameter path {args.param!r}",
                  file=sys.stderr)
            return 2
        # base scenario must at least parse before any run is attempted
        try:
            scenario_from_dict(copy.deepcopy(d), base_dir=base_dir)
        except ScenarioError as exc:
            print(f"error: {args.param}={v}: {exc}", file=sys.stderr)
            return 2
        tasks.append((d, base_dir, v, args.force))

    workers = int(os.environ.get("FORMSIM_THREADS", "1"))
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_worker, tasks))
    else:
        rows = [_sweep_worker(t) for t in tasks]

    print("\t".join(header))
    ok = True
    for row in rows:
        ok = ok and row["completed"]
        print("\t".join(
            "%.9g" % row[c] if isinstance(row.get(c), float) else str(row.get(c, ""))
            for c in header))
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="formsim",
        description="two-vessel formation path-following simulator",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p_val = sub.add_parser("validate", help="check feasibility conditions")
    p_val.add_argument("scenario", help=f"preset ({', '.join(PRESETS)}) or JSON file")
    p_val.set_defaults(fn=cmd_validate)

    p_run = sub.add_parser("run", help="run a scenario and write CSV + summary")
    p_run.add_argument("scenario")
    p_run.add_argument("--out", default="out", help="output directory")
    p_run.add_argument("--mode", choices=["adaptive", "baseline"])
    p_run.add_argument("--vdot", choices=["truth", "sensor"])
    p_run.add_argument("--t-end", type=float, dest="t_end")
    p_run.add_argument("--dt", type=float)
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--force", action="store_true",
                       help="run even if feasibility conditions fail")
    p_run.set_defaults(fn=cmd_run)

    p_sw = sub.add_parser("sweep", help="run a scenario over a parameter list")
    p_sw.add_argument("scenario")
    p_sw.add_argument("--param", required=True,
                      help="dotted path into the scenario JSON, e.g. guidance.mu")
    p_sw.add_argument("--values", required=True, help="comma-separated numbers")
    p_sw.add_argument("--force", action="store_true")
    p_sw.set_defaults(fn=cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
