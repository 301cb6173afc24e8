"""Command-line front end.

    tissf simulate    --config cfg.json [--out DIR] [--svg] [--seed N]
    tissf certify     --config cfg.json [--out DIR]
    tissf sweep       --config cfg.json [--out DIR] [--workers N]
    tissf filter-eval --config cfg.json

Exit codes: 0 success, 1 audit or certification failure, 2 config error,
3 runtime error (infeasible filter, divergence, disturbance bound breach).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import cert, core, filters, scenario, svg
from .sim import LeadProfileError, SimulationAborted

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3

RUNTIME_ERRORS = (
    SimulationAborted,
    filters.InfeasibleFilterError,
    core.NonFiniteError,
    core.DisturbanceBoundError,
)


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_text(path: Path, text: str) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def _load(args):
    cfg = scenario.parse_config(Path(args.config))
    if args.seed is not None:
        cfg = cfg.model_copy(update={"seed": args.seed})
    return cfg


def _phase_svg(cfg, scn, trajs) -> str:
    title = f"{cfg.name}: {cfg.filter.type}"
    panel = svg.phase_panel(title, trajs, scn.alpha, scn.schedule, scn.d_inf)
    return svg.render([panel], 1, 1, 520, 500)


def _truck_svg(cfg, scn, trajs, base_dir) -> str:
    runs = {}
    if cfg.filter.type != "nominal":
        nominal_cfg = cfg.model_copy(update={"filter": scenario.FilterConfig(type="nominal")})
        nominal = scenario.run(scenario.build(nominal_cfg, base_dir))
        runs["nominal"] = nominal[0]
    runs[cfg.filter.type] = trajs[0]
    return svg.figure2(runs, {"nominal": "#000000", cfg.filter.type: "#d62728"})


def cmd_simulate(args) -> int:
    cfg = _load(args)
    base_dir = Path(args.config).resolve().parent
    scn = scenario.build(cfg, base_dir)
    out = _out_dir(args.out)
    try:
        trajs = scenario.run(scn)
    except SimulationAborted as exc:
        for i, tr in enumerate(exc.trajectory or []):
            tr.to_csv(out / f"trajectory_{i}_partial.csv")
        raise
    for i, tr in enumerate(trajs):
        tr.to_csv(out / f"trajectory_{i}.csv")
    audits = scenario.audit_runs(scn, trajs, cfg.tolerances.tol, cfg.tolerances.fd_tol)
    blocks = [f"run={i}\n" + a.to_text() for i, a in enumerate(audits)]
    _write_text(out / "audit.txt", "\n".join(blocks))
    if args.svg:
        if cfg.system.name == "double_integrator":
            text = _phase_svg(cfg, scn, trajs)
        else:
            text = _truck_svg(cfg, scn, trajs, base_dir)
        _write_text(out / "figure.svg", text)
    passed = all(a.passed for a in audits)
    worst = min(audits, key=lambda a: a.min_h_dT)
    print(f"runs={len(trajs)} min_h={min(a.min_h for a in audits)!r} min_h_dT={worst.min_h_dT!r} passed={str(passed).lower()}")
    if not passed:
        print("audit failed; see audit.txt", file=sys.stderr)
    return EXIT_OK if passed else EXIT_FAIL


def _e_values(cfg, plant):
    if cfg.certify.e_values is not None:
        return cfg.certify.e_values
    if plant.system.p == 0:
        return None
    lo, hi = scenario.systems.TruckParams(**cfg.system.params).lead_accel_range
    return [[v] for v in np.linspace(lo, hi, 5)]


def cmd_certify(args) -> int:
    cfg = _load(args)
    if cfg.certify is None:
        raise scenario.ConfigError("certify: section missing")
    if cfg.filter.schedule() is None:
        raise scenario.ConfigError("filter.eps0: required to define the schedule being certified")
    scn = scenario.build(cfg, Path(args.config).resolve().parent)
    c = cfg.certify
    report = cert.certify_grid(
        scn.plant.system,
        scn.plant.barrier,
        scn.alpha,
        scn.schedule,
        scn.filter,
        c.lower,
        c.upper,
        c.resolution,
        scn.d_inf,
        e_values=_e_values(cfg, scn.plant),
        boundary_band=c.boundary_band,
    )
    out = _out_dir(args.out)
    text = report.to_text()
    _write_text(out / "certification.txt", text)
    _write_text(out / "certification.json", json.dumps(report.as_dict(), indent=2) + "\n")
    sys.stdout.write(text)
    return EXIT_OK if report.certified else EXIT_FAIL


def cmd_sweep(args) -> int:
    cfg = _load(args)
    if cfg.sweep is None:
        raise scenario.ConfigError("sweep: section missing")
    workers = args.workers or os.cpu_count() or 1
    rows = scenario.batch_sweep(cfg, workers=workers, base_dir=Path(args.config).resolve().parent)
    out = _out_dir(args.out)
    scenario.write_summary_csv(rows, out / "summary.csv")
    print(f"runs={len(rows)} summary={out / 'summary.csv'}")
    return EXIT_OK


def filter_eval(cfg, base_dir=None) -> dict:
    """One-shot evaluation of the configured filter at ``cfg.state``."""
    if cfg.state is None:
        raise scenario.ConfigError("state: required for filter-eval")
    scn = scenario.build(cfg, base_dir)
    system, barrier = scn.plant.system, scn.plant.barrier
    x = np.array(cfg.state, dtype=float)
    e = np.zeros(system.p) if cfg.e is None else np.array(cfg.e, dtype=float)
    if e.shape != (system.p,):
        raise scenario.ConfigError(f"e: expected length {system.p}")
    lf, lg = core.lie_derivatives(system, barrier, x, e)
    k = scn.filter.nominal(x, e)
    u = scn.filter.apply(system, barrier, x, e)
    applied, saturated = (u, False)
    if scn.input_bounds is not None:
        applied, saturated = filters.saturate(u, *scn.input_bounds)
    result = {
        "h": barrier.value(x),
        "L_f_h": lf,
        "L_g_h": lg.tolist(),
        "u_nominal": k.tolist(),
        "u_unsaturated": u.tolist(),
        "u_filtered": applied.tolist(),
        "saturated": saturated,
        "delta": float(np.linalg.norm(u - k)),
        "cbf_slack": filters.cbf_condition_slack(system, barrier, scn.alpha, x, e, applied),
    }
    if scn.schedule is not None:
        result["tissf_slack"] = filters.tissf_condition_slack(
            system, barrier, scn.alpha, scn.schedule, x, e, applied
        )
    return result


def cmd_filter_eval(args) -> int:
    cfg = _load(args)
    result = filter_eval(cfg, Path(args.config).resolve().parent)
    text = "".join(f"{k}={cert._format_value(v)}\n" for k, v in result.items())
    sys.stdout.write(text)
    if args.out:
        _write_text(_out_dir(args.out) / "filter_eval.txt", text)
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "certify": cmd_certify,
    "sweep": cmd_sweep,
    "filter-eval": cmd_filter_eval,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tissf", description="Tunable input-to-state safety filters")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="scenario JSON file")
    ap.add_argument("--out", default=None, help="output directory (default: ./out)")
    ap.add_argument("--svg", action="store_true", help="also write figure.svg (simulate)")
    ap.add_argument("--workers", type=int, default=None, help="parallel sweep workers (default: cores)")
    ap.add_argument("--seed", type=int, default=None, help="override the config seed")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.out is None and args.command != "filter-eval":
        args.out = "out"
    try:
        return COMMANDS[args.command](args)
    except (scenario.ConfigError, LeadProfileError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RUNTIME_ERRORS as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
