"""Command-line surface: corridor export, gain checks, simulation, sweeps.

Exit codes are stable: 0 success, 1 failed run or failed stability check,
2 configuration parse error, 3 configuration invariant violation, 64 usage
error.
"""

from __future__ import annotations

import argparse
import itertools
import math
import multiprocessing
import os
import sys

from . import backend
from .airframe import ConfigError
from .control import MARGINAL, STABLE, UNSTABLE, routh_check
from .corridor import build_corridor
from .runio import (ConfigParseError, config_from_dict, load_config,
                    parse_config_text, default_config_text, read_summary,
                    write_corridor_csv, write_summary, write_trace_csv)
from .sim import metrics, run_scenario

EXIT_OK = 0
EXIT_FAILED_RUN = 1
EXIT_PARSE = 2
EXIT_INVARIANT = 3
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_parser():
    parser = _Parser(prog="tiltsim",
                     description="Tiltrotor transition-control simulator")
    parser.add_argument("--config", metavar="FILE",
                        help="run configuration (INI); omitted = built-in "
                             "defaults")
    parser.add_argument("--backend", choices=("auto", "fast", "pure"),
                        default=None, help="numerical core selection")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("corridor", parents=[], help="write the conversion "
                       "corridor boundaries and tilt schedule as CSV")
    p.add_argument("--margin", type=float, default=None,
                   help="override the safety margin fraction")
    p.add_argument("--out", default="corridor.csv", metavar="FILE")

    sub.add_parser("gains-check", help="Routh-Hurwitz verdict for every "
                   "configured gain triple")

    p = sub.add_parser("simulate", help="run a configured scenario")
    p.add_argument("--scenario", default="transition", metavar="NAME")
    p.add_argument("--out", default=None, metavar="DIR",
                   help="output directory (default from config)")

    p = sub.add_parser("step", help="run a reference-step baseline scenario")
    p.add_argument("--channel", choices=("altitude", "pitch"),
                   required=True)
    p.add_argument("--regime", choices=("heli", "fw"), default="heli")
    p.add_argument("--out", default=None, metavar="DIR")

    p = sub.add_parser("sweep", help="run a parameter grid in parallel")
    p.add_argument("--param", action="append", default=[],
                   metavar="SECTION.KEY=V1,V2,...",
                   help="values to sweep (repeatable; grid is the cartesian "
                        "product)")
    p.add_argument("--scenario", default="transition", metavar="NAME")
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--out", default=None, metavar="DIR")
    return parser


def _load(args):
    return load_config(args.config)


def _run_one(run_cfg, scenario_name, out_dir):
    corr = build_corridor(run_cfg.aircraft, run_cfg.grid,
                          run_cfg.margin_frac)
    if scenario_name not in run_cfg.scenarios:
        raise ConfigParseError(
            f"unknown scenario {scenario_name!r}; configured: "
            + ", ".join(sorted(run_cfg.scenarios)))
    scenario = run_cfg.scenarios[scenario_name]
    trace = run_scenario(scenario, run_cfg.aircraft, run_cfg.control, corr)
    report = metrics(trace, trace.meta["v_trim_ms"], corridor=corr,
                     cfg=run_cfg.aircraft)
    os.makedirs(out_dir, exist_ok=True)
    trace_path = os.path.join(out_dir, f"{scenario_name}_trace.csv")
    summary_path = os.path.join(out_dir, f"{scenario_name}_summary.txt")
    write_trace_csv(trace, trace_path)
    write_summary(report, summary_path,
                  extra={"backend": trace.meta["backend"],
                         "dt_s": trace.meta["dt_s"]})
    return trace, report, trace_path, summary_path


def _cmd_simulate(args, scenario_name=None):
    run_cfg = _load(args)
    name = scenario_name or args.scenario
    out_dir = args.out or run_cfg.output_dir
    trace, report, trace_path, summary_path = _run_one(run_cfg, name,
                                                       out_dir)
    print(f"scenario {name}: {len(trace)} steps "
          f"({trace.meta['backend']} backend)")
    for key in ("failed", "max_altitude_dev_m", "max_pitch_dev_deg",
                "peak_f1_N", "peak_f2_N", "transition_duration_s",
                "transition_total_s", "overshoot_frac",
                "settling_time_2pct_s", "corridor_violations"):
        value = getattr(report, key)
        if value is not None:
            print(f"  {key} = {value}")
    print(f"  trace   -> {trace_path}")
    print(f"  summary -> {summary_path}")
    if report.failed:
        print(f"run failed: {report.failed}", file=sys.stderr)
        return EXIT_FAILED_RUN
    return EXIT_OK


def _cmd_step(args):
    name = {"altitude": {"heli": "hover_altitude_step",
                         "fw": "fw_altitude_step"},
            "pitch": {"heli": "hover_pitch_step",
                      "fw": "fw_pitch_step"}}[args.channel][args.regime]
    return _cmd_simulate(args, scenario_name=name)


def _cmd_corridor(args):
    run_cfg = _load(args)
    margin = run_cfg.margin_frac if args.margin is None else args.margin
    corr = build_corridor(run_cfg.aircraft, run_cfg.grid, margin)
    write_corridor_csv(corr, args.out)
    lower0 = math.degrees(corr.lower_raw_rad[0])
    print(f"corridor: {corr.feasible_fraction():.3f} of the grid feasible, "
          f"margin {margin:.2f}")
    print(f"  hover tilt boundary (raw) = {lower0:.2f} deg")
    print(f"  fixed-wing trim speed     = {corr.fixed_wing_trim_ms:.2f} m/s")
    print(f"  -> {args.out}")
    return EXIT_OK


def _cmd_gains_check(args):
    run_cfg = _load(args)
    sched = run_cfg.control.schedule
    rows = []
    bad = 0
    for mode, gains in (("helicopter", sched.heli),
                        ("fixed-wing", sched.fixed_wing)):
        for channel in ("altitude", "velocity", "pitch"):
            g = getattr(gains, channel)
            if mode == "helicopter" and channel == "velocity" \
                    and g.is_zero():
                rows.append((mode, channel, g, "n/a (channel disabled)"))
                continue
            verdict = routh_check(g.kp, g.ki, g.kd)
            if verdict != STABLE:
                bad += 1
            rows.append((mode, channel, g, verdict))
    for mode, channel, g, verdict in rows:
        print(f"{mode:11s} {channel:9s} kp={g.kp:<8g} ki={g.ki:<8g} "
              f"kd={g.kd:<8g} {verdict}")
    if bad:
        print(f"{bad} gain triple(s) not stable", file=sys.stderr)
        return EXIT_FAILED_RUN
    print("all configured gain triples stable")
    return EXIT_OK


def _parse_sweep_params(specs):
    params = []
    for spec in specs:
        key, sep, values = spec.partition("=")
        if not sep or "." not in key:
            raise ConfigParseError(
                f"--param expects SECTION.KEY=V1,V2,..., got {spec!r}")
        section, _, name = key.rpartition(".")
        values = [v.strip() for v in values.split(",") if v.strip()]
        if not values:
            raise ConfigParseError(f"--param {spec!r} lists no values")
        params.append((section, name, values))
    return params


def _sweep_worker(job):
    index, base, overrides, scenario_name = job
    data = {sect: dict(keys) for sect, keys in base.items()}
    for section, key, value in overrides:
        data.setdefault(section, {})[key] = value
    run_cfg = config_from_dict(data)
    corr = build_corridor(run_cfg.aircraft, run_cfg.grid,
                          run_cfg.margin_frac)
    scenario = run_cfg.scenarios[scenario_name]
    trace = run_scenario(scenario, run_cfg.aircraft, run_cfg.control, corr)
    report = metrics(trace, trace.meta["v_trim_ms"], corridor=corr,
                     cfg=run_cfg.aircraft)
    return index, overrides, report.as_dict()


def _cmd_sweep(args):
    if not args.param:
        raise ConfigParseError("sweep needs at least one --param")
    if args.config is None:
        base = parse_config_text(default_config_text())
    else:
        run_cfg = load_config(args.config)  # fail fast on a bad base
        with open(args.config, "r", encoding="utf-8") as fh:
            base = parse_config_text(fh.read())
    run_cfg = config_from_dict({s: dict(k) for s, k in base.items()})
    if args.scenario not in run_cfg.scenarios:
        raise ConfigParseError(f"unknown scenario {args.scenario!r}")
    params = _parse_sweep_params(args.param)

    combos = list(itertools.product(*[
        [(section, key, v) for v in values]
        for section, key, values in params]))
    jobs = [(i, base, list(combo), args.scenario)
            for i, combo in enumerate(combos)]
    n_workers = args.jobs or min(len(jobs), os.cpu_count() or 1)
    if n_workers > 1 and len(jobs) > 1:
        with multiprocessing.Pool(n_workers) as pool:
            results = pool.map(_sweep_worker, jobs)
    else:
        results = [_sweep_worker(job) for job in jobs]
    results.sort(key=lambda item: item[0])

    out_dir = args.out or run_cfg.output_dir
    os.makedirs(out_dir, exist_ok=True)
    out_path = os.path.join(out_dir, "sweep.csv")
    param_names = [f"{section}.{key}" for section, key, _ in params]
    metric_names = list(results[0][2].keys())
    import csv as _csv
    import io as _io
    buf = _io.StringIO()
    writer = _csv.writer(buf, lineterminator="\n")
    writer.writerow(["run"] + param_names + metric_names)
    any_failed = False
    for index, overrides, report in results:
        row = [index] + [value for _, _, value in overrides]
        row += [report[name] if report[name] is not None else "n/a"
                for name in metric_names]
        writer.writerow(row)
        if report.get("failed"):
            any_failed = True
            print(f"run {index} failed: {report['failed']}",
                  file=sys.stderr)
    tmp = out_path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())
    os.replace(tmp, out_path)
    print(f"{len(results)} runs -> {out_path}")
    return EXIT_FAILED_RUN if any_failed else EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_OK
    if args.backend:
        backend.use(args.backend)
    handlers = {"corridor": _cmd_corridor, "gains-check": _cmd_gains_check,
                "simulate": _cmd_simulate, "step": _cmd_step,
                "sweep": _cmd_sweep}
    try:
        return handlers[args.command](args)
    except ConfigParseError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_PARSE
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INVARIANT
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INVARIANT
    except RuntimeError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_FAILED_RUN


if __name__ == "__main__":
    sys.exit(main())
