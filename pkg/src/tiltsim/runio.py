"""Run configuration loading and result serialization.

Configuration files use INI sections with plain key = value pairs; angles
are degrees at this boundary (radians everywhere inside).  Unknown sections
or keys are rejected outright, and invariant checks report *every*
violation, not just the first.  Output files are RFC-4180 CSV (traces,
corridors, sweep tables) and flat key = value summaries; all of them are
written to a temporary file and renamed into place so no partial file is
ever observed.  Floats are serialized with ``repr`` so a re-parse
reproduces them exactly.
"""

from __future__ import annotations

import configparser
import csv
import io
import math
import os
import random
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np

from .airframe import AircraftConfig, ConfigError, Disturbance
from .control import ControlParams, GainSchedule, GainSet, PidGains
from .corridor import Corridor, GridSpec
from .sim import (ALTITUDE_STEP, PITCH_STEP, TRANSITION, MetricReport,
                  Scenario, SimTrace)

TRACE_HEADER = "# tiltsim trace v1"
CORRIDOR_HEADER = "# tiltsim corridor v1"
SUMMARY_HEADER = "# tiltsim summary v1"


class ConfigParseError(ValueError):
    """The configuration file could not be read or parsed (exit code 2)."""


_DEFAULT_SCENARIOS = {
    "transition": Scenario(kind=TRANSITION, name="transition",
                           duration_s=50.0, dt_s=0.002),
    "hover_altitude_step": Scenario(kind=ALTITUDE_STEP,
                                    name="hover_altitude_step",
                                    regime="heli", duration_s=240.0,
                                    dt_s=0.005),
    "hover_pitch_step": Scenario(kind=PITCH_STEP, name="hover_pitch_step",
                                 regime="heli", duration_s=240.0,
                                 dt_s=0.005),
    "fw_altitude_step": Scenario(kind=ALTITUDE_STEP, name="fw_altitude_step",
                                 regime="fw", duration_s=300.0, dt_s=0.005),
    "fw_pitch_step": Scenario(kind=PITCH_STEP, name="fw_pitch_step",
                              regime="fw", duration_s=240.0, dt_s=0.005),
}


@dataclass(frozen=True)
class RunConfig:
    """Everything one invocation needs, fully validated."""

    aircraft: AircraftConfig = field(default_factory=AircraftConfig)
    control: ControlParams = field(default_factory=ControlParams)
    grid: GridSpec = field(default_factory=GridSpec)
    margin_frac: float = 0.10
    scenarios: dict = field(default_factory=lambda: dict(_DEFAULT_SCENARIOS))
    output_dir: str = "out"
    seed: int = 0


_AIRCRAFT_FLOAT_KEYS = (
    "mass_kg", "inertia_pitch_kgm2", "rotor_inertia_kgm2", "wing_area_m2",
    "tail_area_m2", "x_wing_m", "x_tail_m", "y_drag_m", "f1_max_n",
    "f2_max_n", "p_max_w", "wing_cl0", "wing_cl_alpha_per_rad",
    "wing_cl_max", "wing_cd0", "wing_induced_drag_k", "tail_cl0",
    "tail_cl_alpha_per_rad", "tail_cl_max", "tail_cd0",
    "tail_induced_drag_k", "rho_kg_m3", "v_max_ms", "disk_loading_kg_m2",
    "lever_front_0_m", "lever_front_90_m", "lever_rear_0_m",
    "lever_rear_90_m",
)
_AIRCRAFT_FIELD_BY_KEY = {"f1_max_n": "f1_max_N", "f2_max_n": "f2_max_N",
                          "p_max_w": "p_max_W"}
_GAIN_KEYS = ("kp_z", "ki_z", "kd_z", "kp_x", "ki_x", "kd_x",
              "kp_theta", "ki_theta", "kd_theta")
_CONTROL_KEYS = ("tilt_k_tau", "tilt_rate_limit_deg_s", "guard_eps",
                 "velocity_error_limit_ms", "velocity_ref_slew_ms2",
                 "schedule_velocity_lead_ms", "speed_corr_frac_limit")
_SCENARIO_KEYS = ("kind", "regime", "duration_s", "dt_s", "step_altitude_m",
                  "step_pitch_deg", "step_time_s", "settle_band_m",
                  "settle_hold_s", "gust_amplitude_n", "gust_start_s",
                  "gust_duration_s", "gust_channel", "gust_random_count",
                  "gust_random_amplitude_n", "v_profile")


def _parse_float(section, key, raw, errors):
    try:
        value = float(raw)
    except ValueError:
        errors.append(f"[{section}] {key}: cannot parse {raw!r} as a number")
        return None
    if not math.isfinite(value):
        errors.append(f"[{section}] {key}: value must be finite, got {raw}")
        return None
    return value


def _parse_int(section, key, raw, errors):
    try:
        return int(raw)
    except ValueError:
        errors.append(f"[{section}] {key}: cannot parse {raw!r} as an "
                      "integer")
        return None


def _parse_bool(section, key, raw, errors):
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    errors.append(f"[{section}] {key}: cannot parse {raw!r} as a boolean")
    return None


def _parse_gains(name, data, parse_errors):
    values = {}
    for key in _GAIN_KEYS:
        raw = data.get(key)
        if raw is None or raw.strip().lower() in ("n/a", "na"):
            values[key] = 0.0
        else:
            values[key] = _parse_float(name, key, raw, parse_errors)
    if any(v is None for v in values.values()):
        return None
    return GainSet(
        altitude=PidGains(values["kp_z"], values["ki_z"], values["kd_z"]),
        velocity=PidGains(values["kp_x"], values["ki_x"], values["kd_x"]),
        pitch=PidGains(values["kp_theta"], values["ki_theta"],
                       values["kd_theta"]))


def _parse_v_profile(section, raw, errors):
    points = []
    for item in raw.split(","):
        item = item.strip()
        if not item:
            continue
        parts = item.split(":")
        if len(parts) != 2:
            errors.append(f"[{section}] v_profile: expected 't:v' pairs, "
                          f"got {item!r}")
            return None
        t = _parse_float(section, "v_profile", parts[0], errors)
        v = _parse_float(section, "v_profile", parts[1], errors)
        if t is None or v is None:
            return None
        points.append((t, v))
    return tuple(points) if points else None


def _build_disturbance(section, data, parse_errors, seed):
    pulses = []
    amp = data.get("gust_amplitude_n")
    if amp is not None:
        a = _parse_float(section, "gust_amplitude_n", amp, parse_errors)
        t0 = _parse_float(section, "gust_start_s",
                          data.get("gust_start_s", "10"), parse_errors)
        dur = _parse_float(section, "gust_duration_s",
                           data.get("gust_duration_s", "2"), parse_errors)
        channel = data.get("gust_channel", "x").strip()
        if None not in (a, t0, dur):
            pulses.append((a, t0, dur, channel))
    n_random = data.get("gust_random_count")
    if n_random is not None:
        n = _parse_int(section, "gust_random_count", n_random, parse_errors)
        a = _parse_float(section, "gust_random_amplitude_n",
                         data.get("gust_random_amplitude_n", "5000"),
                         parse_errors)
        dur_total = _parse_float(section, "duration_s",
                                 data.get("duration_s", "50"), parse_errors)
        if None not in (n, a, dur_total):
            rng = random.Random(seed)
            for _ in range(n):
                t0 = rng.uniform(0.0, max(0.0, dur_total - 4.0))
                dur = rng.uniform(0.5, 3.0)
                channel = rng.choice(("x", "z", "pitch"))
                pulses.append((rng.uniform(-a, a), t0, dur, channel))
    if not pulses:
        return Disturbance()

    def summed(channel):
        mine = [(a, t0, d) for a, t0, d, ch in pulses if ch == channel]
        if not mine:
            return 0.0

        def f(t, mine=tuple(mine)):
            total = 0.0
            for a, t0, d in mine:
                if t0 <= t <= t0 + d:
                    total += a * math.sin(math.pi * (t - t0) / d)
            return total
        return f

    for _, _, _, ch in pulses:
        if ch not in ("x", "z", "pitch"):
            parse_errors.append(f"[{section}] gust_channel: expected one of "
                                f"x, z, pitch, got {ch!r}")
            return Disturbance()
    return Disturbance(delta_x_N=summed("x"), delta_z_N=summed("z"),
                       delta_pitch_Nm=summed("pitch"))


def config_from_dict(data: dict) -> RunConfig:
    """Build and validate a RunConfig from {section: {key: raw-string}}.

    Raises ConfigParseError for malformed values and ConfigError (listing
    every violation) for invariant failures.
    """
    parse_errors = []
    violations = []
    known = set(data.keys())

    # [run] first: the seed feeds disturbance templates
    run_sec = data.get("run", {})
    output_dir = run_sec.get("output_dir", "out")
    seed = 0
    if "seed" in run_sec:
        seed = _parse_int("run", "seed", run_sec["seed"], parse_errors) or 0
    for key in run_sec:
        if key not in ("output_dir", "seed"):
            parse_errors.append(f"[run] unknown key {key!r}")

    aircraft_kwargs = {}
    for key, raw in data.get("aircraft", {}).items():
        if key == "alpha_includes_flightpath":
            val = _parse_bool("aircraft", key, raw, parse_errors)
            if val is not None:
                aircraft_kwargs[key] = val
        elif key in _AIRCRAFT_FLOAT_KEYS:
            val = _parse_float("aircraft", key, raw, parse_errors)
            if val is not None:
                aircraft_kwargs[_AIRCRAFT_FIELD_BY_KEY.get(key, key)] = val
        else:
            parse_errors.append(f"[aircraft] unknown key {key!r}")
    lf = (aircraft_kwargs.pop("lever_front_0_m", None),
          aircraft_kwargs.pop("lever_front_90_m", None))
    lr = (aircraft_kwargs.pop("lever_rear_0_m", None),
          aircraft_kwargs.pop("lever_rear_90_m", None))
    base = AircraftConfig()
    if lf != (None, None):
        aircraft_kwargs["lever_front_m"] = (
            lf[0] if lf[0] is not None else base.lever_front_m[0],
            lf[1] if lf[1] is not None else base.lever_front_m[1])
    if lr != (None, None):
        aircraft_kwargs["lever_rear_m"] = (
            lr[0] if lr[0] is not None else base.lever_rear_m[0],
            lr[1] if lr[1] is not None else base.lever_rear_m[1])
    aircraft = replace(base, **aircraft_kwargs)

    default_sched = GainSchedule()
    heli = default_sched.heli
    fw = default_sched.fixed_wing
    if "gains.helicopter" in data:
        for key in data["gains.helicopter"]:
            if key not in _GAIN_KEYS:
                parse_errors.append(f"[gains.helicopter] unknown key "
                                    f"{key!r}")
        parsed = _parse_gains("gains.helicopter", data["gains.helicopter"],
                              parse_errors)
        heli = parsed if parsed is not None else heli
    if "gains.fixed_wing" in data:
        for key in data["gains.fixed_wing"]:
            if key not in _GAIN_KEYS:
                parse_errors.append(f"[gains.fixed_wing] unknown key "
                                    f"{key!r}")
        parsed = _parse_gains("gains.fixed_wing", data["gains.fixed_wing"],
                              parse_errors)
        fw = parsed if parsed is not None else fw

    tilt_hi = default_sched.tilt_hi_rad
    tilt_lo = default_sched.tilt_lo_rad
    for key, raw in data.get("schedule", {}).items():
        if key == "tilt_hi_deg":
            val = _parse_float("schedule", key, raw, parse_errors)
            tilt_hi = math.radians(val) if val is not None else tilt_hi
        elif key == "tilt_lo_deg":
            val = _parse_float("schedule", key, raw, parse_errors)
            tilt_lo = math.radians(val) if val is not None else tilt_lo
        else:
            parse_errors.append(f"[schedule] unknown key {key!r}")
    schedule = GainSchedule(heli=heli, fixed_wing=fw, tilt_hi_rad=tilt_hi,
                            tilt_lo_rad=tilt_lo)

    control_kwargs = {"schedule": schedule}
    for key, raw in data.get("control", {}).items():
        if key not in _CONTROL_KEYS:
            parse_errors.append(f"[control] unknown key {key!r}")
            continue
        val = _parse_float("control", key, raw, parse_errors)
        if val is None:
            continue
        if key == "tilt_rate_limit_deg_s":
            control_kwargs["tilt_rate_limit_rad_s"] = math.radians(val)
        else:
            control_kwargs[key] = val
    control = ControlParams(**control_kwargs)

    grid_kwargs = {}
    margin_frac = 0.10
    for key, raw in data.get("corridor", {}).items():
        if key in ("velocity_points", "tilt_points"):
            val = _parse_int("corridor", key, raw, parse_errors)
            if val is not None:
                grid_kwargs[key] = val
        elif key == "margin_frac":
            val = _parse_float("corridor", key, raw, parse_errors)
            if val is not None:
                margin_frac = val
        else:
            parse_errors.append(f"[corridor] unknown key {key!r}")
    grid = GridSpec(**grid_kwargs)

    scenarios = dict(_DEFAULT_SCENARIOS)
    for section in data:
        if not section.startswith("scenario."):
            if section not in ("run", "aircraft", "gains.helicopter",
                               "gains.fixed_wing", "schedule", "control",
                               "corridor"):
                parse_errors.append(f"unknown section [{section}]")
            continue
        name = section[len("scenario."):]
        sec = data[section]
        kwargs = {"name": name}
        for key, raw in sec.items():
            if key not in _SCENARIO_KEYS:
                parse_errors.append(f"[{section}] unknown key {key!r}")
            elif key in ("kind", "regime"):
                kwargs[key] = raw.strip()
            elif key == "gust_channel":
                pass  # consumed by _build_disturbance
            elif key == "v_profile":
                prof = _parse_v_profile(section, raw, parse_errors)
                if prof is not None:
                    kwargs["v_profile"] = prof
            elif key.startswith("gust_"):
                pass  # consumed by _build_disturbance
            else:
                val = _parse_float(section, key, raw, parse_errors)
                if val is not None:
                    kwargs[key] = val
        kwargs["disturbance"] = _build_disturbance(section, sec,
                                                   parse_errors, seed)
        scenarios[name] = Scenario(**kwargs)

    if parse_errors:
        raise ConfigParseError("configuration parse errors:\n  - "
                               + "\n  - ".join(parse_errors))

    violations += aircraft.validate()
    violations += control.validate()
    violations += grid.validate(aircraft)
    if not 0.0 <= margin_frac < 0.5:
        violations.append(f"[corridor] margin_frac must lie in [0, 0.5), "
                          f"got {margin_frac}")
    for name, scen in scenarios.items():
        violations += [f"[scenario.{name}] {msg}"
                       for msg in scen.validate()]
    if violations:
        raise ConfigError(violations)

    return RunConfig(aircraft=aircraft, control=control, grid=grid,
                     margin_frac=margin_frac, scenarios=scenarios,
                     output_dir=output_dir, seed=seed)


def parse_config_text(text: str) -> dict:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as err:
        raise ConfigParseError(f"configuration parse errors:\n  - {err}")
    return {name: dict(parser.items(name)) for name in parser.sections()}


def default_config_text() -> str:
    """Text of the config file shipped with the package."""
    return (resources.files("tiltsim") / "data" / "default.ini") \
        .read_text(encoding="utf-8")


def load_config(path=None) -> RunConfig:
    """Load and fully validate a run configuration.

    ``path=None`` loads the shipped default configuration.  Parse problems
    raise ConfigParseError; invariant violations raise ConfigError with an
    itemized report.
    """
    if path is None:
        text = default_config_text()
    else:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as err:
            raise ConfigParseError(f"cannot read configuration: {err}")
    return config_from_dict(parse_config_text(text))


# ----------------------------------------------------------------------
# serialization
# ----------------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if value is None:
        return "n/a"
    return str(value)


def _atomic_write(path, text):
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


_TRACE_CSV_COLUMNS = (
    ("time_s", "time_s", 1.0),
    ("x_m", "x_m", 1.0),
    ("altitude_m", "z_m", -1.0),
    ("vx_ms", "vx_ms", 1.0),
    ("vz_ms", "vz_ms", 1.0),
    ("pitch_deg", "pitch_rad", "deg"),
    ("pitch_rate_deg_s", "pitch_rate_rad_s", "deg"),
    ("tilt_deg", "tilt_rad", "deg"),
    ("tilt_rate_deg_s", "tilt_rate_rad_s", "deg"),
    ("tilt_desired_deg", "tilt_desired_rad", "deg"),
    ("tilt_rate_cmd_deg_s", "tilt_rate_cmd_rad_s", "deg"),
    ("f1_N", "f1_N", 1.0),
    ("f2_N", "f2_N", 1.0),
    ("fx_N", "fx_N", 1.0),
    ("fz_N", "fz_N", 1.0),
    ("m_pitch_Nm", "m_pitch_Nm", 1.0),
    ("w_blend", "w_blend", 1.0),
    ("v_desired_ms", "v_desired_ms", 1.0),
    ("altitude_desired_m", "z_desired_m", -1.0),
    ("pitch_desired_deg", "pitch_desired_rad", "deg"),
    ("e_x_ms", "e_x", 1.0),
    ("e_z_m", "e_z", 1.0),
    ("e_theta_deg", "e_theta", "deg"),
    ("int_e_x", "int_e_x", 1.0),
    ("int_e_z", "int_e_z", 1.0),
    ("int_e_theta", "int_e_theta", 1.0),
    ("kp_z", "kp_z", 1.0),
    ("ki_z", "ki_z", 1.0),
    ("kd_z", "kd_z", 1.0),
    ("kp_x", "kp_x", 1.0),
    ("ki_x", "ki_x", 1.0),
    ("kd_x", "kd_x", 1.0),
    ("kp_theta", "kp_theta", 1.0),
    ("ki_theta", "ki_theta", 1.0),
    ("kd_theta", "kd_theta", 1.0),
)


def write_trace_csv(trace: SimTrace, path, v_trim_ms: float = None):
    """Serialize a trace, hiding the Z-down frame (altitude = -z) and
    converting every angle to degrees."""
    if v_trim_ms is None:
        v_trim_ms = trace.meta.get("v_trim_ms", 1.0)
    buf = io.StringIO()
    buf.write(TRACE_HEADER + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    header = [name for name, _, _ in _TRACE_CSV_COLUMNS]
    header.insert(4, "v_norm")
    header += ["mode", "flags"]
    writer.writerow(header)
    cols = []
    for _, src, scale in _TRACE_CSV_COLUMNS:
        data = trace[src]
        if scale == "deg":
            cols.append(np.degrees(data))
        elif scale == 1.0:
            cols.append(data)
        else:
            cols.append(scale * data)
    v_norm = trace["vx_ms"] / v_trim_ms
    for i in range(len(trace)):
        row = [_fmt(col[i]) for col in cols]
        row.insert(4, _fmt(v_norm[i]))
        row += [trace.modes[i], trace.flags[i]]
        writer.writerow(row)
    _atomic_write(path, buf.getvalue())


def read_trace_csv(path):
    """Parse a trace CSV back into {column: ndarray-or-list}.

    Numeric columns come back as float arrays exactly equal to the
    serialized values; ``mode`` and ``flags`` stay strings.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        first = fh.readline().rstrip("\n")
        if not first.startswith("#"):
            raise ValueError(f"{path}: missing trace header comment")
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    out = {}
    for j, name in enumerate(header):
        values = [row[j] for row in rows]
        if name in ("mode", "flags"):
            out[name] = values
        else:
            out[name] = np.array([float(v) for v in values])
    return out


def write_corridor_csv(corr: Corridor, path):
    buf = io.StringIO()
    buf.write(CORRIDOR_HEADER + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["v_ms", "lower_tilt_deg", "upper_tilt_deg",
                     "schedule_tilt_deg"])
    for i, v in enumerate(corr.velocity_grid_ms):
        writer.writerow([_fmt(v),
                         _fmt(math.degrees(corr.lower_rad[i])),
                         _fmt(math.degrees(corr.upper_rad[i])),
                         _fmt(math.degrees(corr.schedule_rad[i]))])
    _atomic_write(path, buf.getvalue())


def write_summary(report: MetricReport, path, extra: dict = None):
    """Flat key = value summary, written atomically."""
    lines = [SUMMARY_HEADER]
    data = dict(report.as_dict())
    if extra:
        data.update(extra)
    for key, value in data.items():
        lines.append(f"{key} = {_fmt(value)}")
    _atomic_write(path, "\n".join(lines) + "\n")


def read_summary(path) -> dict:
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out
