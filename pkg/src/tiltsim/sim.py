"""Scenario execution: fixed-step integration of the closed loop.

A scenario couples the 3-DOF plant to the transition controller with a
classical RK4 integrator at a fixed timestep.  Controller commands are held
constant across each step (zero-order hold); the tilt axis moves at the
commanded rate and its rate change enters the plant as a reaction torque.

Three scenario kinds cover the study cases: reference steps in altitude or
pitch flown in either static mode, and the full conversion.  The conversion
run settles at hover, is then commanded to follow the corridor tilt
schedule, switches to scheduled gains once the tilt drops through the upper
threshold and hands over to static fixed-wing control below the lower one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import backend
from .airframe import (AircraftConfig, Disturbance, ForceBreakdown,
                       NO_DISTURBANCE, SimState, HALF_PI)
from .control import (AUTHORITY_EXHAUSTED, ControlCommand, ControlParams,
                      TransitionController)
from .corridor import Corridor

MODE_HELI = "HELI_STATIC"
MODE_TRANSITION = "TRANSITION_SCHEDULED"
MODE_FW = "FW_STATIC"

ALTITUDE_STEP = "altitude_step"
PITCH_STEP = "pitch_step"
TRANSITION = "transition"

_MAX_DT_S = 0.05
_AUTHORITY_FAIL_S = 1.0


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class Scenario:
    """One closed-loop experiment definition."""

    kind: str = TRANSITION
    name: str = "transition"
    regime: str = "heli"              # starting mode for step scenarios
    duration_s: float = 50.0
    dt_s: float = 0.002
    step_altitude_m: float = 100.0    # altitude_step magnitude (up positive)
    step_pitch_deg: float = 6.0       # pitch_step magnitude (nose-up)
    step_time_s: float = 5.0
    settle_band_m: float = 0.5        # transition trigger: |e_z| inside...
    settle_hold_s: float = 5.0        # ...for this long
    disturbance: Disturbance = NO_DISTURBANCE
    v_profile: tuple = None           # optional ((t, v), ...) override

    def validate(self):
        bad = []
        if self.kind not in (ALTITUDE_STEP, PITCH_STEP, TRANSITION):
            bad.append(f"unknown scenario kind {self.kind!r}")
        if self.regime not in ("heli", "fw"):
            bad.append(f"unknown scenario regime {self.regime!r}")
        if not 0.0 < self.dt_s <= _MAX_DT_S:
            bad.append(f"dt_s must lie in (0, {_MAX_DT_S}], got {self.dt_s}")
        elif self.duration_s < 10.0 * self.dt_s:
            bad.append(f"duration_s must be >= 10*dt_s, got "
                       f"{self.duration_s}")
        for name in ("step_altitude_m", "step_pitch_deg", "step_time_s"):
            if not math.isfinite(getattr(self, name)):
                bad.append(f"{name} must be finite")
        if self.v_profile is not None:
            times = [t for t, _ in self.v_profile]
            if times != sorted(times):
                bad.append("v_profile times must be non-decreasing")
        return bad

    def desired_velocity(self, t: float) -> float:
        """Piecewise-linear explicit velocity profile (when configured)."""
        pts = self.v_profile
        if t <= pts[0][0]:
            return pts[0][1]
        if t >= pts[-1][0]:
            return pts[-1][1]
        times = [p[0] for p in pts]
        values = [p[1] for p in pts]
        return float(np.interp(t, times, values))


# trace columns holding angles (converted to degrees on export)
_COLUMNS = (
    "time_s", "x_m", "z_m", "vx_ms", "vz_ms", "pitch_rad",
    "pitch_rate_rad_s", "tilt_rad", "tilt_rate_rad_s",
    "int_e_x", "int_e_z", "int_e_theta",
    "f1_N", "f2_N", "tilt_rate_cmd_rad_s",
    "fx_N", "fz_N", "m_pitch_Nm",
    "w_blend", "v_desired_ms", "z_desired_m", "pitch_desired_rad",
    "tilt_desired_rad", "e_x", "e_z", "e_theta",
    "kp_z", "ki_z", "kd_z", "kp_x", "ki_x", "kd_x",
    "kp_theta", "ki_theta", "kd_theta",
)


@dataclass
class SimTrace:
    """Column-array record of a run, one row per timestep."""

    columns: dict                  # name -> float ndarray
    modes: list                    # mode string per row
    flags: list                    # flag-token string per row ("" if none)
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.modes)

    def __getitem__(self, name):
        return self.columns[name]

    def validate(self):
        t = self.columns["time_s"]
        if len(t) >= 2:
            dt = np.diff(t)
            if not (dt > 0).all():
                raise SimulationError("trace time must be strictly "
                                      "increasing")
            if not np.allclose(dt, dt[0], rtol=0, atol=1e-9):
                raise SimulationError("trace timestep must be constant")
        return self


class _TraceBuilder:
    def __init__(self):
        self.rows = {name: [] for name in _COLUMNS}
        self.modes = []
        self.flags = []

    def append(self, state: SimState, cmd: ControlCommand,
               forces: ForceBreakdown, mode: str, out):
        r = self.rows
        r["time_s"].append(state.time_s)
        r["x_m"].append(state.x_m)
        r["z_m"].append(state.z_m)
        r["vx_ms"].append(state.vx_ms)
        r["vz_ms"].append(state.vz_ms)
        r["pitch_rad"].append(state.pitch_rad)
        r["pitch_rate_rad_s"].append(state.pitch_rate_rad_s)
        r["tilt_rad"].append(state.tilt_rad)
        r["tilt_rate_rad_s"].append(state.tilt_rate_rad_s)
        r["int_e_x"].append(state.int_e_x)
        r["int_e_z"].append(state.int_e_z)
        r["int_e_theta"].append(state.int_e_theta)
        r["f1_N"].append(cmd.f1_N)
        r["f2_N"].append(cmd.f2_N)
        r["tilt_rate_cmd_rad_s"].append(cmd.tilt_rate_cmd_rad_s)
        r["fx_N"].append(forces.fx_N)
        r["fz_N"].append(forces.fz_N)
        r["m_pitch_Nm"].append(forces.m_pitch_Nm)
        r["w_blend"].append(out.channels.blend_weight)
        r["v_desired_ms"].append(out.v_desired_ms)
        r["z_desired_m"].append(out.z_desired_m)
        r["pitch_desired_rad"].append(out.pitch_desired_rad)
        r["tilt_desired_rad"].append(out.tilt_desired_rad)
        r["e_x"].append(out.errors.e_x)
        r["e_z"].append(out.errors.e_z)
        r["e_theta"].append(out.errors.e_theta)
        g = out.gains
        r["kp_z"].append(g.altitude.kp)
        r["ki_z"].append(g.altitude.ki)
        r["kd_z"].append(g.altitude.kd)
        r["kp_x"].append(g.velocity.kp)
        r["ki_x"].append(g.velocity.ki)
        r["kd_x"].append(g.velocity.kd)
        r["kp_theta"].append(g.pitch.kp)
        r["ki_theta"].append(g.pitch.ki)
        r["kd_theta"].append(g.pitch.kd)
        self.modes.append(mode)
        self.flags.append("|".join(sorted(cmd.flags)))

    def finish(self, meta) -> SimTrace:
        cols = {name: np.asarray(vals, dtype=float)
                for name, vals in self.rows.items()}
        return SimTrace(columns=cols, modes=self.modes, flags=self.flags,
                        meta=meta).validate()


def integrate_step(state: SimState, command: ControlCommand,
                   disturbance: Disturbance, cfg: AircraftConfig,
                   dt: float, tilt_accel_rad_s2: float = None):
    """Advance the plant one RK4 step under a held command.

    The tilt-reaction torque uses the rate difference quotient across the
    step: (commanded rate - previous rate) / dt, passed in by the caller
    (defaults to a steady rate).  Returns (new_state, forces) where
    ``forces`` is the net load at the step start.  A non-finite result
    aborts with a diagnostic.
    """
    if not 0.0 < dt <= _MAX_DT_S:
        raise ValueError(f"dt must lie in (0, {_MAX_DT_S}] s, got {dt}")
    if tilt_accel_rad_s2 is None:
        tilt_accel_rad_s2 = \
            (command.tilt_rate_cmd_rad_s - state.tilt_rate_rad_s) / dt
    t = state.time_s
    d0 = disturbance.sample(t)
    dh = disturbance.sample(t + 0.5 * dt)
    d1 = disturbance.sample(t + dt)
    res = backend.kernels().rk4_plant_step(
        state.x_m, state.z_m, state.vx_ms, state.vz_ms, state.pitch_rad,
        state.pitch_rate_rad_s, state.tilt_rad,
        command.f1_N, command.f2_N, command.tilt_rate_cmd_rad_s,
        tilt_accel_rad_s2, d0 + dh + d1, cfg.packed(), dt)
    if not math.isfinite(sum(res)):
        raise SimulationError(
            f"non-finite derivative at t={t:.4f} s "
            f"(state={state}, command={command})")
    new = SimState(x_m=res[0], z_m=res[1], vx_ms=res[2], vz_ms=res[3],
                   pitch_rad=res[4], pitch_rate_rad_s=res[5],
                   tilt_rad=res[6],
                   tilt_rate_rad_s=command.tilt_rate_cmd_rad_s,
                   time_s=t + dt, int_e_z=state.int_e_z,
                   int_e_x=state.int_e_x, int_e_theta=state.int_e_theta)
    return new, ForceBreakdown(res[7], res[8], res[9])


def hover_trim_thrusts(cfg: AircraftConfig):
    """Engine-group thrusts carrying the weight with zero pitch moment.

    At tilt 90 the split follows the lever arms: F1/F2 = h/g, so the 2:1
    helicopter-mode geometry yields F1 = 2W/3, F2 = W/3.
    """
    g = cfg.lever_front(HALF_PI)
    h = cfg.lever_rear(HALF_PI)
    w = cfg.weight_n
    return w * h / (g + h), w * g / (g + h)


def hover_state(cfg: AircraftConfig) -> SimState:
    return SimState(tilt_rad=HALF_PI)


def fixed_wing_trim(cfg: AircraftConfig):
    """Level-flight trim with the rotors horizontal at zero pitch.

    Returns (v_trim, f1, f2): the speed where lift carries the weight at
    zero angle of attack, with total thrust balancing drag and the split
    cancelling the residual aerodynamic pitch moment through the
    fixed-wing lever arms.
    """
    from .corridor import fixed_wing_trim_velocity
    v = fixed_wing_trim_velocity(cfg)
    fx, fz, m_aero = backend.kernels().aero_forces(v, 0.0, 0.0, cfg.packed())
    thrust = -fx
    g0 = cfg.lever_front(0.0)
    h0 = cfg.lever_rear(0.0)
    f1 = (thrust * h0 - m_aero) / (g0 + h0)
    f2 = (thrust * g0 + m_aero) / (g0 + h0)
    if not (0.0 <= f1 <= cfg.f1_max_N and 0.0 <= f2 <= cfg.f2_max_N):
        raise SimulationError(
            f"no fixed-wing trim within engine limits: F1={f1:.0f} N, "
            f"F2={f2:.0f} N at v={v:.1f} m/s")
    return v, f1, f2


def fixed_wing_state(cfg: AircraftConfig) -> SimState:
    v, _, _ = fixed_wing_trim(cfg)
    return SimState(vx_ms=v, tilt_rad=0.0)


def run_scenario(scenario: Scenario, cfg: AircraftConfig,
                 params: ControlParams, corridor: Corridor) -> SimTrace:
    """Execute one scenario and return the full trace.

    Per step: references from the scenario phase -> tilt-rate command ->
    errors -> scheduled gains -> channel commands -> allocation -> one RK4
    plant step.  The mode machine runs forward only (helicopter ->
    scheduled transition -> fixed wing).  An authority-exhausted allocation
    persisting longer than one second marks the run failed (the corridor
    has been left); the trace still completes for diagnosis.
    """
    bad = scenario.validate() + params.validate() + cfg.validate()
    if bad:
        raise SimulationError("invalid scenario setup:\n  - "
                              + "\n  - ".join(bad))

    v_trim, _, _ = fixed_wing_trim(cfg)
    dt = scenario.dt_s
    n_steps = round(scenario.duration_s / dt)

    if scenario.kind == TRANSITION or scenario.regime == "heli":
        state = hover_state(cfg)
        mode = MODE_HELI
    else:
        state = fixed_wing_state(cfg)
        mode = MODE_FW

    controller = TransitionController(cfg, params)
    builder = _TraceBuilder()
    meta = {"scenario": scenario.name, "kind": scenario.kind,
            "dt_s": dt, "v_trim_ms": v_trim,
            "backend": backend.active_name(),
            "tilt_hi_rad": params.schedule.tilt_hi_rad,
            "tilt_lo_rad": params.schedule.tilt_lo_rad}

    transition_commanded = False
    trigger_time = None
    settle_accum = 0.0
    authority_accum = 0.0
    failed = None
    initial_tilt = state.tilt_rad
    z_cmd = 0.0
    pitch_cmd = 0.0

    for _ in range(n_steps):
        t = state.time_s

        # --- scenario references -------------------------------------
        if scenario.kind == TRANSITION:
            if not transition_commanded:
                if abs(z_cmd - state.z_m) < scenario.settle_band_m:
                    settle_accum += dt
                else:
                    settle_accum = 0.0
                if settle_accum >= scenario.settle_hold_s:
                    transition_commanded = True
                    trigger_time = t
            if transition_commanded and mode != MODE_FW:
                # track the profile ahead of the current velocity: the tilt
                # aims far enough down the schedule to cover its own slew
                # lag, the velocity pulls a short lead toward the speed the
                # commanded tilt belongs to.  Inverting the schedule at the
                # command rather than the lagging actual tilt never asks
                # for deceleration, and capping at vx + lead keeps the pull
                # consistent across schedule plateaus.
                v_probe = min(state.vx_ms + params.tilt_lead_ms,
                              float(corridor.velocity_grid_ms[-1]))
                tilt_cmd = min(corridor.schedule_tilt(v_probe),
                               state.tilt_rad)
                v_target = min(corridor.schedule_velocity_for_tilt(tilt_cmd),
                               state.vx_ms + params.velocity_lead_ms)
            elif mode == MODE_FW:
                tilt_cmd = 0.0
                v_target = v_trim
            else:
                tilt_cmd = initial_tilt
                v_target = 0.0
        else:
            stepped = t >= scenario.step_time_s
            if scenario.kind == ALTITUDE_STEP:
                z_cmd = -scenario.step_altitude_m if stepped else 0.0
            else:
                pitch_cmd = math.radians(scenario.step_pitch_deg) \
                    if stepped else 0.0
            tilt_cmd = initial_tilt
            v_target = v_trim if scenario.regime == "fw" else 0.0

        if scenario.v_profile is not None:
            v_target = scenario.desired_velocity(t)

        fw_mode = mode == MODE_FW
        out = controller.update(
            state, dt, v_target_ms=v_target, z_desired_m=z_cmd,
            pitch_desired_rad=pitch_cmd, tilt_desired_rad=tilt_cmd,
            altitude_to_speed=fw_mode, v_trim_ms=v_trim)

        # --- authority bookkeeping ------------------------------------
        if AUTHORITY_EXHAUSTED in out.command.flags:
            authority_accum += dt
            if authority_accum > _AUTHORITY_FAIL_S and failed is None:
                failed = (f"thrust authority exhausted for more than "
                          f"{_AUTHORITY_FAIL_S:.0f} s at t={t:.2f} s "
                          "(outside the conversion corridor)")
        else:
            authority_accum = 0.0

        # --- plant step ------------------------------------------------
        try:
            new_state, forces = integrate_step(
                state, out.command, scenario.disturbance, cfg, dt,
                tilt_accel_rad_s2=out.tilt_accel_rad_s2)
        except SimulationError as err:
            failed = str(err)
            builder.append(state, out.command,
                           ForceBreakdown(math.nan, math.nan, math.nan),
                           mode, out)
            break
        controller.note_accel_x(forces.fx_N / cfg.mass_kg)
        builder.append(state, out.command, forces, mode, out)
        state = new_state

        # --- mode machine (forward only) -------------------------------
        if scenario.kind == TRANSITION:
            if mode == MODE_HELI and transition_commanded \
                    and state.tilt_rad < params.schedule.tilt_hi_rad:
                mode = MODE_TRANSITION
            if mode == MODE_TRANSITION \
                    and state.tilt_rad < params.schedule.tilt_lo_rad:
                mode = MODE_FW

    meta["trigger_time_s"] = trigger_time
    meta["failed"] = failed
    return builder.finish(meta)


@dataclass
class MetricReport:
    """Scalar metrics extracted from one trace."""

    scenario: str
    kind: str
    v_trim_ms: float
    failed: str = None
    max_altitude_dev_m: float = 0.0
    max_pitch_dev_deg: float = 0.0
    peak_f1_N: float = 0.0
    peak_f2_N: float = 0.0
    thrust_within_limits: bool = True
    v_norm_final: float = 0.0
    v_norm_max: float = 0.0
    # transition metrics (None when the trace has no transition)
    trigger_time_s: float = None
    time_tilt_85_s: float = None
    time_tilt_5_s: float = None
    transition_duration_s: float = None        # 85 deg -> 5 deg
    transition_total_s: float = None           # trigger -> 5 deg
    mode_switch_discontinuity_N: float = None
    corridor_violations: int = None
    corridor_max_excursion_deg: float = None
    # step metrics (None for transition traces)
    overshoot_frac: float = None
    settling_time_2pct_s: float = None
    settled: bool = None

    def as_dict(self):
        d = {}
        for key, val in self.__dict__.items():
            d[key] = val
        return d


def normalized_velocity(trace: SimTrace, v_trim_ms: float) -> np.ndarray:
    """Velocity series normalized by the trim velocity."""
    return trace["vx_ms"] / v_trim_ms


def _crossing_time(t, tilt, threshold):
    below = np.nonzero(tilt < threshold)[0]
    return float(t[below[0]]) if below.size else None


def metrics(trace: SimTrace, v_trim_ms: float,
            corridor: Corridor = None,
            cfg: AircraftConfig = None) -> MetricReport:
    """Extract the report scalars from a trace.

    Transition metrics appear only when the trace actually transitions.
    The corridor-adherence count (requires ``corridor``) checks every
    post-trigger sample against the margined boundaries with one tilt grid
    cell of slack for boundary discretization.
    """
    if len(trace) == 0:
        raise ValueError("empty trace")
    t = trace["time_s"]
    v_norm = normalized_velocity(trace, v_trim_ms)

    report = MetricReport(
        scenario=trace.meta.get("scenario", ""),
        kind=trace.meta.get("kind", ""),
        v_trim_ms=v_trim_ms,
        failed=trace.meta.get("failed"),
        max_altitude_dev_m=float(
            np.max(np.abs(trace["z_m"] - trace["z_desired_m"]))),
        max_pitch_dev_deg=float(np.degrees(
            np.max(np.abs(trace["pitch_rad"] - trace["pitch_desired_rad"])))),
        peak_f1_N=float(np.max(trace["f1_N"])),
        peak_f2_N=float(np.max(trace["f2_N"])),
        v_norm_final=float(v_norm[-1]),
        v_norm_max=float(np.max(v_norm)),
    )
    if cfg is not None:
        report.thrust_within_limits = bool(
            (trace["f1_N"] >= 0).all() and (trace["f2_N"] >= 0).all()
            and (trace["f1_N"] <= cfg.f1_max_N + 1e-9).all()
            and (trace["f2_N"] <= cfg.f2_max_N + 1e-9).all())

    trigger = trace.meta.get("trigger_time_s")
    hi = trace.meta.get("tilt_hi_rad", math.radians(85.0))
    lo = trace.meta.get("tilt_lo_rad", math.radians(5.0))
    if trigger is not None:
        tilt = trace["tilt_rad"]
        report.trigger_time_s = trigger
        report.time_tilt_85_s = _crossing_time(t, tilt, hi)
        report.time_tilt_5_s = _crossing_time(t, tilt, lo)
        if report.time_tilt_85_s is not None \
                and report.time_tilt_5_s is not None:
            report.transition_duration_s = \
                report.time_tilt_5_s - report.time_tilt_85_s
            report.transition_total_s = report.time_tilt_5_s - trigger

        switches = [i for i in range(1, len(trace))
                    if trace.modes[i] != trace.modes[i - 1]]
        if switches:
            jumps = [max(abs(trace["f1_N"][i] - trace["f1_N"][i - 1]),
                         abs(trace["f2_N"][i] - trace["f2_N"][i - 1]))
                     for i in switches]
            report.mode_switch_discontinuity_N = float(max(jumps))

        if corridor is not None:
            sel = t >= trigger
            v = np.clip(trace["vx_ms"][sel], corridor.velocity_grid_ms[0],
                        corridor.velocity_grid_ms[-1])
            tl = tilt[sel]
            lower = np.interp(v, corridor.velocity_grid_ms,
                              corridor.lower_rad)
            upper = np.interp(v, corridor.velocity_grid_ms,
                              corridor.upper_rad)
            slack = corridor.tilt_cell_rad()
            excess = np.maximum(lower - slack - tl, tl - upper - slack)
            report.corridor_violations = int(np.count_nonzero(excess > 0))
            report.corridor_max_excursion_deg = float(
                math.degrees(max(0.0, float(np.max(excess)))))

    kind = trace.meta.get("kind")
    if kind in (ALTITUDE_STEP, PITCH_STEP):
        if kind == ALTITUDE_STEP:
            y = -trace["z_m"]
            ref = -trace["z_desired_m"]
        else:
            y = np.degrees(trace["pitch_rad"])
            ref = np.degrees(trace["pitch_desired_rad"])
        stepped = np.nonzero(ref != ref[0])[0]
        if stepped.size:
            i0 = stepped[0]
            y0, y1 = ref[0], ref[i0]
            span = y1 - y0
            seg = y[i0:]
            report.overshoot_frac = float(
                (np.max(np.sign(span) * (seg - y1))) / abs(span))
            band = 0.02 * abs(span)
            outside = np.nonzero(np.abs(seg - y1) > band)[0]
            if outside.size == 0:
                report.settling_time_2pct_s = 0.0
                report.settled = True
            elif outside[-1] + 1 < len(seg):
                report.settling_time_2pct_s = float(
                    t[i0 + outside[-1] + 1] - t[i0])
                report.settled = True
            else:
                report.settling_time_2pct_s = None
                report.settled = False
    return report
