"""Gain-scheduled PID transition control and engine-group thrust allocation.

The controller regulates altitude, forward velocity and pitch with one PID
channel each.  Channel outputs are commanded accelerations; multiplying by
mass / inertia and subtracting the known aerodynamic and tilt-reaction loads
turns them into two aggregate thrust requirements:

* ``C_theta``   - the net thrust pitch moment, and
* ``C_z_xdot``  - the combined altitude / velocity demand, carried as
  ``T * g * h / (g + h)`` so the closed-form allocation below returns the
  blended total thrust ``T``.

Allocation onto the front and rear engine groups inverts exactly:

    F1 = C_z_xdot / g(tau) + C_theta / (g(tau) + h(tau))
    F2 = C_z_xdot / h(tau) - C_theta / (g(tau) + h(tau))

Altitude and velocity both act through total thrust, so their demands are
blended by a tilt-dependent weight: pure altitude control in helicopter
mode, pure velocity control in fixed-wing mode, linear in between.  Gains
interpolate between the helicopter and fixed-wing sets over the same tilt
interval.  Every gain triple must satisfy the Routh-Hurwitz conditions for
the closed-loop cubic  lambda^3 + kd lambda^2 + kp lambda + ki.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .airframe import (AircraftConfig, ForceBreakdown, SimState, G0,
                       HALF_PI, aero_forces)

STABLE = "stable"
MARGINAL = "marginal"
UNSTABLE = "unstable"

# saturation / guard flag tokens
F1_MAX = "f1_max"
F1_MIN = "f1_min"
F2_MAX = "f2_max"
F2_MIN = "f2_min"
AUTHORITY_EXHAUSTED = "authority_exhausted"
Z_GUARD = "z_guard"          # vertical channel divided by ~zero sin
X_GUARD = "x_guard"          # forward channel divided by ~zero cos
X_ERR_CLAMP = "x_err_clamp"  # velocity error limited
Z_REF_CLAMP = "z_ref_clamp"  # altitude-to-speed correction limited
THRUST_FLOOR = "thrust_floor"  # total demand below the idle floor
TILT_RATE_LIMIT = "tilt_rate_limit"


@dataclass(frozen=True)
class PidGains:
    kp: float
    ki: float
    kd: float

    def is_zero(self) -> bool:
        return self.kp == 0.0 and self.ki == 0.0 and self.kd == 0.0


@dataclass(frozen=True)
class GainSet:
    """PID gains for the altitude, velocity and pitch channels."""

    altitude: PidGains
    velocity: PidGains
    pitch: PidGains

    def validate(self, label: str = "", velocity_required: bool = True):
        bad = []
        for name in ("altitude", "velocity", "pitch"):
            g = getattr(self, name)
            if g.kp < 0 or g.ki < 0 or g.kd < 0:
                bad.append(f"{label}{name} gains must be non-negative: {g}")
                continue
            if name == "velocity" and not velocity_required and g.is_zero():
                continue   # channel disabled (helicopter mode)
            if routh_check(g.kp, g.ki, g.kd) != STABLE:
                bad.append(f"{label}{name} gains fail the Routh-Hurwitz "
                           f"stability conditions: kp={g.kp}, ki={g.ki}, "
                           f"kd={g.kd}")
        return bad


# control gains of the two static flight modes
HELICOPTER_GAINS = GainSet(altitude=PidGains(0.07, 0.003, 0.7),
                           velocity=PidGains(0.0, 0.0, 0.0),
                           pitch=PidGains(0.29, 0.0018, 0.5))
FIXED_WING_GAINS = GainSet(altitude=PidGains(0.31, 0.052, 0.72),
                           velocity=PidGains(1.1, 0.5, 0.7),
                           pitch=PidGains(0.6, 0.08, 0.6))


@dataclass(frozen=True)
class GainSchedule:
    """Endpoint gain sets and the tilt interval they interpolate across.

    Above ``tilt_hi_rad`` the helicopter set applies unchanged (and the
    velocity channel has zero blend weight); below ``tilt_lo_rad`` the
    fixed-wing set applies.
    """

    heli: GainSet = HELICOPTER_GAINS
    fixed_wing: GainSet = FIXED_WING_GAINS
    tilt_hi_rad: float = math.radians(85.0)
    tilt_lo_rad: float = math.radians(5.0)

    def validate(self):
        bad = []
        if not 0.0 <= self.tilt_lo_rad < self.tilt_hi_rad <= HALF_PI:
            bad.append("gain-schedule thresholds must satisfy "
                       "0 <= tilt_lo < tilt_hi <= 90 deg, got "
                       f"lo={math.degrees(self.tilt_lo_rad):.2f}, "
                       f"hi={math.degrees(self.tilt_hi_rad):.2f}")
        bad += self.heli.validate("helicopter ", velocity_required=False)
        bad += self.fixed_wing.validate("fixed-wing ", velocity_required=True)
        return bad

    def weight(self, tilt_rad: float) -> float:
        """Blend weight w(tau): 1 = altitude channel, 0 = velocity."""
        w = ((tilt_rad - self.tilt_lo_rad)
             / (self.tilt_hi_rad - self.tilt_lo_rad))
        return min(1.0, max(0.0, w))


@dataclass(frozen=True)
class ErrorState:
    """Tracking errors with their integrals and derivatives.

    With constant references the derivative entries are the negated state
    derivatives: d(e_x)/dt = -accel_x, d(e_z)/dt = -vz,
    d(e_theta)/dt = -pitch rate.
    """

    e_x: float
    e_z: float
    e_theta: float
    int_e_x: float
    int_e_z: float
    int_e_theta: float
    dot_e_x: float
    dot_e_z: float
    dot_e_theta: float


@dataclass(frozen=True)
class ControlCommand:
    f1_N: float
    f2_N: float
    tilt_rate_cmd_rad_s: float
    flags: frozenset = frozenset()


@dataclass(frozen=True)
class ChannelCommands:
    """Aggregate thrust requirements plus per-channel diagnostics."""

    c_z_plus_xdot_Nm: float
    c_theta_Nm: float
    thrust_total_N: float
    thrust_altitude_N: float    # vertical-channel requirement T_z
    thrust_velocity_N: float    # forward-channel requirement T_x
    blend_weight: float
    flags: frozenset = frozenset()


def compute_errors(state: SimState, v_desired_ms: float,
                   z_desired_m: float = 0.0, pitch_desired_rad: float = 0.0,
                   accel_x_ms2: float = 0.0) -> ErrorState:
    """Reference-minus-measured errors for the three channels.

    The velocity channel is first order, so its derivative needs the
    longitudinal acceleration; the caller supplies the most recent value
    (net X force over mass).
    """
    if not state.is_finite():
        raise ValueError("non-finite simulation state")
    return ErrorState(e_x=v_desired_ms - state.vx_ms,
                      e_z=z_desired_m - state.z_m,
                      e_theta=pitch_desired_rad - state.pitch_rad,
                      int_e_x=state.int_e_x,
                      int_e_z=state.int_e_z,
                      int_e_theta=state.int_e_theta,
                      dot_e_x=-accel_x_ms2,
                      dot_e_z=-state.vz_ms,
                      dot_e_theta=-state.pitch_rate_rad_s)


def pid_accel(e: float, e_int: float, e_dot: float,
              gains: PidGains) -> float:
    """Commanded acceleration kp*e + ki*int(e) + kd*de/dt."""
    return gains.kp * e + gains.ki * e_int + gains.kd * e_dot


def routh_check(kp: float, ki: float, kd: float) -> str:
    """Routh-Hurwitz verdict for lambda^3 + kd lambda^2 + kp lambda + ki.

    Stable requires kd, kp, ki > 0 and kd*kp > ki.  The boundary cases
    kd*kp == ki (all positive) and ki == 0 (kd, kp > 0) are marginal;
    everything else is unstable.
    """
    if kd > 0.0 and kp > 0.0:
        if ki > 0.0 and kd * kp > ki:
            return STABLE
        if ki == 0.0 or (ki > 0.0 and kd * kp == ki):
            return MARGINAL
    return UNSTABLE


def _lerp_gains(a: PidGains, b: PidGains, w: float) -> PidGains:
    """w = 1 -> a, w = 0 -> b."""
    return PidGains(kp=w * a.kp + (1.0 - w) * b.kp,
                    ki=w * a.ki + (1.0 - w) * b.ki,
                    kd=w * a.kd + (1.0 - w) * b.kd)


def schedule_gains(tilt_rad: float, schedule: GainSchedule) -> GainSet:
    """Per-gain linear interpolation between the two static sets."""
    if not 0.0 <= tilt_rad <= HALF_PI + 1e-12:
        raise ValueError(f"tilt angle outside [0, pi/2]: {tilt_rad}")
    w = schedule.weight(tilt_rad)
    if w == 1.0:
        return schedule.heli
    if w == 0.0:
        return schedule.fixed_wing
    return GainSet(
        altitude=_lerp_gains(schedule.heli.altitude,
                             schedule.fixed_wing.altitude, w),
        velocity=_lerp_gains(schedule.heli.velocity,
                             schedule.fixed_wing.velocity, w),
        pitch=_lerp_gains(schedule.heli.pitch,
                          schedule.fixed_wing.pitch, w))


def channel_commands(state: SimState, errors: ErrorState, gains: GainSet,
                     tilt_rad: float, cfg: AircraftConfig,
                     disturbance_estimate=(0.0, 0.0, 0.0), *,
                     schedule: GainSchedule = None,
                     tilt_accel_rad_s2: float = 0.0,
                     aero: ForceBreakdown = None,
                     guard_eps: float = 0.05,
                     thrust_floor_N: float = 0.0,
                     fallback_t_z: float = 0.0,
                     fallback_t_x: float = 0.0) -> ChannelCommands:
    """Aggregate thrust requirements from the three PID channels.

    * pitch: net thrust moment C_theta = J*u_theta - M_aero - J_r*tau_ddot,
    * altitude: total thrust T_z = (W + F_LZ - M*u_z) / sin(theta + tau),
    * velocity: total thrust T_x = (D + M*u_x) / cos(theta + tau),

    blended as T = w * T_z + (1 - w) * T_x with the schedule weight w(tau).
    Either projection denominator smaller than ``guard_eps`` makes that
    channel fall back to its last valid value and raises a guard flag.  The
    disturbance estimate defaults to zero: the controller is blind to the
    disturbance acting on the plant unless an estimator feeds it.
    """
    if schedule is None:
        schedule = GainSchedule()
    if aero is None:
        aero = aero_forces(state, cfg)
    d_x, d_z, d_m = disturbance_estimate

    u_z = pid_accel(errors.e_z, errors.int_e_z, errors.dot_e_z,
                    gains.altitude)
    u_x = pid_accel(errors.e_x, errors.int_e_x, errors.dot_e_x,
                    gains.velocity)
    u_th = pid_accel(errors.e_theta, errors.int_e_theta, errors.dot_e_theta,
                     gains.pitch)

    c_theta = (cfg.inertia_pitch_kgm2 * u_th - aero.m_pitch_Nm
               - cfg.rotor_inertia_kgm2 * tilt_accel_rad_s2 - d_m)

    ang = state.pitch_rad + tilt_rad
    sin_a = math.sin(ang)
    cos_a = math.cos(ang)
    flags = set()

    if abs(sin_a) < guard_eps:
        t_z = fallback_t_z
        flags.add(Z_GUARD)
    else:
        t_z = (cfg.weight_n + aero.fz_N - cfg.mass_kg * u_z - d_z) / sin_a

    if abs(cos_a) < guard_eps:
        t_x = fallback_t_x
        flags.add(X_GUARD)
    else:
        t_x = (cfg.mass_kg * u_x - aero.fx_N - d_x) / cos_a

    w = schedule.weight(tilt_rad)
    thrust = w * t_z + (1.0 - w) * t_x
    if thrust < thrust_floor_N:
        # engines never shut down in flight; holding an idle floor also
        # preserves differential-thrust pitch authority under decel demands
        thrust = thrust_floor_N
        flags.add(THRUST_FLOOR)
    g = cfg.lever_front(tilt_rad)
    h = cfg.lever_rear(tilt_rad)
    c_z_xdot = thrust * g * h / (g + h)

    return ChannelCommands(c_z_plus_xdot_Nm=c_z_xdot, c_theta_Nm=c_theta,
                           thrust_total_N=thrust, thrust_altitude_N=t_z,
                           thrust_velocity_N=t_x, blend_weight=w,
                           flags=frozenset(flags))


def allocate_thrust(c_z_plus_xdot_Nm: float, c_theta_Nm: float,
                    tilt_rad: float, cfg: AircraftConfig):
    """Closed-form split of the aggregate demands onto the engine groups.

    Before clamping, F1*g - F2*h == c_theta and
    (F1 + F2)*g*h/(g + h) == c_z_plus_xdot hold exactly.  Each group is then
    clamped to [0, max] with a flag per limit; both groups clamped at once
    flags the allocation as authority-exhausted.

    Returns (f1_N, f2_N, flags).
    """
    g = cfg.lever_front(tilt_rad)
    h = cfg.lever_rear(tilt_rad)
    if g <= 0.0 or h <= 0.0:
        raise ValueError(f"lever arms must be positive: g={g}, h={h}")
    f1 = c_z_plus_xdot_Nm / g + c_theta_Nm / (g + h)
    f2 = c_z_plus_xdot_Nm / h - c_theta_Nm / (g + h)

    flags = set()
    if f1 < 0.0:
        f1 = 0.0
        flags.add(F1_MIN)
    elif f1 > cfg.f1_max_N:
        f1 = cfg.f1_max_N
        flags.add(F1_MAX)
    if f2 < 0.0:
        f2 = 0.0
        flags.add(F2_MIN)
    elif f2 > cfg.f2_max_N:
        f2 = cfg.f2_max_N
        flags.add(F2_MAX)
    if len(flags) == 2:
        flags.add(AUTHORITY_EXHAUSTED)
    return f1, f2, frozenset(flags)


def tilt_rate_command(tilt_rad: float, tilt_desired_rad: float,
                      k_tau: float, rate_limit_rad_s: float) -> float:
    """Proportional tilt-rate command, clamped to the actuator limit."""
    if k_tau <= 0.0:
        raise ValueError(f"k_tau must be > 0, got {k_tau}")
    rate = k_tau * (tilt_desired_rad - tilt_rad)
    return min(rate_limit_rad_s, max(-rate_limit_rad_s, rate))


@dataclass(frozen=True)
class ControlParams:
    """Controller configuration beyond the PID gain schedule."""

    schedule: GainSchedule = field(default_factory=GainSchedule)
    tilt_k_tau: float = 1.0                   # 1/s
    tilt_rate_limit_rad_s: float = math.radians(12.0)
    guard_eps: float = 0.05                   # sin/cos projection floor
    velocity_error_limit_ms: float = 15.0     # velocity-channel error clamp
    velocity_ref_slew_ms2: float = 8.0        # desired-velocity slew rate
    tilt_lead_ms: float = 18.0                # tilt aims here ahead on the
                                              # schedule (covers slew lag)
    velocity_lead_ms: float = 8.0             # velocity pull ahead of vx
    speed_corr_frac_limit: float = 0.08       # altitude-to-speed authority
    thrust_floor_N: float = 4000.0            # idle floor on total demand
    integral_limit_z: float = 150.0           # accumulator clamps (windup)
    integral_limit_x: float = 6.0
    integral_limit_theta: float = 30.0

    def validate(self):
        bad = list(self.schedule.validate())
        if self.tilt_k_tau <= 0:
            bad.append(f"tilt_k_tau must be > 0, got {self.tilt_k_tau}")
        if self.tilt_rate_limit_rad_s <= 0:
            bad.append("tilt_rate_limit must be > 0, got "
                       f"{self.tilt_rate_limit_rad_s}")
        if not 0.0 < self.guard_eps < 0.5:
            bad.append(f"guard_eps must lie in (0, 0.5), got "
                       f"{self.guard_eps}")
        for name in ("velocity_error_limit_ms", "velocity_ref_slew_ms2",
                     "tilt_lead_ms", "velocity_lead_ms", "integral_limit_z",
                     "integral_limit_x", "integral_limit_theta"):
            if getattr(self, name) < 0:
                bad.append(f"{name} must be >= 0, got "
                           f"{getattr(self, name)}")
        if not 0.0 <= self.speed_corr_frac_limit <= 1.0:
            bad.append("speed_corr_frac_limit must lie in [0, 1], got "
                       f"{self.speed_corr_frac_limit}")
        if self.thrust_floor_N < 0:
            bad.append(f"thrust_floor_N must be >= 0, got "
                       f"{self.thrust_floor_N}")
        return bad


@dataclass
class ControllerOutput:
    command: ControlCommand
    errors: ErrorState
    gains: GainSet
    channels: ChannelCommands
    v_desired_ms: float
    z_desired_m: float
    pitch_desired_rad: float
    tilt_desired_rad: float
    tilt_accel_rad_s2: float


class TransitionController:
    """Stateful wrapper advancing the control law one timestep at a time.

    Holds the pieces that outlive a single step: the integrator anti-windup
    logic, the last valid channel values behind the projection guards, the
    previous tilt rate (for the reaction-torque feedforward) and the slewed
    velocity reference.  One instance drives one run; distinct instances may
    run in parallel scenarios.
    """

    def __init__(self, cfg: AircraftConfig, params: ControlParams):
        self.cfg = cfg
        self.params = params
        self.prev_tilt_rate = 0.0
        self.prev_accel_x = 0.0
        self.fallback_t_z = 0.0
        self.fallback_t_x = 0.0
        self.v_ref_ms = None

    def fixed_wing_speed_correction(self, errors: ErrorState,
                                    gains: GainSet, v_trim_ms: float):
        """Altitude-to-speed cascade for fixed-wing flight.

        With the rotors horizontal, thrust has no vertical authority; lift,
        proportional to speed squared, determines height.  The altitude PID
        output u_z (a commanded vertical acceleration) is converted into the
        speed giving the required lift, W - M*u_z, and returned as a clamped
        correction to the trim speed.
        """
        u_z = pid_accel(errors.e_z, errors.int_e_z, errors.dot_e_z,
                        gains.altitude)
        lift_ratio = max(0.0, 1.0 - u_z / G0)
        dv = v_trim_ms * (math.sqrt(lift_ratio) - 1.0)
        limit = self.params.speed_corr_frac_limit * v_trim_ms
        clamped = min(limit, max(-limit, dv))
        return clamped, clamped != dv

    def update(self, state: SimState, dt: float, *, v_target_ms: float,
               z_desired_m: float = 0.0, pitch_desired_rad: float = 0.0,
               tilt_desired_rad: float, altitude_to_speed: bool = False,
               v_trim_ms: float = 0.0) -> ControllerOutput:
        """One control step: references -> errors -> channels -> allocation.

        Mutates the integrator accumulators on ``state`` (with conditional
        integration while any saturation or clamp is active) and the
        controller's own memory.
        """
        p = self.params
        flags = set()

        # tilt command first: its rate change feeds the reaction torque
        # forward into the pitch channel for exact cancellation
        rate_cmd = tilt_rate_command(state.tilt_rad, tilt_desired_rad,
                                     p.tilt_k_tau, p.tilt_rate_limit_rad_s)
        if abs(rate_cmd) >= p.tilt_rate_limit_rad_s:
            flags.add(TILT_RATE_LIMIT)
        tilt_accel = (rate_cmd - self.prev_tilt_rate) / dt

        # velocity reference: slew toward the target, then apply the
        # fixed-wing altitude-to-speed correction on top
        gains = schedule_gains(state.tilt_rad, p.schedule)
        if self.v_ref_ms is None:
            self.v_ref_ms = state.vx_ms
        max_dv = p.velocity_ref_slew_ms2 * dt
        self.v_ref_ms += min(max_dv, max(-max_dv,
                                         v_target_ms - self.v_ref_ms))
        v_des = self.v_ref_ms
        speed_corr_clamped = False
        if altitude_to_speed:
            base_errors = compute_errors(state, v_des, z_desired_m,
                                         pitch_desired_rad,
                                         self.prev_accel_x)
            dv, speed_corr_clamped = self.fixed_wing_speed_correction(
                base_errors, gains, v_trim_ms)
            v_des = v_des + dv
            if speed_corr_clamped:
                flags.add(Z_REF_CLAMP)

        errors = compute_errors(state, v_des, z_desired_m,
                                pitch_desired_rad, self.prev_accel_x)

        # clamp the velocity error so schedule plateaus cannot demand
        # accelerations far beyond the thrust authority
        lim = p.velocity_error_limit_ms
        e_x_clamped = min(lim, max(-lim, errors.e_x))
        if e_x_clamped != errors.e_x:
            flags.add(X_ERR_CLAMP)
            errors = replace(errors, e_x=e_x_clamped)

        channels = channel_commands(
            state, errors, gains, state.tilt_rad, self.cfg,
            schedule=p.schedule, tilt_accel_rad_s2=tilt_accel,
            guard_eps=p.guard_eps, thrust_floor_N=p.thrust_floor_N,
            fallback_t_z=self.fallback_t_z, fallback_t_x=self.fallback_t_x)
        flags |= channels.flags
        if Z_GUARD not in channels.flags:
            self.fallback_t_z = channels.thrust_altitude_N
        if X_GUARD not in channels.flags:
            self.fallback_t_x = channels.thrust_velocity_N

        f1, f2, alloc_flags = allocate_thrust(
            channels.c_z_plus_xdot_Nm, channels.c_theta_Nm,
            state.tilt_rad, self.cfg)
        flags |= alloc_flags

        # conditional integration: freeze everything while the engines are
        # clamped, and the individual channel while its own path is limited
        engines_clamped = bool(alloc_flags)
        w = channels.blend_weight
        floored = THRUST_FLOOR in channels.flags
        freeze_z = engines_clamped or (Z_GUARD in flags and w > 0.0) \
            or (floored and w > 0.0) \
            or (altitude_to_speed and speed_corr_clamped)
        freeze_x = engines_clamped or (X_GUARD in flags and w < 1.0) \
            or (floored and w < 1.0) or X_ERR_CLAMP in flags
        freeze_th = engines_clamped
        if not freeze_z:
            lim = p.integral_limit_z
            state.int_e_z = min(lim, max(-lim,
                                         state.int_e_z + errors.e_z * dt))
        if not freeze_x:
            lim = p.integral_limit_x
            state.int_e_x = min(lim, max(-lim,
                                         state.int_e_x + errors.e_x * dt))
        if not freeze_th:
            lim = p.integral_limit_theta
            state.int_e_theta = min(
                lim, max(-lim, state.int_e_theta + errors.e_theta * dt))

        self.prev_tilt_rate = rate_cmd
        command = ControlCommand(f1_N=f1, f2_N=f2,
                                 tilt_rate_cmd_rad_s=rate_cmd,
                                 flags=frozenset(flags))
        return ControllerOutput(command=command, errors=errors, gains=gains,
                                channels=channels, v_desired_ms=v_des,
                                z_desired_m=z_desired_m,
                                pitch_desired_rad=pitch_desired_rad,
                                tilt_desired_rad=tilt_desired_rad,
                                tilt_accel_rad_s2=tilt_accel)

    def note_accel_x(self, accel_x_ms2: float):
        """Record the realized longitudinal acceleration for the next
        velocity-channel derivative."""
        self.prev_accel_x = accel_x_ms2
