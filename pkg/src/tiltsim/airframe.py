"""Longitudinal force/moment model of a large tilting-rotor aircraft.

Everything lives in the vertical X-Z plane.  Conventions:

* Z is positive DOWN, so weight enters as +W and altitude is ``-z``.
* Pitch ``theta`` is nose-up positive.
* Tilt ``tau`` is the rotor-axis angle from the body X axis: ``pi/2`` is
  helicopter mode (thrust up), ``0`` is fixed-wing mode (thrust forward).
* The four wing-mounted engines form the front group (thrust F1), the two
  tail engines the rear group (F2).  The front group's thrust ceiling is
  twice the rear group's; in helicopter mode the rear lever arm is twice the
  front one, so a 2:1 thrust split hovers with zero pitch moment.

Net loads are the sum of aerodynamic lift/drag, rotated engine thrust, the
reaction torque of the tilting rotor assemblies, weight, and an optional
external disturbance.  The functions here are pure and safe to call from any
number of concurrent scenario evaluations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from . import backend

G0 = 9.80665  # standard gravity, m/s^2
HALF_PI = math.pi / 2.0

_DEFAULT_MASS_KG = 12_000.0
_DEFAULT_WEIGHT_N = _DEFAULT_MASS_KG * G0


class ConfigError(ValueError):
    """Raised when a configuration violates a physical invariant.

    ``violations`` lists every violated invariant, not just the first.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid configuration:\n  - "
                         + "\n  - ".join(self.violations))


@dataclass(frozen=True)
class AircraftConfig:
    """Constant physical and geometric parameters of the aircraft.

    Defaults describe the 12-tonne six-engine study configuration: 26 m
    span, aspect-ratio-12 wing, disk loading 130 kg/m^2, total thrust
    ceiling of 1.5x weight split 2:1 between the engine groups.
    """

    mass_kg: float = _DEFAULT_MASS_KG
    inertia_pitch_kgm2: float = 150_000.0   # J, about the CG
    rotor_inertia_kgm2: float = 800.0       # J_r, tilt axis of one group

    wing_area_m2: float = 26.0 * 26.0 / 12.0   # span^2 / aspect ratio
    tail_area_m2: float = 14.0
    x_wing_m: float = 1.0       # wing centre of pressure ahead of CG
    x_tail_m: float = 7.0       # tail centre of pressure behind CG
    y_drag_m: float = 0.5       # drag centre above CG (+ gives nose-up)

    # engine-group moment arms g(tau), h(tau): (value at tilt 0, at tilt 90)
    lever_front_m: tuple = (1.0, 2.0)
    lever_rear_m: tuple = (1.0, 4.0)

    f1_max_N: float = _DEFAULT_WEIGHT_N          # front group ceiling
    f2_max_N: float = _DEFAULT_WEIGHT_N / 2.0    # rear group ceiling
    p_max_W: float = 6.0e6                       # installed shaft power

    wing_cl0: float = 0.50
    wing_cl_alpha_per_rad: float = 5.2
    wing_cl_max: float = 1.6
    wing_cd0: float = 0.025
    wing_induced_drag_k: float = 0.033

    tail_cl0: float = 0.29
    tail_cl_alpha_per_rad: float = 4.0
    tail_cl_max: float = 1.2
    tail_cd0: float = 0.015
    tail_induced_drag_k: float = 0.07

    rho_kg_m3: float = 1.225
    v_max_ms: float = 125.0          # structural / whirl-flutter cap
    disk_loading_kg_m2: float = 130.0
    alpha_includes_flightpath: bool = False

    @property
    def weight_n(self) -> float:
        return self.mass_kg * G0

    @property
    def disk_area_m2(self) -> float:
        """Total rotor disk area implied by the design disk loading."""
        return self.mass_kg / self.disk_loading_kg_m2

    @property
    def thrust_total_max_n(self) -> float:
        return self.f1_max_N + self.f2_max_N

    def lever_front(self, tilt_rad: float) -> float:
        """Front-group moment arm g(tau), linear between the endpoints."""
        g0, g90 = self.lever_front_m
        return g0 + (g90 - g0) * (tilt_rad / HALF_PI)

    def lever_rear(self, tilt_rad: float) -> float:
        """Rear-group moment arm h(tau), linear between the endpoints."""
        h0, h90 = self.lever_rear_m
        return h0 + (h90 - h0) * (tilt_rad / HALF_PI)

    def packed(self) -> tuple:
        """Flat float tuple consumed by the numerical kernels."""
        return (self.mass_kg, self.weight_n, self.inertia_pitch_kgm2,
                self.rotor_inertia_kgm2, self.rho_kg_m3,
                self.wing_area_m2, self.wing_cl0, self.wing_cl_alpha_per_rad,
                self.wing_cl_max, self.wing_cd0, self.wing_induced_drag_k,
                self.tail_area_m2, self.tail_cl0, self.tail_cl_alpha_per_rad,
                self.tail_cl_max, self.tail_cd0, self.tail_induced_drag_k,
                self.x_wing_m, self.x_tail_m, self.y_drag_m,
                self.lever_front_m[0], self.lever_front_m[1],
                self.lever_rear_m[0], self.lever_rear_m[1],
                1.0 if self.alpha_includes_flightpath else 0.0)

    def validate(self) -> list:
        """Collects every violated invariant (empty list when valid)."""
        bad = []
        if not self.mass_kg > 0:
            bad.append(f"mass_kg must be > 0, got {self.mass_kg}")
        if not self.inertia_pitch_kgm2 > 0:
            bad.append("inertia_pitch_kgm2 must be > 0, got "
                       f"{self.inertia_pitch_kgm2}")
        if self.rotor_inertia_kgm2 < 0:
            bad.append("rotor_inertia_kgm2 must be >= 0, got "
                       f"{self.rotor_inertia_kgm2}")
        for name in ("wing_area_m2", "tail_area_m2", "rho_kg_m3", "p_max_W",
                     "v_max_ms", "disk_loading_kg_m2"):
            if not getattr(self, name) > 0:
                bad.append(f"{name} must be > 0, got {getattr(self, name)}")
        rel = abs(self.f1_max_N - 2.0 * self.f2_max_N)
        if rel > 1e-9 * max(self.f1_max_N, 1.0):
            bad.append("front group ceiling must be exactly twice the rear "
                       f"group: f1_max_N={self.f1_max_N}, "
                       f"f2_max_N={self.f2_max_N}")
        g90 = self.lever_front_m[1]
        h90 = self.lever_rear_m[1]
        if abs(h90 - 2.0 * g90) > 1e-9 * max(abs(h90), 1.0):
            bad.append("helicopter-mode rear lever must be twice the front "
                       f"lever: h(90)={h90}, g(90)={g90}")
        # linear in tilt, so positivity at the endpoints covers [0, 90]
        if min(self.lever_front_m) <= 0:
            bad.append(f"front lever must stay > 0: {self.lever_front_m}")
        if min(self.lever_rear_m) <= 0:
            bad.append(f"rear lever must stay > 0: {self.lever_rear_m}")
        if self.thrust_total_max_n < 1.5 * self.weight_n - 1e-9:
            bad.append("total max thrust must be >= 1.5x weight: "
                       f"{self.thrust_total_max_n:.1f} N available, "
                       f"{1.5 * self.weight_n:.1f} N required")
        return bad

    def ensure_valid(self) -> "AircraftConfig":
        bad = self.validate()
        if bad:
            raise ConfigError(bad)
        return self


@dataclass
class SimState:
    """Kinematic state plus tilt state and controller integrators.

    ``z_m`` is positive down; altitude above the reference is ``-z_m``.
    The integrator accumulators belong to the closed-loop state so a trace
    row fully determines the next step.
    """

    x_m: float = 0.0
    z_m: float = 0.0
    vx_ms: float = 0.0
    vz_ms: float = 0.0
    pitch_rad: float = 0.0
    pitch_rate_rad_s: float = 0.0
    tilt_rad: float = HALF_PI
    tilt_rate_rad_s: float = 0.0
    time_s: float = 0.0
    int_e_z: float = 0.0
    int_e_x: float = 0.0
    int_e_theta: float = 0.0

    def is_finite(self) -> bool:
        return math.isfinite(self.x_m + self.z_m + self.vx_ms + self.vz_ms
                             + self.pitch_rad + self.pitch_rate_rad_s
                             + self.tilt_rad + self.tilt_rate_rad_s
                             + self.time_s + self.int_e_z + self.int_e_x
                             + self.int_e_theta)

    def copy(self) -> "SimState":
        return replace(self)


@dataclass(frozen=True)
class ForceBreakdown:
    """X force, Z force and pitch moment (N, N, N*m)."""

    fx_N: float
    fz_N: float
    m_pitch_Nm: float

    def __add__(self, other):
        return ForceBreakdown(self.fx_N + other.fx_N,
                              self.fz_N + other.fz_N,
                              self.m_pitch_Nm + other.m_pitch_Nm)


def _const(value):
    return lambda t: value


@dataclass(frozen=True)
class Disturbance:
    """Time-indexed external force/moment terms, zero by default.

    Each channel accepts a constant or a callable of time.  ``gust`` builds
    the half-sine force-pulse template used for robustness probing.
    """

    delta_x_N: object = 0.0
    delta_z_N: object = 0.0
    delta_pitch_Nm: object = 0.0

    def sample(self, t: float) -> tuple:
        dx = self.delta_x_N(t) if callable(self.delta_x_N) else self.delta_x_N
        dz = self.delta_z_N(t) if callable(self.delta_z_N) else self.delta_z_N
        dm = (self.delta_pitch_Nm(t) if callable(self.delta_pitch_Nm)
              else self.delta_pitch_Nm)
        return (dx, dz, dm)

    def is_zero(self) -> bool:
        return self.delta_x_N == 0.0 and self.delta_z_N == 0.0 \
            and self.delta_pitch_Nm == 0.0

    @staticmethod
    def gust(amplitude_N: float, start_s: float, duration_s: float,
             channel: str = "x") -> "Disturbance":
        """Half-sine pulse of the given peak force on one channel."""
        if channel not in ("x", "z", "pitch"):
            raise ValueError(f"unknown gust channel {channel!r}")

        def pulse(t, a=amplitude_N, t0=start_s, dur=duration_s):
            if t < t0 or t > t0 + dur:
                return 0.0
            return a * math.sin(math.pi * (t - t0) / dur)

        kw = {"x": "delta_x_N", "z": "delta_z_N",
              "pitch": "delta_pitch_Nm"}[channel]
        return Disturbance(**{kw: pulse})


NO_DISTURBANCE = Disturbance()


def _check_state(state: SimState):
    if not state.is_finite():
        raise ValueError("non-finite simulation state")


def aero_forces(state: SimState, cfg: AircraftConfig) -> ForceBreakdown:
    """Lift, drag and aerodynamic pitch moment of wing and tail.

    Angle of attack equals the pitch angle (zero-flightpath-angle
    assumption) unless ``cfg.alpha_includes_flightpath`` is set.  Lift uses
    the linear CL(alpha) polar clamped at cl_max; drag is the parabolic
    polar, applied per surface and summed, opposing horizontal motion.
    Returns (-D, -(L_w + L_t), L_w*X_w - L_t*X_t + D*Y_D) for forward
    flight.
    """
    _check_state(state)
    k = backend.kernels()
    fx, fz, m = k.aero_forces(state.vx_ms, state.vz_ms, state.pitch_rad,
                              cfg.packed())
    return ForceBreakdown(fx, fz, m)


def thrust_forces(f1_N: float, f2_N: float, pitch_rad: float,
                  tilt_rad: float, cfg: AircraftConfig) -> ForceBreakdown:
    """Thrust of both engine groups rotated by pitch + tilt.

    Returns ((F1+F2)cos(theta+tau), -(F1+F2)sin(theta+tau),
    F1*g(tau) - F2*h(tau)).  Thrust must be non-negative.
    """
    if f1_N < 0.0 or f2_N < 0.0:
        raise ValueError(f"engine thrust must be non-negative, got "
                         f"F1={f1_N}, F2={f2_N}")
    if not 0.0 <= tilt_rad <= HALF_PI + 1e-12:
        raise ValueError(f"tilt angle outside [0, pi/2]: {tilt_rad}")
    k = backend.kernels()
    fx, fz, m = k.thrust_forces(f1_N, f2_N, pitch_rad, tilt_rad, cfg.packed())
    return ForceBreakdown(fx, fz, m)


def tilt_reaction(tilt_accel_rad_s2: float,
                  cfg: AircraftConfig) -> ForceBreakdown:
    """Reaction torque J_r * tau_ddot from tilting the rotor assemblies."""
    if not math.isfinite(tilt_accel_rad_s2):
        raise ValueError("non-finite tilt acceleration")
    return ForceBreakdown(0.0, 0.0, cfg.rotor_inertia_kgm2 * tilt_accel_rad_s2)


def total_forces(state: SimState, f1_N: float, f2_N: float,
                 tilt_accel_rad_s2: float, disturbance: Disturbance,
                 cfg: AircraftConfig) -> ForceBreakdown:
    """Net force/moment: aero + thrust + tilt reaction + weight + delta.

    Components are summed in that fixed order so results are reproducible
    bit-for-bit.
    """
    _check_state(state)
    if f1_N < 0.0 or f2_N < 0.0:
        raise ValueError(f"engine thrust must be non-negative, got "
                         f"F1={f1_N}, F2={f2_N}")
    dx, dz, dm = disturbance.sample(state.time_s)
    k = backend.kernels()
    fx, fz, m = k.total_forces(state.vx_ms, state.vz_ms, state.pitch_rad,
                               state.tilt_rad, f1_N, f2_N, tilt_accel_rad_s2,
                               dx, dz, dm, cfg.packed())
    return ForceBreakdown(fx, fz, m)
