"""Conversion corridor over (forward velocity, rotor tilt angle).

The corridor is the region where equilibrium flight is sustainable while the
rotors convert between helicopter and fixed-wing orientation.  Three
constraints bound it:

* wing stall: maximum vertical thrust plus best-case lift must carry the
  weight,
* power: the shaft power needed to hold the minimum stall-satisfying thrust
  must fit under the installed ceiling,
* a structural / whirl-flutter velocity cap.

Lift in the envelope check uses the stall-clamped lift coefficient (the best
the wing can do), and the power check momentum theory: P = T * (axial inflow
+ hover induced velocity).  Boundaries are extracted per velocity column,
shrunk by a configurable safety margin, and a desired tilt schedule is laid
along the midline, pinned to pi/2 at v = 0 and to 0 at the fixed-wing trim
velocity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .airframe import AircraftConfig, HALF_PI


class CorridorError(ValueError):
    """Corridor construction failed (configuration cannot convert)."""


@dataclass(frozen=True)
class GridSpec:
    """Sampling grid for corridor construction (30+ points per axis)."""

    velocity_points: int = 126
    tilt_points: int = 181
    pitch_rad: float = 0.0

    def validate(self, cfg: AircraftConfig) -> list:
        bad = []
        if self.velocity_points < 50:
            bad.append(f"velocity_points must be >= 50, "
                       f"got {self.velocity_points}")
        if self.tilt_points < 50:
            bad.append(f"tilt_points must be >= 50, got {self.tilt_points}")
        return bad


def max_lift_available(v_ms: float, cfg: AircraftConfig) -> float:
    """Lift of wing plus tail at their stall-clamped lift coefficients."""
    q = 0.5 * cfg.rho_kg_m3 * v_ms * v_ms
    return q * (cfg.wing_area_m2 * cfg.wing_cl_max
                + cfg.tail_area_m2 * cfg.tail_cl_max)


def stall_feasible(v_ms: float, tilt_rad: float, pitch_rad: float,
                   cfg: AircraftConfig) -> bool:
    """True when max vertical thrust plus best-case lift carries the weight.

    Vertical thrust is (f1_max + f2_max) * sin(pitch + tilt), floored at
    zero because thrust cannot pull the aircraft down.
    """
    if v_ms < 0.0:
        raise ValueError(f"velocity must be >= 0, got {v_ms}")
    if not 0.0 <= tilt_rad <= HALF_PI + 1e-12:
        raise ValueError(f"tilt angle outside [0, pi/2]: {tilt_rad}")
    vertical_thrust = cfg.thrust_total_max_n * max(
        0.0, math.sin(pitch_rad + tilt_rad))
    return vertical_thrust + max_lift_available(v_ms, cfg) >= cfg.weight_n


def min_thrust_for_stall(v_ms: float, tilt_rad: float, pitch_rad: float,
                         cfg: AircraftConfig) -> float:
    """Smallest total thrust whose vertical component closes the lift
    deficit; 0 when lift alone suffices, inf when the geometry cannot."""
    deficit = cfg.weight_n - max_lift_available(v_ms, cfg)
    if deficit <= 0.0:
        return 0.0
    s = math.sin(pitch_rad + tilt_rad)
    if s <= 0.0:
        return math.inf
    return deficit / s


def power_required(v_ms: float, tilt_rad: float, pitch_rad: float,
                   thrust_N: float, cfg: AircraftConfig) -> float:
    """Momentum-theory shaft power to hold ``thrust_N`` at this condition.

    P = T * (V_axial + v_h) with V_axial = v * sin(pitch + tilt) the inflow
    along the rotor axis and v_h = sqrt(T / (2 rho A_disk)) the hover
    induced velocity from the total disk area.
    """
    if thrust_N < 0.0:
        raise ValueError(f"thrust must be >= 0, got {thrust_N}")
    if thrust_N == 0.0:
        return 0.0
    v_axial = v_ms * math.sin(pitch_rad + tilt_rad)
    v_h = math.sqrt(thrust_N / (2.0 * cfg.rho_kg_m3 * cfg.disk_area_m2))
    return thrust_N * v_axial + thrust_N * v_h


def fixed_wing_trim_velocity(cfg: AircraftConfig) -> float:
    """Level-flight speed at zero angle of attack (lift equals weight)."""
    coeff_area = (cfg.wing_area_m2 * cfg.wing_cl0
                  + cfg.tail_area_m2 * cfg.tail_cl0)
    if coeff_area <= 0.0:
        raise CorridorError(["zero-alpha lift coefficient is not positive; "
                             "no fixed-wing trim speed exists"])
    return math.sqrt(2.0 * cfg.weight_n / (cfg.rho_kg_m3 * coeff_area))


@dataclass(frozen=True)
class Corridor:
    """Sampled conversion corridor with margined boundaries and schedule.

    ``feasible[i, j]`` refers to ``velocity_grid_ms[i]`` and
    ``tilt_grid_rad[j]``.  Boundary arrays give, per velocity, the margined
    feasible tilt interval; ``schedule_rad`` is the desired tilt laid along
    its midline, pinned to pi/2 at v = 0 and to 0 from the fixed-wing trim
    velocity on.
    """

    velocity_grid_ms: np.ndarray
    tilt_grid_rad: np.ndarray
    feasible: np.ndarray
    lower_raw_rad: np.ndarray
    upper_raw_rad: np.ndarray
    lower_rad: np.ndarray
    upper_rad: np.ndarray
    schedule_rad: np.ndarray
    margin_frac: float
    pitch_rad: float
    fixed_wing_trim_ms: float

    def _check_range(self, v_ms: float):
        if not (self.velocity_grid_ms[0] <= v_ms
                <= self.velocity_grid_ms[-1]):
            raise ValueError(
                f"velocity {v_ms} m/s outside corridor grid "
                f"[{self.velocity_grid_ms[0]}, {self.velocity_grid_ms[-1]}]")

    def boundary_lower_tilt(self, v_ms: float) -> float:
        self._check_range(v_ms)
        return float(np.interp(v_ms, self.velocity_grid_ms, self.lower_rad))

    def boundary_upper_tilt(self, v_ms: float) -> float:
        self._check_range(v_ms)
        return float(np.interp(v_ms, self.velocity_grid_ms, self.upper_rad))

    def schedule_tilt(self, v_ms: float) -> float:
        self._check_range(v_ms)
        return float(np.interp(v_ms, self.velocity_grid_ms,
                               self.schedule_rad))

    def schedule_velocity_for_tilt(self, tilt_rad: float) -> float:
        """Inverse of the schedule: the velocity at which the schedule
        comes down to ``tilt_rad``.

        Plateaus resolve to their fast edge so the returned velocity always
        pulls the conversion forward, except the terminal plateau (the
        schedule floor, normally zero tilt) which resolves to the velocity
        where the floor is first reached - the fixed-wing trim point, not
        the velocity cap.
        """
        s = self.schedule_rad
        v = self.velocity_grid_ms
        if tilt_rad >= s[0]:
            return float(v[0])
        if tilt_rad <= s[-1]:
            return float(v[np.argmax(s == s[-1])])
        idx = np.nonzero(s >= tilt_rad)[0]
        i = int(idx[-1])
        v0, v1 = v[i], v[i + 1]
        s0, s1 = s[i], s[i + 1]
        if s0 == s1:
            return float(v1)
        return float(v0 + (v1 - v0) * (s0 - tilt_rad) / (s0 - s1))

    def contains(self, v_ms: float, tilt_rad: float,
                 slack_rad: float = 0.0) -> bool:
        lo = self.boundary_lower_tilt(v_ms)
        hi = self.boundary_upper_tilt(v_ms)
        return lo - slack_rad <= tilt_rad <= hi + slack_rad

    def tilt_cell_rad(self) -> float:
        return float(self.tilt_grid_rad[1] - self.tilt_grid_rad[0])

    def feasible_fraction(self) -> float:
        return float(np.count_nonzero(self.feasible) / self.feasible.size)


def build_corridor(cfg: AircraftConfig, grid: GridSpec = None,
                   margin_frac: float = 0.10) -> Corridor:
    """Samples the constraints and extracts margined boundaries.

    A cell is feasible when the stall check passes, the power needed at the
    *minimum* stall-satisfying thrust fits under the ceiling, and the
    velocity is below the cap.  Per velocity the feasible tilts must form
    one contiguous interval.  The safety margin shrinks each constraint
    boundary toward the interval midpoint by ``margin_frac`` of the interval
    width; interval ends sitting on the grid edges (hover at tilt 90, the
    fixed-wing trim point at tilt 0) are operating modes rather than
    constraint boundaries and keep their place inside the margin.
    """
    cfg.ensure_valid()
    if grid is None:
        grid = GridSpec()
    bad = grid.validate(cfg)
    if not 0.0 <= margin_frac < 0.5:
        bad.append(f"margin_frac must lie in [0, 0.5), got {margin_frac}")
    if bad:
        raise CorridorError(bad)

    v = np.linspace(0.0, cfg.v_max_ms, grid.velocity_points)
    tilt = np.linspace(0.0, HALF_PI, grid.tilt_points)

    sin_ang = np.sin(grid.pitch_rad + tilt)                     # (nt,)
    lift_max = (0.5 * cfg.rho_kg_m3 * v * v
                * (cfg.wing_area_m2 * cfg.wing_cl_max
                   + cfg.tail_area_m2 * cfg.tail_cl_max))       # (nv,)
    vertical_max = cfg.thrust_total_max_n * np.maximum(sin_ang, 0.0)
    stall_ok = vertical_max[None, :] + lift_max[:, None] >= cfg.weight_n

    deficit = cfg.weight_n - lift_max                           # (nv,)
    with np.errstate(divide="ignore", invalid="ignore"):
        t_min = np.where(deficit[:, None] <= 0.0, 0.0,
                         np.where(sin_ang[None, :] > 0.0,
                                  deficit[:, None] / sin_ang[None, :],
                                  np.inf))
        v_h = np.sqrt(t_min / (2.0 * cfg.rho_kg_m3 * cfg.disk_area_m2))
        power = t_min * (v[:, None] * sin_ang[None, :]) + t_min * v_h
    power_ok = np.where(t_min == 0.0, True, power <= cfg.p_max_W)

    feasible = stall_ok & power_ok & (v[:, None] <= cfg.v_max_ms)

    if not feasible[0].any():
        raise CorridorError(
            ["no feasible tilt at v = 0: the aircraft cannot hover "
             "(check thrust ceilings and installed power)"])

    n_v = len(v)
    lower_raw = np.empty(n_v)
    upper_raw = np.empty(n_v)
    problems = []
    for i in range(n_v):
        idx = np.nonzero(feasible[i])[0]
        if idx.size == 0:
            problems.append(f"no feasible tilt at v = {v[i]:.2f} m/s; the "
                            "corridor is disconnected")
            lower_raw[i] = np.nan
            upper_raw[i] = np.nan
            continue
        if idx[-1] - idx[0] + 1 != idx.size:
            problems.append(f"feasible tilt set at v = {v[i]:.2f} m/s is "
                            "not a contiguous interval")
        lower_raw[i] = tilt[idx[0]]
        upper_raw[i] = tilt[idx[-1]]
    if problems:
        raise CorridorError(problems)

    width = upper_raw - lower_raw
    lower = np.where(lower_raw == tilt[0], lower_raw,
                     lower_raw + margin_frac * width)
    upper = np.where(upper_raw == tilt[-1], upper_raw,
                     upper_raw - margin_frac * width)

    v_ft = fixed_wing_trim_velocity(cfg)
    schedule = 0.5 * (lower + upper)
    # terminal descent: past the knee where the stall boundary reaches zero
    # tilt the midline no longer falls, so ramp the schedule linearly into
    # the fixed-wing trim point instead - the commanded tilt then reaches
    # zero continuously, at a rate the tilt actuator can track
    knee = np.nonzero(lower_raw <= tilt[0] + 1e-12)[0]
    if knee.size and 0.0 < v[knee[0]] < v_ft:
        i_knee = int(knee[0])
        slope = schedule[i_knee] / (v_ft - v[i_knee])
        cone = np.maximum(0.0, slope * (v_ft - v))
        schedule = np.minimum(schedule, np.maximum(cone, lower))
    schedule[0] = HALF_PI
    schedule[v >= v_ft] = 0.0
    np.minimum.accumulate(schedule, out=schedule)   # keep non-increasing

    inside = (schedule >= lower - 1e-12) & (schedule <= upper + 1e-12)
    if not inside.all():
        i = int(np.nonzero(~inside)[0][0])
        raise CorridorError(
            [f"tilt schedule leaves the margined corridor at "
             f"v = {v[i]:.2f} m/s (schedule "
             f"{math.degrees(schedule[i]):.2f} deg, interval "
             f"[{math.degrees(lower[i]):.2f}, "
             f"{math.degrees(upper[i]):.2f}] deg)"])

    return Corridor(velocity_grid_ms=v, tilt_grid_rad=tilt,
                    feasible=feasible, lower_raw_rad=lower_raw,
                    upper_raw_rad=upper_raw, lower_rad=lower,
                    upper_rad=upper, schedule_rad=schedule,
                    margin_frac=margin_frac, pitch_rad=grid.pitch_rad,
                    fixed_wing_trim_ms=v_ft)


def tilt_schedule(corridor: Corridor, v_ms: float) -> float:
    """Desired tilt for a forward velocity (midline of the margined
    corridor, pinned to pi/2 at v = 0 and 0 at the fixed-wing trim speed)."""
    return corridor.schedule_tilt(v_ms)
