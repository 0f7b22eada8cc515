"""Deterministic 3-DOF tiltrotor flight dynamics and transition control.

The package simulates a large tiltrotor converting between helicopter and
fixed-wing flight: a longitudinal force model, the conversion corridor over
(velocity, tilt), a gain-scheduled PID controller with closed-form thrust
allocation onto two engine groups, and fixed-step closed-loop scenarios
with metric extraction.  The numerical core runs either as a compiled
extension or in pure Python (see :mod:`tiltsim.backend`).
"""

from .airframe import (AircraftConfig, ConfigError, Disturbance,
                       ForceBreakdown, G0, SimState, aero_forces,
                       thrust_forces, tilt_reaction, total_forces)
from .backend import active_name as backend_name
from .control import (ControlCommand, ControlParams, ErrorState,
                      FIXED_WING_GAINS, GainSchedule, GainSet,
                      HELICOPTER_GAINS, PidGains, TransitionController,
                      allocate_thrust, channel_commands, compute_errors,
                      pid_accel, routh_check, schedule_gains,
                      tilt_rate_command)
from .corridor import (Corridor, CorridorError, GridSpec, build_corridor,
                       fixed_wing_trim_velocity, power_required,
                       stall_feasible, tilt_schedule)
from .runio import (ConfigParseError, RunConfig, load_config,
                    read_trace_csv, write_corridor_csv, write_summary,
                    write_trace_csv)
from .sim import (MetricReport, Scenario, SimTrace, SimulationError,
                  fixed_wing_trim, hover_trim_thrusts, integrate_step,
                  metrics, run_scenario)

__version__ = "0.1.0"
