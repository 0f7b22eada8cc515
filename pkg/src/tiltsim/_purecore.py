"""Pure-Python hot kernels: force model evaluation and the RK4 plant step.

These functions are the reference implementation of the numerical core.  A
compiled twin (``tiltsim._fastcore``, built from Cython) provides the same
functions with identical argument order and identical arithmetic; the active
implementation is chosen in :mod:`tiltsim.backend`.

All kernels take plain floats plus a packed parameter tuple (see
``AircraftConfig.packed``) so they stay allocation-free in the inner loop.
Angles are radians, forces Newtons, Z positive down.

Packed parameter layout (index: meaning):
    0 mass, 1 weight, 2 pitch inertia, 3 rotor tilt inertia, 4 air density,
    5 wing area, 6 wing cl0, 7 wing cl_alpha, 8 wing cl_max, 9 wing cd0,
    10 wing induced k,
    11 tail area, 12 tail cl0, 13 tail cl_alpha, 14 tail cl_max, 15 tail cd0,
    16 tail induced k,
    17 x_wing, 18 x_tail, 19 y_drag,
    20 front lever at tilt 0, 21 front lever at tilt 90,
    22 rear lever at tilt 0, 23 rear lever at tilt 90,
    24 alpha-from-flightpath flag (0.0 or 1.0)
"""

import math

BACKEND_NAME = "pure"

_HALF_PI = math.pi / 2.0


def lever_front(tilt, p):
    """Front engine-group moment arm g(tau), linear in tilt."""
    return p[20] + (p[21] - p[20]) * (tilt / _HALF_PI)


def lever_rear(tilt, p):
    """Rear engine-group moment arm h(tau), linear in tilt."""
    return p[22] + (p[23] - p[22]) * (tilt / _HALF_PI)


def aero_forces(vx, vz, pitch, p):
    """Wing/tail lift, drag and pitch moment -> (fx, fz, m).

    Lift per surface uses a linear CL(alpha) clamped symmetrically at cl_max;
    drag per surface is the parabolic polar cd0 + k*CL^2.  Angle of attack is
    the pitch angle (zero-flightpath-angle assumption) unless the packed flag
    asks for the flightpath correction.  Drag opposes the direction of
    horizontal motion so rearward flight stays bounded.
    """
    v2 = vx * vx + vz * vz
    if v2 == 0.0:
        return (0.0, 0.0, 0.0)
    alpha = pitch
    if p[24] != 0.0:
        alpha = pitch - math.atan2(-vz, vx)
    q = 0.5 * p[4] * v2

    cl_w = p[6] + p[7] * alpha
    if cl_w > p[8]:
        cl_w = p[8]
    elif cl_w < -p[8]:
        cl_w = -p[8]
    lift_w = q * p[5] * cl_w

    cl_t = p[12] + p[13] * alpha
    if cl_t > p[14]:
        cl_t = p[14]
    elif cl_t < -p[14]:
        cl_t = -p[14]
    lift_t = q * p[11] * cl_t

    drag = q * (p[5] * (p[9] + p[10] * cl_w * cl_w)
                + p[11] * (p[15] + p[16] * cl_t * cl_t))
    s = 1.0 if vx >= 0.0 else -1.0
    return (-s * drag,
            -(lift_w + lift_t),
            lift_w * p[17] - lift_t * p[18] + s * drag * p[19])


def thrust_forces(f1, f2, pitch, tilt, p):
    """Engine-group thrust rotated by pitch + tilt -> (fx, fz, m)."""
    total = f1 + f2
    ang = pitch + tilt
    g = lever_front(tilt, p)
    h = lever_rear(tilt, p)
    return (total * math.cos(ang), -total * math.sin(ang), f1 * g - f2 * h)


def tilt_reaction(tilt_accel, p):
    """Adverse body torque from accelerating the rotor tilt axis."""
    return (0.0, 0.0, p[3] * tilt_accel)


def total_forces(vx, vz, pitch, tilt, f1, f2, tilt_accel, dx, dz, dm, p):
    """Net (fx, fz, m): aero + thrust + tilt reaction + weight + disturbance.

    The summation order is fixed (aero, thrust, reaction, weight,
    disturbance) so traces are bit-reproducible.
    """
    ax, az, am = aero_forces(vx, vz, pitch, p)
    tx, tz, tm = thrust_forces(f1, f2, pitch, tilt, p)
    rm = p[3] * tilt_accel
    fx = ax + tx + 0.0 + 0.0 + dx
    fz = az + tz + 0.0 + p[1] + dz
    m = am + tm + rm + 0.0 + dm
    return (fx, fz, m)


def _derivatives(x, z, vx, vz, pitch, q, tilt,
                 f1, f2, tilt_rate, tilt_accel, dx, dz, dm, p):
    fx, fz, m = total_forces(vx, vz, pitch, tilt, f1, f2, tilt_accel,
                             dx, dz, dm, p)
    return (vx, vz, fx / p[0], fz / p[0], q, m / p[2], tilt_rate)


def rk4_plant_step(x, z, vx, vz, pitch, q, tilt,
                   f1, f2, tilt_rate, tilt_accel, dist, p, dt):
    """One classical RK4 step of the closed 3-DOF plant.

    Thrusts, tilt rate and the tilt-acceleration reaction term are held
    constant across the step (zero-order hold of the controller command);
    ``dist`` carries the disturbance sampled at the step start, midpoint and
    end as 9 floats (dx, dz, dm at each substep time).

    Returns a 10-tuple: the new state (x, z, vx, vz, pitch, pitch_rate,
    tilt) with the tilt clamped to [0, pi/2], followed by the net
    (fx, fz, m) evaluated at the step start.
    """
    d0x, d0z, d0m, dhx, dhz, dhm, d1x, d1z, d1m = dist
    half = 0.5 * dt

    fx0, fz0, m0 = total_forces(vx, vz, pitch, tilt, f1, f2, tilt_accel,
                                d0x, d0z, d0m, p)
    a1 = (vx, vz, fx0 / p[0], fz0 / p[0], q, m0 / p[2], tilt_rate)
    a2 = _derivatives(x + half * a1[0], z + half * a1[1],
                      vx + half * a1[2], vz + half * a1[3],
                      pitch + half * a1[4], q + half * a1[5],
                      tilt + half * a1[6],
                      f1, f2, tilt_rate, tilt_accel, dhx, dhz, dhm, p)
    a3 = _derivatives(x + half * a2[0], z + half * a2[1],
                      vx + half * a2[2], vz + half * a2[3],
                      pitch + half * a2[4], q + half * a2[5],
                      tilt + half * a2[6],
                      f1, f2, tilt_rate, tilt_accel, dhx, dhz, dhm, p)
    a4 = _derivatives(x + dt * a3[0], z + dt * a3[1],
                      vx + dt * a3[2], vz + dt * a3[3],
                      pitch + dt * a3[4], q + dt * a3[5],
                      tilt + dt * a3[6],
                      f1, f2, tilt_rate, tilt_accel, d1x, d1z, d1m, p)

    sixth = dt / 6.0
    new_tilt = tilt + sixth * (a1[6] + 2.0 * a2[6] + 2.0 * a3[6] + a4[6])
    if new_tilt < 0.0:
        new_tilt = 0.0
    elif new_tilt > _HALF_PI:
        new_tilt = _HALF_PI
    return (x + sixth * (a1[0] + 2.0 * a2[0] + 2.0 * a3[0] + a4[0]),
            z + sixth * (a1[1] + 2.0 * a2[1] + 2.0 * a3[1] + a4[1]),
            vx + sixth * (a1[2] + 2.0 * a2[2] + 2.0 * a3[2] + a4[2]),
            vz + sixth * (a1[3] + 2.0 * a2[3] + 2.0 * a3[3] + a4[3]),
            pitch + sixth * (a1[4] + 2.0 * a2[4] + 2.0 * a3[4] + a4[4]),
            q + sixth * (a1[5] + 2.0 * a2[5] + 2.0 * a3[5] + a4[5]),
            new_tilt, fx0, fz0, m0)
