# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twin of the pure-Python kernels in ``_purecore``.

Same functions, same argument order, same arithmetic (compiled with FP
contraction off so results match the pure backend bit for bit).  Keep the
two files in sync; the backend parity tests compare them step by step.
"""

from libc.math cimport atan2, cos, sin, sqrt

BACKEND_NAME = "fast"

cdef double _HALF_PI = 1.5707963267948966


cdef struct Params:
    double mass, weight, inertia, rotor_inertia, rho
    double sw, cl0w, claw, clmaxw, cd0w, kw
    double st, cl0t, clat, clmaxt, cd0t, kt
    double xw, xt, yd
    double g0, g90, h0, h90
    double alpha_mode


cdef inline Params _unpack(tuple p):
    cdef Params c
    c.mass = p[0]; c.weight = p[1]; c.inertia = p[2]
    c.rotor_inertia = p[3]; c.rho = p[4]
    c.sw = p[5]; c.cl0w = p[6]; c.claw = p[7]; c.clmaxw = p[8]
    c.cd0w = p[9]; c.kw = p[10]
    c.st = p[11]; c.cl0t = p[12]; c.clat = p[13]; c.clmaxt = p[14]
    c.cd0t = p[15]; c.kt = p[16]
    c.xw = p[17]; c.xt = p[18]; c.yd = p[19]
    c.g0 = p[20]; c.g90 = p[21]; c.h0 = p[22]; c.h90 = p[23]
    c.alpha_mode = p[24]
    return c


cdef inline void _aero(double vx, double vz, double pitch, Params* c,
                       double* fx, double* fz, double* m) nogil:
    cdef double v2 = vx * vx + vz * vz
    cdef double alpha, q, cl_w, cl_t, lift_w, lift_t, drag, s
    if v2 == 0.0:
        fx[0] = 0.0; fz[0] = 0.0; m[0] = 0.0
        return
    alpha = pitch
    if c.alpha_mode != 0.0:
        alpha = pitch - atan2(-vz, vx)
    q = 0.5 * c.rho * v2

    cl_w = c.cl0w + c.claw * alpha
    if cl_w > c.clmaxw:
        cl_w = c.clmaxw
    elif cl_w < -c.clmaxw:
        cl_w = -c.clmaxw
    lift_w = q * c.sw * cl_w

    cl_t = c.cl0t + c.clat * alpha
    if cl_t > c.clmaxt:
        cl_t = c.clmaxt
    elif cl_t < -c.clmaxt:
        cl_t = -c.clmaxt
    lift_t = q * c.st * cl_t

    drag = q * (c.sw * (c.cd0w + c.kw * cl_w * cl_w)
                + c.st * (c.cd0t + c.kt * cl_t * cl_t))
    s = 1.0 if vx >= 0.0 else -1.0
    fx[0] = -s * drag
    fz[0] = -(lift_w + lift_t)
    m[0] = lift_w * c.xw - lift_t * c.xt + s * drag * c.yd


cdef inline double _lever_front(double tilt, Params* c) nogil:
    return c.g0 + (c.g90 - c.g0) * (tilt / _HALF_PI)


cdef inline double _lever_rear(double tilt, Params* c) nogil:
    return c.h0 + (c.h90 - c.h0) * (tilt / _HALF_PI)


cdef inline void _thrust(double f1, double f2, double pitch, double tilt,
                         Params* c, double* fx, double* fz,
                         double* m) nogil:
    cdef double total = f1 + f2
    cdef double ang = pitch + tilt
    fx[0] = total * cos(ang)
    fz[0] = -total * sin(ang)
    m[0] = f1 * _lever_front(tilt, c) - f2 * _lever_rear(tilt, c)


cdef inline void _total(double vx, double vz, double pitch, double tilt,
                        double f1, double f2, double tilt_accel,
                        double dx, double dz, double dm, Params* c,
                        double* fx, double* fz, double* m) nogil:
    cdef double ax, az, am, tx, tz, tm, rm
    _aero(vx, vz, pitch, c, &ax, &az, &am)
    _thrust(f1, f2, pitch, tilt, c, &tx, &tz, &tm)
    rm = c.rotor_inertia * tilt_accel
    fx[0] = ax + tx + 0.0 + 0.0 + dx
    fz[0] = az + tz + 0.0 + c.weight + dz
    m[0] = am + tm + rm + 0.0 + dm


cdef inline void _deriv(double* y, double tilt_rate, double f1, double f2,
                        double tilt_accel, double dx, double dz, double dm,
                        Params* c, double* out) nogil:
    cdef double fx, fz, m
    _total(y[2], y[3], y[4], y[6], f1, f2, tilt_accel, dx, dz, dm,
           c, &fx, &fz, &m)
    out[0] = y[2]
    out[1] = y[3]
    out[2] = fx / c.mass
    out[3] = fz / c.mass
    out[4] = y[5]
    out[5] = m / c.inertia
    out[6] = tilt_rate


def lever_front(double tilt, tuple p):
    """Front engine-group moment arm g(tau), linear in tilt."""
    cdef Params c = _unpack(p)
    return _lever_front(tilt, &c)


def lever_rear(double tilt, tuple p):
    """Rear engine-group moment arm h(tau), linear in tilt."""
    cdef Params c = _unpack(p)
    return _lever_rear(tilt, &c)


def aero_forces(double vx, double vz, double pitch, tuple p):
    """Wing/tail lift, drag and pitch moment -> (fx, fz, m)."""
    cdef Params c = _unpack(p)
    cdef double fx, fz, m
    _aero(vx, vz, pitch, &c, &fx, &fz, &m)
    return (fx, fz, m)


def thrust_forces(double f1, double f2, double pitch, double tilt, tuple p):
    """Engine-group thrust rotated by pitch + tilt -> (fx, fz, m)."""
    cdef Params c = _unpack(p)
    cdef double fx, fz, m
    _thrust(f1, f2, pitch, tilt, &c, &fx, &fz, &m)
    return (fx, fz, m)


def tilt_reaction(double tilt_accel, tuple p):
    """Adverse body torque from accelerating the rotor tilt axis."""
    cdef Params c = _unpack(p)
    return (0.0, 0.0, c.rotor_inertia * tilt_accel)


def total_forces(double vx, double vz, double pitch, double tilt,
                 double f1, double f2, double tilt_accel,
                 double dx, double dz, double dm, tuple p):
    """Net (fx, fz, m): aero + thrust + tilt reaction + weight +
    disturbance, summed in that fixed order."""
    cdef Params c = _unpack(p)
    cdef double fx, fz, m
    _total(vx, vz, pitch, tilt, f1, f2, tilt_accel, dx, dz, dm,
           &c, &fx, &fz, &m)
    return (fx, fz, m)


def rk4_plant_step(double x, double z, double vx, double vz, double pitch,
                   double q, double tilt, double f1, double f2,
                   double tilt_rate, double tilt_accel, tuple dist,
                   tuple p, double dt):
    """One classical RK4 step of the closed 3-DOF plant.

    Mirrors the pure-Python kernel: returns the new 7-tuple state plus the
    net (fx, fz, m) evaluated at the step start.
    """
    cdef Params c = _unpack(p)
    cdef double d0x = dist[0], d0z = dist[1], d0m = dist[2]
    cdef double dhx = dist[3], dhz = dist[4], dhm = dist[5]
    cdef double d1x = dist[6], d1z = dist[7], d1m = dist[8]
    cdef double half = 0.5 * dt
    cdef double sixth = dt / 6.0
    cdef double y[7]
    cdef double ys[7]
    cdef double a1[7]
    cdef double a2[7]
    cdef double a3[7]
    cdef double a4[7]
    cdef double fx0, fz0, m0
    cdef double new_tilt
    cdef int i

    y[0] = x; y[1] = z; y[2] = vx; y[3] = vz
    y[4] = pitch; y[5] = q; y[6] = tilt

    _total(vx, vz, pitch, tilt, f1, f2, tilt_accel, d0x, d0z, d0m,
           &c, &fx0, &fz0, &m0)
    a1[0] = vx; a1[1] = vz; a1[2] = fx0 / c.mass; a1[3] = fz0 / c.mass
    a1[4] = q; a1[5] = m0 / c.inertia; a1[6] = tilt_rate
    for i in range(7):
        ys[i] = y[i] + half * a1[i]
    _deriv(ys, tilt_rate, f1, f2, tilt_accel, dhx, dhz, dhm, &c, a2)
    for i in range(7):
        ys[i] = y[i] + half * a2[i]
    _deriv(ys, tilt_rate, f1, f2, tilt_accel, dhx, dhz, dhm, &c, a3)
    for i in range(7):
        ys[i] = y[i] + dt * a3[i]
    _deriv(ys, tilt_rate, f1, f2, tilt_accel, d1x, d1z, d1m, &c, a4)

    new_tilt = y[6] + sixth * (a1[6] + 2.0 * a2[6] + 2.0 * a3[6] + a4[6])
    if new_tilt < 0.0:
        new_tilt = 0.0
    elif new_tilt > _HALF_PI:
        new_tilt = _HALF_PI

    return (y[0] + sixth * (a1[0] + 2.0 * a2[0] + 2.0 * a3[0] + a4[0]),
            y[1] + sixth * (a1[1] + 2.0 * a2[1] + 2.0 * a3[1] + a4[1]),
            y[2] + sixth * (a1[2] + 2.0 * a2[2] + 2.0 * a3[2] + a4[2]),
            y[3] + sixth * (a1[3] + 2.0 * a2[3] + 2.0 * a3[3] + a4[3]),
            y[4] + sixth * (a1[4] + 2.0 * a2[4] + 2.0 * a3[4] + a4[4]),
            y[5] + sixth * (a1[5] + 2.0 * a2[5] + 2.0 * a3[5] + a4[5]),
            new_tilt, fx0, fz0, m0)
