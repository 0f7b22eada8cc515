"""Generic fixed-step 4th-order Runge-Kutta machinery.

The plant stepping in the numerical kernels hard-codes the same Butcher
tableau for speed; this module provides the general form used to validate
the scheme (analytic test systems, convergence-order measurement).
"""


def rk4_step(f, t, y, dt):
    """One classical RK4 step of y' = f(t, y) with tuple-of-floats state."""
    half = 0.5 * dt
    k1 = f(t, y)
    k2 = f(t + half, tuple(yi + half * ki for yi, ki in zip(y, k1)))
    k3 = f(t + half, tuple(yi + half * ki for yi, ki in zip(y, k2)))
    k4 = f(t + dt, tuple(yi + dt * ki for yi, ki in zip(y, k3)))
    sixth = dt / 6.0
    return tuple(yi + sixth * (a + 2.0 * b + 2.0 * c + d)
                 for yi, a, b, c, d in zip(y, k1, k2, k3, k4))


def integrate(f, t0, y0, dt, n_steps):
    """n_steps of RK4; returns the final (t, y)."""
    t, y = t0, tuple(y0)
    for _ in range(n_steps):
        y = rk4_step(f, t, y, dt)
        t += dt
    return t, y


def convergence_order(f, t0, y0, t_end, exact_end, dt_coarse):
    """Observed order from the global error at two step sizes (dt, dt/2)."""
    import math
    errors = []
    for dt in (dt_coarse, dt_coarse / 2.0):
        n = round((t_end - t0) / dt)
        _, y = integrate(f, t0, y0, dt, n)
        errors.append(abs(y[0] - exact_end))
    return math.log2(errors[0] / errors[1])
