"""Scalar inner loops: RK4 on the delay grid, Hermite lookups, curve evaluation.

Everything here takes plain floats and float64 arrays so the same source runs
under numba or as ordinary Python (see ``_jit``).

Grid conventions for the delay integrator: ``nh`` steps of length ``dt`` span
the delay exactly. ``pre_half[j]`` holds the infected history at
``-h + j*dt/2`` for ``j = 0..2*nh``. Node arrays are indexed by step ``k`` with
``t_k = k*dt``; ``ml_*[k]`` and ``mr_*[k]`` are the derivatives at the left and
right end of step ``k`` evaluated with the control held on that step.
"""
import math

import numpy as np

from ._jit import njit

# status codes returned by the loops
OK_STOPPED = 0
OK_HORIZON = 1
ERR_NAN = 2
ERR_LEFT_T = 3

# curve kinds
CURVE_POWER = 0      # c s^w + s/(w-1)
CURVE_LOG = 1        # c1 s - s log s
CURVE_TABLE = 2      # uniform-s cubic Hermite table
CURVE_DELAY_FREE = 3 # g/b + i_max - s + (g/b) log(b s / g)

T_TOL = 1e-6


@njit
def hermite(y0, y1, m0, m1, dt, theta):
    t2 = theta * theta
    t3 = t2 * theta
    return ((2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - 2.0 * t2 + theta) * dt * m0 + (t3 - t2) * dt * m1)


@njit
def psi(i, i_max, lh):
    v = i + lh
    if v > i_max:
        return i_max
    if v < -i_max:
        return -i_max
    return v


@njit
def delayed_value(k, stage, nh, pre_half, y, mr_left, mr_right, dt):
    """History value at t_k - h + stage*dt/2 (stage in 0, 1, 2)."""
    m = k - nh
    if m < 0:
        return pre_half[2 * (m + nh) + stage]
    if stage == 0:
        return y[m]
    if stage == 2:
        return y[m + 1]
    return hermite(y[m], y[m + 1], mr_left[m], mr_right[m], dt, 0.5)


@njit
def rk4_step(s, i, b, gamma, d0, d1, d2, dt):
    """One classical RK4 step with control ``b`` held and delayed values d0, d1, d2."""
    f1 = b * s * d0
    k1s = -f1
    k1i = f1 - gamma * i
    s2 = s + 0.5 * dt * k1s
    i2 = i + 0.5 * dt * k1i
    f2 = b * s2 * d1
    k2s = -f2
    k2i = f2 - gamma * i2
    s3 = s + 0.5 * dt * k2s
    i3 = i + 0.5 * dt * k2i
    f3 = b * s3 * d1
    k3s = -f3
    k3i = f3 - gamma * i3
    s4 = s + dt * k3s
    i4 = i + dt * k3i
    f4 = b * s4 * d2
    k4s = -f4
    k4i = f4 - gamma * i4
    s_new = s + dt / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s)
    i_new = i + dt / 6.0 * (k1i + 2.0 * k2i + 2.0 * k3i + k4i)
    return s_new, i_new, k1s, k1i


@njit
def state_ok(s, i):
    """0 if (s, i) is in T up to T_TOL, otherwise a status code."""
    if s != s or i != i:
        return ERR_NAN
    if s < -T_TOL or i < -T_TOL or s + i > 1.0 + T_TOL:
        return ERR_LEFT_T
    return OK_STOPPED


@njit
def finish_step(k, s, i, b, gamma, s_new, i_new, k1s, k1i, nh, pre_half,
                S, I, mls, mli, mrs, mri, dt):
    """Store node k+1 and the step-k slopes; the right slope needs node k+1 in place."""
    S[k + 1] = s_new
    I[k + 1] = i_new
    mls[k] = k1s
    mli[k] = k1i
    d_end = delayed_value(k + 1, 0, nh, pre_half, I, mli, mri, dt)
    f = b * s_new * d_end
    mrs[k] = -f
    mri[k] = f - gamma * i_new


@njit
def schedule_loop(gamma, b_sched, piece_steps, pre_half, nh, dt, nsteps, s0, i0,
                  S, I, B, mls, mli, mrs, mri):
    """Open-loop run with a piecewise-constant control, ``piece_steps`` steps per piece."""
    S[0] = s0
    I[0] = i0
    npieces = b_sched.shape[0]
    for k in range(nsteps):
        j = k // piece_steps
        if j >= npieces:
            j = npieces - 1
        b = b_sched[j]
        B[k] = b
        s = S[k]
        i = I[k]
        d0 = delayed_value(k, 0, nh, pre_half, I, mli, mri, dt)
        d1 = delayed_value(k, 1, nh, pre_half, I, mli, mri, dt)
        d2 = delayed_value(k, 2, nh, pre_half, I, mli, mri, dt)
        s_new, i_new, k1s, k1i = rk4_step(s, i, b, gamma, d0, d1, d2, dt)
        finish_step(k, s, i, b, gamma, s_new, i_new, k1s, k1i, nh, pre_half,
                    S, I, mls, mli, mrs, mri, dt)
        code = state_ok(s_new, i_new)
        if code != OK_STOPPED:
            return k + 1, code
    B[nsteps] = B[nsteps - 1] if nsteps > 0 else 0.0
    return nsteps, OK_HORIZON


# --- frontier curves ----------------------------------------------------------

@njit
def curve_eval(par, tab, slopes, s):
    """Evaluate a frontier curve; ``s`` is clipped to [s_lo, s_hat], output to [0, i_max].

    par = [kind, s_lo, s_hat, i_max, a, b, c]
      power:      a = omega, b = c
      log:        b = c1
      table:      a = ds (uniform spacing)
      delay-free: a = gamma / b_level
    """
    kind = int(par[0])
    s_lo = par[1]
    s_hat = par[2]
    i_max = par[3]
    if s < s_lo:
        s = s_lo
    if s > s_hat:
        s = s_hat
    if kind == CURVE_POWER:
        w = par[4]
        v = par[5] * s ** w + s / (w - 1.0)
    elif kind == CURVE_LOG:
        v = par[5] * s - s * math.log(s)
    elif kind == CURVE_TABLE:
        ds = par[4]
        n = tab.shape[0]
        x = (s - s_lo) / ds
        r = int(x + 0.5)
        if r > n - 1:
            r = n - 1
        if s == s_lo + r * ds:
            return tab[r]
        k = int(x)
        if k > n - 2:
            k = n - 2
        theta = (s - (s_lo + k * ds)) / ds
        v = hermite(tab[k], tab[k + 1], slopes[k], slopes[k + 1], ds, theta)
    else:
        r0 = par[4]
        v = r0 + i_max - s + r0 * math.log(s / r0)
    if v < 0.0:
        v = 0.0
    if v > i_max:
        v = i_max
    return v


@njit
def curve_rhs_t(s, i, b, gamma, i_max, lh):
    """Time-reversed worst-case flow; lh < 0 means no truncation (psi = i_max)."""
    if lh < 0.0:
        p = i_max
    else:
        p = psi(i, i_max, lh)
    f = b * s * p
    return f, -f + gamma * i


@njit
def curve_time_loop(b, gamma, i_max, lh, s0, i0, dt, nmax, S, I, MS, MI):
    """RK4 until the first node with i <= 0. Returns that node index or -1."""
    S[0] = s0
    I[0] = i0
    ms, mi = curve_rhs_t(s0, i0, b, gamma, i_max, lh)
    MS[0] = ms
    MI[0] = mi
    for k in range(nmax):
        s = S[k]
        i = I[k]
        k1s = MS[k]
        k1i = MI[k]
        k2s, k2i = curve_rhs_t(s + 0.5 * dt * k1s, i + 0.5 * dt * k1i, b, gamma, i_max, lh)
        k3s, k3i = curve_rhs_t(s + 0.5 * dt * k2s, i + 0.5 * dt * k2i, b, gamma, i_max, lh)
        k4s, k4i = curve_rhs_t(s + dt * k3s, i + dt * k3i, b, gamma, i_max, lh)
        sn = s + dt / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s)
        inn = i + dt / 6.0 * (k1i + 2.0 * k2i + 2.0 * k3i + k4i)
        S[k + 1] = sn
        I[k + 1] = inn
        ms, mi = curve_rhs_t(sn, inn, b, gamma, i_max, lh)
        MS[k + 1] = ms
        MI[k + 1] = mi
        if inn <= 0.0:
            return k + 1
    return -1


@njit
def curve_slope_s(s, i, b, gamma, i_max, lh):
    """di/ds along the worst-case flow."""
    if lh < 0.0:
        p = i_max
    else:
        p = psi(i, i_max, lh)
    return -1.0 + gamma * i / (b * s * p)


@njit
def curve_s_loop(b, gamma, i_max, lh, s_lo, ds, n_nodes, substeps, I, M):
    """Integrate di/ds on a uniform s grid starting from (s_lo, i_max)."""
    I[0] = i_max
    M[0] = curve_slope_s(s_lo, i_max, b, gamma, i_max, lh)
    hs = ds / substeps
    i = i_max
    for k in range(n_nodes - 1):
        s0 = s_lo + k * ds
        for j in range(substeps):
            s = s0 + j * hs
            k1 = curve_slope_s(s, i, b, gamma, i_max, lh)
            k2 = curve_slope_s(s + 0.5 * hs, i + 0.5 * hs * k1, b, gamma, i_max, lh)
            k3 = curve_slope_s(s + 0.5 * hs, i + 0.5 * hs * k2, b, gamma, i_max, lh)
            k4 = curve_slope_s(s + hs, i + hs * k3, b, gamma, i_max, lh)
            i = i + hs / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        I[k + 1] = i
        M[k + 1] = curve_slope_s(s_lo + (k + 1) * ds, i, b, gamma, i_max, lh)


# --- greedy closed loop -------------------------------------------------------

# classification codes
INTERIOR = 0
ON_S1 = 1
ON_S2 = 2
ON_BOTH = 3
OUTSIDE = 4


@njit
def in_region(s, i, herd, i_max, par, tab, slopes, tol):
    """Membership in R-union-hypograph for a B- or A-family curve, with slack ``tol``."""
    if s < -tol or i < -tol or s + i > 1.0 + tol:
        return False
    if s <= herd + tol and i <= i_max + tol:
        return True
    if s < par[1] - tol or s > par[2] + tol:
        return False
    return i <= curve_eval(par, tab, slopes, s) + tol


@njit
def classify(s, i, herd, herd_star, i_max, band, par_b, tab_b, sl_b):
    """Boundary class of (s, i) relative to the viable set described by ``par_b``."""
    tol = band * i_max
    if not in_region(s, i, herd_star, i_max, par_b, tab_b, sl_b, tol):
        return OUTSIDE
    on1 = i >= i_max * (1.0 - band) and herd - tol <= s <= herd_star + tol
    on2 = False
    if s > herd_star:
        on2 = i >= curve_eval(par_b, tab_b, sl_b, s) - tol
    if on1 and on2:
        return ON_BOTH
    if on1:
        return ON_S1
    if on2:
        return ON_S2
    return INTERIOR


@njit
def greedy_rate(s, i, idel, cls, beta, beta_star, gamma, i_max, s2_num):
    """Largest admissible rate for a boundary class; returns (b, clamped)."""
    b = beta
    if cls == ON_S1 or cls == ON_BOTH:
        den = s * idel
        if den > 0.0:
            cap = gamma * i_max / den
            if cap < b:
                b = cap
    if cls == ON_S2 or cls == ON_BOTH:
        if idel > 0.0:
            cap = beta_star * s2_num / idel
            if cap < b:
                b = cap
    if b < beta_star:
        return beta_star, True
    return b, False


@njit
def s2_numerator(i, i_max, lh, rule):
    """Numerator of the S2 cap: 0 current i, 1 i_max, 2 psi-truncated i."""
    if rule == 0:
        return i
    if rule == 1:
        return i_max
    return psi(i, i_max, lh)


@njit
def greedy_loop(gamma, beta, beta_star, i_max, lh, band, rule,
                par_b, tab_b, sl_b, par_a, tab_a, sl_a,
                pre_half, nh, dt, nsteps, s0, i0, i_stop,
                S, I, B, CLS, mls, mli, mrs, mri):
    """Closed loop under the greedy feedback, control held over each step.

    Returns (last node index, status, clamp count, outside count).
    """
    herd = gamma / beta
    herd_star = gamma / beta_star
    S[0] = s0
    I[0] = i0
    clamps = 0
    outside = 0
    for k in range(nsteps):
        s = S[k]
        i = I[k]
        d0 = delayed_value(k, 0, nh, pre_half, I, mli, mri, dt)
        if in_region(s, i, herd, i_max, par_a, tab_a, sl_a, 1e-12):
            cls = INTERIOR
        else:
            cls = classify(s, i, herd, herd_star, i_max, band, par_b, tab_b, sl_b)
            if cls == OUTSIDE:
                outside += 1
                on1 = i >= i_max * (1.0 - band)
                on2 = s > herd_star
                if on1 and on2:
                    cls = ON_BOTH
                elif on1:
                    cls = ON_S1
                else:
                    cls = ON_S2
        num = s2_numerator(i, i_max, lh, rule)
        b, clamped = greedy_rate(s, i, d0, cls, beta, beta_star, gamma, i_max, num)
        if clamped:
            clamps += 1
        B[k] = b
        CLS[k] = cls
        d1 = delayed_value(k, 1, nh, pre_half, I, mli, mri, dt)
        d2 = delayed_value(k, 2, nh, pre_half, I, mli, mri, dt)
        s_new, i_new, k1s, k1i = rk4_step(s, i, b, gamma, d0, d1, d2, dt)
        finish_step(k, s, i, b, gamma, s_new, i_new, k1s, k1i, nh, pre_half,
                    S, I, mls, mli, mrs, mri, dt)
        code = state_ok(s_new, i_new)
        if code != OK_STOPPED:
            return k + 1, code, clamps, outside
        if s_new < herd and i_new < i_stop:
            B[k + 1] = beta
            CLS[k + 1] = INTERIOR
            return k + 1, OK_STOPPED, clamps, outside
    B[nsteps] = beta
    CLS[nsteps] = INTERIOR
    return nsteps, OK_HORIZON, clamps, outside


@njit
def curve_eval_many(par, tab, slopes, s_arr, out):
    for k in range(s_arr.shape[0]):
        out[k] = curve_eval(par, tab, slopes, s_arr[k])
