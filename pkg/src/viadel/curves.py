"""Frontier curves bounding the invariant and viable regions.

Three families, all graphs ``i = G(s)`` on ``[gamma/b, s_hat]`` that start at
``i_max`` and end at 0:

* closed form (continuous past), from the linear worst-case flow with the
  delayed infected level frozen at ``i_max``;
* tabulated (Lipschitz past), from the same flow with the delayed level
  replaced by ``psi_truncate(i)``;
* delay-free, the classical log formula.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from . import _kernels as K
from .model import DomainError, Params, SolverError, ValidationError, min_lipschitz

BRANCH_TOL = 1e-12
EMPTY = np.zeros(0)


@dataclass(frozen=True, eq=False)
class FrontierCurve:
    b_level: float
    i_max: float
    s_lo: float
    s_hat: float
    par: np.ndarray = field(repr=False)

    tab = EMPTY
    slopes = EMPTY
    label = "curve"

    def __call__(self, s):
        return eval_curve(self, s)

    def sample(self, n: int = 4096) -> tuple[np.ndarray, np.ndarray]:
        s = np.linspace(self.s_lo, self.s_hat, n)
        return s, eval_curve(self, s)

    def area(self, n: int = 8193) -> float:
        """Area of the hypograph part over [s_lo, s_hat] (trapezoid)."""
        s, i = self.sample(n)
        return float(np.trapezoid(i, s))


@dataclass(frozen=True, eq=False)
class ClosedFormCurve(FrontierCurve):
    omega: float = 0.0
    coeff_c: float = 0.0
    coeff_c1: float = 0.0
    t_cross: float = 0.0
    label = "closed_form"


@dataclass(frozen=True, eq=False)
class TabulatedCurve(FrontierCurve):
    lipschitz: float = 0.0
    delay: float = 0.0
    s_nodes: np.ndarray = field(default=EMPTY, repr=False)
    i_values: np.ndarray = field(default=EMPTY, repr=False)
    node_slopes: np.ndarray = field(default=EMPTY, repr=False)
    t_cross: float = 0.0
    label = "tabulated"

    @property
    def tab(self):
        return self.i_values

    @property
    def slopes(self):
        return self.node_slopes


@dataclass(frozen=True, eq=False)
class DelayFreeCurve(FrontierCurve):
    label = "delay_free"


def _omega(b_level: float, p: Params) -> float:
    return p.gamma / (b_level * p.i_max)


def t_cross_closed_form(b_level: float, p: Params) -> float:
    rate = b_level * p.i_max
    if abs(rate - p.gamma) <= BRANCH_TOL * p.gamma:
        return 1.0
    return math.log(rate / p.gamma) / (rate - p.gamma)


def s_hat_closed_form(b_level: float, p: Params) -> float:
    rate = b_level * p.i_max
    base = p.gamma / b_level
    if abs(rate - p.gamma) <= BRANCH_TOL * p.gamma:
        return base * math.exp(rate)
    return base * (rate / p.gamma) ** (rate / (rate - p.gamma))


def gamma_closed_form(b_level: float, p: Params) -> ClosedFormCurve:
    """Frontier for a continuous past: ``c s^w + s/(w-1)`` (or its w = 1 limit)."""
    if not 0.0 < b_level < 1.0:
        raise ValidationError(f"b_level must lie in (0, 1), got {b_level}")
    w = _omega(b_level, p)
    s_lo = p.gamma / b_level
    s_hat = s_hat_closed_form(b_level, p)
    c1 = 1.0 + math.log(s_lo)
    if abs(w - 1.0) < BRANCH_TOL:
        c = 0.0
        par = np.array([K.CURVE_LOG, s_lo, s_hat, p.i_max, w, c1, 0.0])
    else:
        c = s_lo ** (-w) * (p.i_max - s_lo / (w - 1.0))
        par = np.array([K.CURVE_POWER, s_lo, s_hat, p.i_max, w, c, 0.0])
    return ClosedFormCurve(b_level, p.i_max, s_lo, s_hat, par, omega=w, coeff_c=c,
                           coeff_c1=c1, t_cross=t_cross_closed_form(b_level, p))


def gamma_delay_free(b_level: float, p: Params, s):
    """Delay-free frontier: flat at i_max up to gamma/b, log formula beyond."""
    s = np.asarray(s, dtype=float)
    if np.any(s < 0.0):
        raise DomainError("delay-free frontier is defined for s >= 0")
    r = p.gamma / b_level
    with np.errstate(divide="ignore"):
        v = np.where(s <= r, p.i_max, r + p.i_max - s + r * np.log(np.maximum(s, r) / r))
    return v[()]


def s_hat_delay_free(b_level: float, p: Params) -> float:
    r = p.gamma / b_level
    hi = max(1.0, 2.0 * r)
    f = lambda s: r + p.i_max - s + r * math.log(s / r)
    while f(hi) > 0.0:
        hi *= 2.0
    return brentq(f, r, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def delay_free_curve(b_level: float, p: Params) -> DelayFreeCurve:
    r = p.gamma / b_level
    s_hat = s_hat_delay_free(b_level, p)
    par = np.array([K.CURVE_DELAY_FREE, r, s_hat, p.i_max, r, 0.0, 0.0])
    return DelayFreeCurve(b_level, p.i_max, r, s_hat, par)


def _fritsch_carlson(y: np.ndarray, m: np.ndarray, dx: float) -> np.ndarray:
    """Limit node slopes so the cubic Hermite interpolant stays monotone."""
    m = m.copy()
    delta = np.diff(y) / dx
    for k, d in enumerate(delta):
        if d == 0.0:
            m[k] = m[k + 1] = 0.0
            continue
        a, b = m[k] / d, m[k + 1] / d
        if a < 0.0:
            m[k] = 0.0
            a = 0.0
        if b < 0.0:
            m[k + 1] = 0.0
            b = 0.0
        r = a * a + b * b
        if r > 9.0:
            tau = 3.0 / math.sqrt(r)
            m[k] = tau * a * d
            m[k + 1] = tau * b * d
    return m


def build_gamma_lh(b_level: float, L: float, h: float, p: Params,
                   n_nodes: int = 2048, steps_per_crossing: int = 20000,
                   substeps: int = 16) -> TabulatedCurve:
    """Tabulate the frontier of the truncated worst-case flow for an L-Lipschitz past.

    The flow is integrated in time until ``i`` first reaches 0 (crossing time
    and abscissa located by bisection on the Hermite step interpolant), then
    resampled on a uniform ``s`` grid by integrating ``di/ds`` directly.
    """
    if not h > 0.0:
        raise ValidationError(f"delay must be positive, got {h}")
    if L < min_lipschitz(p) * (1.0 - 1e-12):
        raise ValidationError(f"L={L} below the admissible minimum {min_lipschitz(p)}")
    if n_nodes < 64:
        raise ValidationError("n_nodes must be at least 64")
    lh = L * h
    T_ref = t_cross_closed_form(b_level, p)
    dt = T_ref / steps_per_crossing
    nmax = 10 * steps_per_crossing
    S, I, MS, MI = (np.empty(nmax + 1) for _ in range(4))
    s_lo = p.gamma / b_level
    kx = K.curve_time_loop(b_level, p.gamma, p.i_max, lh, s_lo, p.i_max, dt, nmax, S, I, MS, MI)
    if kx < 0:
        raise SolverError(
            f"no i=0 crossing before t={nmax * dt:.4g} (b={b_level}, L={L}, h={h})")
    t_cross, s_hat = _locate_crossing(S, I, MS, MI, kx, dt)

    ds = (s_hat - s_lo) / (n_nodes - 1)
    Iv = np.empty(n_nodes)
    Mv = np.empty(n_nodes)
    K.curve_s_loop(b_level, p.gamma, p.i_max, lh, s_lo, ds, n_nodes, substeps, Iv, Mv)
    if abs(Iv[-1]) > 1e-8:
        raise SolverError(f"resampled curve misses its endpoint: i(s_hat)={Iv[-1]:.3g}")
    Iv[-1] = 0.0
    Mv = _fritsch_carlson(Iv, Mv, ds)
    s_nodes = s_lo + ds * np.arange(n_nodes)
    par = np.array([K.CURVE_TABLE, s_lo, s_hat, p.i_max, ds, 0.0, 0.0])
    return TabulatedCurve(b_level, p.i_max, s_lo, s_hat, par, lipschitz=L, delay=h,
                          s_nodes=s_nodes, i_values=Iv, node_slopes=Mv, t_cross=t_cross)


def _locate_crossing(S, I, MS, MI, kx, dt, tol=1e-12):
    """Bisection for i = 0 inside step [kx-1, kx] of the dense output."""
    k = kx - 1
    lo, hi = 0.0, 1.0
    theta = 1.0
    for _ in range(200):
        theta = 0.5 * (lo + hi)
        v = K.hermite(I[k], I[k + 1], MI[k], MI[k + 1], dt, theta)
        if abs(v) <= tol and hi - lo < 1e-6:
            break
        if v > 0.0:
            lo = theta
        else:
            hi = theta
        if hi - lo < 1e-15:
            break
    s_hat = K.hermite(S[k], S[k + 1], MS[k], MS[k + 1], dt, theta)
    return (k + theta) * dt, float(s_hat)


def event_s_hat(b_level: float, p: Params, lipschitz: Optional[float] = None,
                delay: Optional[float] = None, steps_per_crossing: int = 20000):
    """(crossing time, abscissa) of the worst-case flow by event integration.

    Without ``lipschitz`` the delayed level is frozen at i_max.
    """
    lh = -1.0 if lipschitz is None else lipschitz * (p.delay if delay is None else delay)
    T_ref = t_cross_closed_form(b_level, p)
    dt = T_ref / steps_per_crossing
    nmax = 10 * steps_per_crossing
    S, I, MS, MI = (np.empty(nmax + 1) for _ in range(4))
    kx = K.curve_time_loop(b_level, p.gamma, p.i_max, lh, p.gamma / b_level, p.i_max,
                           dt, nmax, S, I, MS, MI)
    if kx < 0:
        raise SolverError("no i=0 crossing found")
    return _locate_crossing(S, I, MS, MI, kx, dt)


def eval_curve(curve: FrontierCurve, s):
    """Evaluate ``curve`` at scalar or array ``s`` inside its domain."""
    arr = np.asarray(s, dtype=float)
    slack = 1e-12 * max(1.0, curve.s_hat)
    if np.any(arr < curve.s_lo - slack) or np.any(arr > curve.s_hat + slack):
        raise DomainError(
            f"s outside the curve domain [{curve.s_lo:.6g}, {curve.s_hat:.6g}]")
    if arr.ndim == 0:
        return float(K.curve_eval(curve.par, curve.tab, curve.slopes, float(arr)))
    flat = np.ascontiguousarray(arr.ravel())
    out = np.empty_like(flat)
    K.curve_eval_many(curve.par, curve.tab, curve.slopes, flat, out)
    return out.reshape(arr.shape)


def curve_family(p: Params, variant: str = "continuous", n_nodes: int = 2048):
    """(invariant-set curve, viable-set curve) for a policy/region variant."""
    if variant == "continuous":
        return gamma_closed_form(p.beta, p), gamma_closed_form(p.beta_star, p)
    if variant == "lipschitz":
        if p.lipschitz is None:
            raise ValidationError("lipschitz variant needs params.lipschitz")
        return (build_gamma_lh(p.beta, p.lipschitz, p.delay, p, n_nodes),
                build_gamma_lh(p.beta_star, p.lipschitz, p.delay, p, n_nodes))
    if variant == "delay_free":
        return delay_free_curve(p.beta, p), delay_free_curve(p.beta_star, p)
    raise ValidationError(f"unknown variant {variant!r}")
