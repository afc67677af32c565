"""Fixed-step RK4 for the constant-delay system (method of steps) with dense output.

The step is always an exact divisor of the delay, so every delayed lookup at
an RK stage lands either on a stored node, on a half step (cubic Hermite
from the step's own slopes) or inside the prescribed history.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from . import _kernels as K
from .model import (DomainError, InitialCondition, Params, SolverError, State,
                    ValidationError, check_admissible, eval_initial)


@dataclass(frozen=True)
class StepConfig:
    dt: float = 0.01
    t_max: float = 1000.0
    hold_control: bool = True

    def __post_init__(self):
        if not self.dt > 0.0:
            raise ValidationError(f"dt must be positive, got {self.dt}")

    def resolve(self, p: Params) -> tuple[float, int, int]:
        """(dt, steps per delay, total steps) with dt rounded down to divide h."""
        if self.t_max < p.delay:
            raise ValidationError(f"t_max={self.t_max} shorter than the delay {p.delay}")
        nh = int(math.ceil(p.delay / self.dt - 1e-9))
        dt = p.delay / nh
        nsteps = int(math.ceil(self.t_max / dt - 1e-9))
        return dt, nh, nsteps


def prefix_half(ic: InitialCondition, p: Params, nh: int) -> np.ndarray:
    t = np.linspace(-p.delay, 0.0, 2 * nh + 1)
    return np.ascontiguousarray(ic.arrays(t, p)[1], dtype=float)


@dataclass
class Trajectory:
    ic: InitialCondition
    params: Params
    dt: float
    nh: int
    s: np.ndarray
    i: np.ndarray
    b: np.ndarray
    ml_s: np.ndarray
    ml_i: np.ndarray
    mr_s: np.ndarray
    mr_i: np.ndarray
    pre_half: np.ndarray = field(repr=False)
    t0: float = 0.0

    @property
    def n(self) -> int:
        """Number of completed steps."""
        return len(self.s) - 1

    @property
    def t(self) -> np.ndarray:
        return self.dt * np.arange(len(self.s))

    @property
    def t_end(self) -> float:
        return self.n * self.dt

    def eval_state(self, t: float) -> State:
        return eval_state(self, t)

    def delayed_i(self, t: float) -> float:
        return delayed_i(self, t)

    def history_nodes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """History sampled on the step grid for t in [-h, 0)."""
        t = -self.params.delay + self.dt * np.arange(self.nh)
        s, i = self.ic.arrays(t, self.params)
        return t, s, i


def _trim(n, *arrays):
    return [a[: n + 1].copy() for a in arrays]


def eval_state(traj: Trajectory, t: float) -> State:
    p = traj.params
    if t <= 0.0:
        return eval_initial(traj.ic, t, p)
    if t > traj.t_end * (1.0 + 1e-14):
        raise DomainError(f"t={t} beyond the integrated horizon {traj.t_end}")
    k = int(t / traj.dt)
    if k >= traj.n:
        k = traj.n - 1
    tk = k * traj.dt
    theta = (t - tk) / traj.dt
    if theta == 0.0:
        return State(float(traj.s[k]), float(traj.i[k]))
    if theta >= 1.0:
        return State(float(traj.s[k + 1]), float(traj.i[k + 1]))
    s = K.hermite(traj.s[k], traj.s[k + 1], traj.ml_s[k], traj.mr_s[k], traj.dt, theta)
    i = K.hermite(traj.i[k], traj.i[k + 1], traj.ml_i[k], traj.mr_i[k], traj.dt, theta)
    return State(float(s), float(i))


def delayed_i(traj: Trajectory, t: float) -> float:
    if t < 0.0:
        raise DomainError(f"delayed lookup needs t >= 0, got {t}")
    return eval_state(traj, t - traj.params.delay).i


ControlRule = Callable[[float, State, float], float]


def _raise_status(code: int, t: float) -> None:
    if code == K.ERR_NAN:
        raise SolverError(f"NaN state at t={t:.6g}")
    if code == K.ERR_LEFT_T:
        raise SolverError(f"state left the triangle T by more than {K.T_TOL} at t={t:.6g}")


def integrate(ic: InitialCondition, control: Union[float, ControlRule], p: Params,
              cfg: StepConfig = StepConfig(),
              stop: Optional[Callable[[float, State], bool]] = None,
              check: bool = True) -> Trajectory:
    """General-purpose integration with a Python control rule ``control(t, x, i_del)``.

    ``control`` may also be a constant rate. With ``cfg.hold_control`` the rate
    is evaluated once per step at the step start, otherwise at every RK stage.
    """
    if check:
        check_admissible(ic, p)
    dt, nh, nsteps = cfg.resolve(p)
    pre = prefix_half(ic, p, nh)
    x0 = eval_initial(ic, 0.0, p)
    const = None if callable(control) else float(control)

    S = np.empty(nsteps + 1)
    I = np.empty(nsteps + 1)
    B = np.empty(nsteps + 1)
    mls = np.zeros(nsteps + 1)
    mli = np.zeros(nsteps + 1)
    mrs = np.zeros(nsteps + 1)
    mri = np.zeros(nsteps + 1)
    S[0], I[0] = x0.s, x0.i
    g = p.gamma
    n = nsteps
    for k in range(nsteps):
        t = k * dt
        s, i = S[k], I[k]
        d0 = K.delayed_value(k, 0, nh, pre, I, mli, mri, dt)
        d1 = K.delayed_value(k, 1, nh, pre, I, mli, mri, dt)
        d2 = K.delayed_value(k, 2, nh, pre, I, mli, mri, dt)
        if const is not None or cfg.hold_control:
            b = const if const is not None else float(control(t, State(s, i), d0))
            s_new, i_new, k1s, k1i = K.rk4_step(s, i, b, g, d0, d1, d2, dt)
        else:
            # rate re-evaluated at each stage; slopes stored with the step-start rate
            b = float(control(t, State(s, i), d0))
            k1s, k1i = -b * s * d0, b * s * d0 - g * i
            s2, i2 = s + 0.5 * dt * k1s, i + 0.5 * dt * k1i
            b2 = float(control(t + 0.5 * dt, State(s2, i2), d1))
            k2s, k2i = -b2 * s2 * d1, b2 * s2 * d1 - g * i2
            s3, i3 = s + 0.5 * dt * k2s, i + 0.5 * dt * k2i
            b3 = float(control(t + 0.5 * dt, State(s3, i3), d1))
            k3s, k3i = -b3 * s3 * d1, b3 * s3 * d1 - g * i3
            s4, i4 = s + dt * k3s, i + dt * k3i
            b4 = float(control(t + dt, State(s4, i4), d2))
            k4s, k4i = -b4 * s4 * d2, b4 * s4 * d2 - g * i4
            s_new = s + dt / 6.0 * (k1s + 2 * k2s + 2 * k3s + k4s)
            i_new = i + dt / 6.0 * (k1i + 2 * k2i + 2 * k3i + k4i)
        B[k] = b
        K.finish_step(k, s, i, b, g, s_new, i_new, k1s, k1i, nh, pre,
                      S, I, mls, mli, mrs, mri, dt)
        _raise_status(K.state_ok(s_new, i_new), t + dt)
        if stop is not None and stop(t + dt, State(s_new, i_new)):
            n = k + 1
            break
    B[n] = B[n - 1]
    arrays = _trim(n, S, I, B, mls, mli, mrs, mri)
    return Trajectory(ic, p, dt, nh, *arrays, pre_half=pre)


def integrate_schedule(ic: InitialCondition, b_values, piece_len: float, p: Params,
                       cfg: StepConfig = StepConfig(), check: bool = True) -> Trajectory:
    """Open-loop run with rate ``b_values[j]`` on ``[j*piece_len, (j+1)*piece_len)``.

    The last value is held after the schedule runs out. ``piece_len`` is
    rounded to a whole number of steps.
    """
    if check:
        check_admissible(ic, p)
    b_values = np.ascontiguousarray(np.atleast_1d(b_values), dtype=float)
    if np.any(b_values < p.beta_star - 1e-15) or np.any(b_values > p.beta + 1e-15):
        raise ValidationError("scheduled rates must lie in [beta_star, beta]")
    dt, nh, nsteps = cfg.resolve(p)
    piece_steps = max(1, int(round(piece_len / dt)))
    pre = prefix_half(ic, p, nh)
    x0 = eval_initial(ic, 0.0, p)
    S, I, B = (np.empty(nsteps + 1) for _ in range(3))
    mls, mli, mrs, mri = (np.zeros(nsteps + 1) for _ in range(4))
    n, code = K.schedule_loop(p.gamma, b_values, piece_steps, pre, nh, dt, nsteps,
                              x0.s, x0.i, S, I, B, mls, mli, mrs, mri)
    _raise_status(code, n * dt)
    B[n] = B[n - 1]
    arrays = _trim(n, S, I, B, mls, mli, mrs, mri)
    return Trajectory(ic, p, dt, nh, *arrays, pre_half=pre)
