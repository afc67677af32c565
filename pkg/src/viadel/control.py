"""Greedy viability feedback, closed-loop runs, cost and asymptotic diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.ndimage import maximum_filter1d
from scipy.optimize import brentq

from . import _kernels as K
from .dde import StepConfig, Trajectory, prefix_half
from .model import (DomainError, InitialCondition, Params, SolverError, State,
                    ValidationError, check_admissible, eval_initial, is_degenerate)
from .regions import BoundaryClass, RegionSpec, contains, region_spec

# numerator of the S2 cap
S2_RULES = {"current": 0, "i_max": 1}
I_STOP = 1e-6


@dataclass(frozen=True)
class PolicyConfig:
    """Policy variant ('continuous' or 'lipschitz'), activation band and S2-cap rule.

    ``s2_rule='current'`` uses the current infected level in the S2 cap,
    ``'i_max'`` uses i_max. The Lipschitz variant always uses the
    psi-truncated level.
    """
    variant: str = "continuous"
    band: float = 1e-3
    s2_rule: str = "current"
    region: Optional[RegionSpec] = None

    def __post_init__(self):
        if self.variant not in ("continuous", "lipschitz"):
            raise ValidationError(f"policy variant must be continuous or lipschitz, got {self.variant!r}")
        if not 0.0 < self.band < 1.0:
            raise ValidationError(f"band must lie in (0, 1), got {self.band}")
        if self.s2_rule not in S2_RULES:
            raise ValidationError(f"s2_rule must be one of {sorted(S2_RULES)}")
        if self.region is not None and self.region.variant != self.variant:
            raise ValidationError("region variant does not match the policy variant")

    def resolve_region(self, p: Params) -> RegionSpec:
        if self.region is not None and self.region.params == p:
            return self.region
        return region_spec(p, self.variant)

    def rule_code(self) -> int:
        return 2 if self.variant == "lipschitz" else S2_RULES[self.s2_rule]


def identity(u):
    return u


@dataclass(frozen=True)
class CostSpec:
    G: Callable = identity

    def __post_init__(self):
        grid = np.linspace(0.0, 1.0, 100)
        vals = np.asarray(self.G(grid), dtype=float)
        if abs(float(self.G(np.zeros(1))[0])) > 1e-15:
            raise ValidationError("cost integrand must satisfy G(0) = 0")
        if np.any(np.diff(vals) <= 0.0):
            raise ValidationError("cost integrand must be strictly increasing")


@dataclass
class ClosedLoopResult:
    trajectory: Trajectory
    b: np.ndarray
    u: np.ndarray
    J_cum: np.ndarray
    t_lock: float
    terminated: bool
    clamp_events: int
    outside_events: int
    classes: np.ndarray = field(repr=False)
    band: float = 1e-3

    @property
    def J(self) -> float:
        return float(self.J_cum[-1])

    @property
    def s_inf(self) -> float:
        return float(self.trajectory.s[-1])

    @property
    def max_i(self) -> float:
        return float(np.max(self.trajectory.i))

    @property
    def constraint_ok(self) -> bool:
        p = self.trajectory.params
        return self.max_i <= p.i_max * (1.0 + self.band)

    @property
    def reached_R(self) -> bool:
        p = self.trajectory.params
        return self.s_inf < p.herd and float(self.trajectory.i[-1]) <= p.i_max

    def summary(self) -> dict:
        return {
            "J": self.J,
            "t_lock": self.t_lock,
            "s_inf": self.s_inf,
            "constraint_ok": self.constraint_ok,
            "clamp_events": self.clamp_events,
        }


def greedy_b(x: State, i_del: float, cls: BoundaryClass, cfg: PolicyConfig, p: Params) -> float:
    """Largest rate in [beta_star, beta] allowed by the boundary class of ``x``."""
    codes = {BoundaryClass.INTERIOR: K.INTERIOR, BoundaryClass.ON_S1: K.ON_S1,
             BoundaryClass.ON_S2: K.ON_S2}
    if cls not in codes:
        raise DomainError(f"no admissible rate for a state classed {cls.value}")
    lh = -1.0 if p.lipschitz is None else p.lipschitz * p.delay
    if cfg.variant == "lipschitz" and lh < 0.0:
        raise ValidationError("lipschitz policy needs params.lipschitz")
    num = K.s2_numerator(float(x.i), p.i_max, lh, cfg.rule_code())
    b, _ = K.greedy_rate(float(x.s), float(x.i), float(i_del), codes[cls], p.beta,
                         p.beta_star, p.gamma, p.i_max, num)
    return float(b)


def cost(u, dt: float, spec: CostSpec = CostSpec()) -> float:
    """Trapezoidal integral of G(u) on a uniform grid."""
    u = np.asarray(u, dtype=float)
    if np.any(u < -1e-12):
        raise ValidationError("control effort u must be non-negative")
    if u.size < 2:
        return 0.0
    return float(np.trapezoid(spec.G(np.maximum(u, 0.0)), dx=dt))


def run_greedy(ic: InitialCondition, p: Params, cfg: PolicyConfig = PolicyConfig(),
               step: StepConfig = StepConfig(), cost_spec: CostSpec = CostSpec(),
               check: bool = True) -> ClosedLoopResult:
    """Closed loop under the greedy feedback, rate re-chosen at every step start."""
    region = cfg.resolve_region(p)
    if check:
        check_admissible(ic, p, p.lipschitz if cfg.variant == "lipschitz" else None)
    x0 = eval_initial(ic, 0.0, p)
    if not contains("B", region, x0, tol=1e-12):
        raise ValidationError(f"initial state ({x0.s:.6g}, {x0.i:.6g}) lies outside the viable set")
    lh = -1.0 if p.lipschitz is None else p.lipschitz * p.delay
    dt, nh, nsteps = step.resolve(p)
    pre = prefix_half(ic, p, nh)
    S, I, B = (np.empty(nsteps + 1) for _ in range(3))
    CLS = np.zeros(nsteps + 1, dtype=np.int64)
    mls, mli, mrs, mri = (np.zeros(nsteps + 1) for _ in range(4))
    ca, cb = region.curve_beta, region.curve_beta_star
    n, code, clamps, outside = K.greedy_loop(
        p.gamma, p.beta, p.beta_star, p.i_max, lh, cfg.band, cfg.rule_code(),
        cb.par, cb.tab, cb.slopes, ca.par, ca.tab, ca.slopes,
        pre, nh, dt, nsteps, x0.s, x0.i, I_STOP,
        S, I, B, CLS, mls, mli, mrs, mri)
    if code == K.ERR_NAN:
        raise SolverError(f"NaN state at t={n * dt:.6g}")
    if code == K.ERR_LEFT_T:
        raise SolverError(f"state left the triangle T at t={n * dt:.6g}")
    arrays = [a[: n + 1].copy() for a in (S, I, B, mls, mli, mrs, mri)]
    traj = Trajectory(ic, p, dt, nh, *arrays, pre_half=pre)
    b = traj.b
    u = p.beta - b
    J_cum = cumulative_trapezoid(cost_spec.G(u), dx=dt, initial=0.0)
    active = np.nonzero(b < p.beta)[0]
    t_lock = float((active[-1] + 1) * dt) if active.size else 0.0
    return ClosedLoopResult(traj, b, u, J_cum, t_lock, code == K.OK_STOPPED, int(clamps),
                            int(outside), CLS[: n + 1].copy(), cfg.band)


def _i_on_grid(traj: Trajectory) -> np.ndarray:
    """Infected level on the step grid from -h to the end of the run."""
    return np.concatenate([traj.pre_half[: 2 * traj.nh : 2], traj.i])


def limit_relation(traj: Trajectory, b_inf: float, T: float) -> tuple[float, float]:
    """Both sides of the limit relation evaluated at time T (a grid time).

    Returns (s_end * exp(-(b/g) s_end), M_T * s(T) * exp(-(b/g) s(T))).
    """
    p = traj.params
    k = int(round(T / traj.dt))
    if not 0 <= k <= traj.n:
        raise DomainError(f"T={T} outside the run")
    i = _i_on_grid(traj)
    window = i[k : k + traj.nh + 1]
    integral = float(np.trapezoid(window, dx=traj.dt))
    r = b_inf / p.gamma
    m_T = math.exp(-b_inf * integral - r * traj.i[k])
    s_end = float(traj.s[-1])
    lhs = s_end * math.exp(-r * s_end)
    rhs = m_T * float(traj.s[k]) * math.exp(-r * float(traj.s[k]))
    return lhs, rhs


def _s_inf_from_relation(traj: Trajectory, b_inf: float) -> float:
    """Limit of s implied by the relation at the final time (tail correction)."""
    p = traj.params
    _, rhs = limit_relation(traj, b_inf, traj.t_end)
    r = b_inf / p.gamma
    f = lambda s: s * math.exp(-r * s) - rhs
    hi = 1.0 / r
    if rhs <= 0.0:
        return 0.0
    if f(hi) < 0.0:
        raise DomainError("limit relation has no root below gamma/b")
    return brentq(f, 0.0, hi, xtol=1e-16)


@dataclass(frozen=True)
class Asymptotics:
    s_inf: float
    s_inf_corrected: float
    below_herd: bool
    residual: Optional[float]
    tail_bound: float


def asymptotics(result: ClosedLoopResult, p: Params) -> Asymptotics:
    """Limit diagnostics of a terminated greedy run (b = beta after t_lock)."""
    if not result.terminated:
        raise ValidationError("run did not terminate; asymptotics need a finished run")
    traj = result.trajectory
    s_inf = result.s_inf
    if is_degenerate(traj.ic, p) and np.all(traj.i == 0.0):
        return Asymptotics(s_inf, s_inf, s_inf < p.herd, None, 0.0)
    lhs, rhs = limit_relation(traj, p.beta, result.t_lock)
    corrected = _s_inf_from_relation(traj, p.beta)
    return Asymptotics(s_inf, corrected, s_inf < p.herd, abs(lhs - rhs) / abs(rhs),
                       abs(s_inf - corrected) / s_inf)


def weak_monotone_check(traj: Trajectory, p: Params) -> float:
    """Largest excess of i(tau + t), t in [0, h], over the max of i on [tau - h, tau]."""
    if traj.s[0] > p.herd:
        raise ValidationError(f"weak monotonicity needs s(0) <= gamma/beta, got {traj.s[0]}")
    i = _i_on_grid(traj)
    nh = traj.nh
    m = nh + 1
    past = maximum_filter1d(i, m, origin=nh - m // 2, mode="nearest")
    ahead = maximum_filter1d(i, m, origin=-(m // 2), mode="constant", cval=-np.inf)
    return float(np.max(ahead[nh:] - past[nh:]))
