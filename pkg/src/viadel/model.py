"""Parameters, states, initial histories and the delayed SIR vector field."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np


class ValidationError(ValueError):
    """Invalid parameters, configuration or initial history."""


class DomainError(ValueError):
    """Argument outside the domain where a quantity is defined."""


class SolverError(RuntimeError):
    """Numerical integration produced an inconsistent state."""


@dataclass(frozen=True)
class Params:
    gamma: float
    beta: float
    beta_star: float
    i_max: float
    delay: float
    lipschitz: Optional[float] = None

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValidationError(f"gamma must lie in (0, 1), got {self.gamma}")
        if not 0.0 < self.beta < 1.0:
            raise ValidationError(f"beta must lie in (0, 1), got {self.beta}")
        if not 0.0 < self.beta_star <= self.beta:
            raise ValidationError(
                f"beta_star must lie in (0, beta], got {self.beta_star}")
        if not 0.0 < self.i_max <= 1.0:
            raise ValidationError(f"i_max must lie in (0, 1], got {self.i_max}")
        if not self.delay > 0.0:
            raise ValidationError(f"delay must be positive, got {self.delay}")
        if self.lipschitz is not None:
            lmin = min_lipschitz(self)
            # relative slack so that the printed value of L_min is accepted
            if self.lipschitz < lmin * (1.0 - 1e-12):
                raise ValidationError(
                    f"lipschitz={self.lipschitz} is below i_max*max(beta, gamma)={lmin}")

    @property
    def herd(self) -> float:
        """Herd-immunity abscissa gamma/beta."""
        return self.gamma / self.beta

    @property
    def herd_star(self) -> float:
        return self.gamma / self.beta_star

    def with_(self, **changes) -> "Params":
        d = self.to_dict()
        d.update(changes)
        return Params(**d)

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "beta": self.beta,
            "beta_star": self.beta_star,
            "i_max": self.i_max,
            "delay": self.delay,
            "lipschitz": self.lipschitz,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Params":
        keys = ("gamma", "beta", "beta_star", "i_max", "delay", "lipschitz")
        unknown = set(d) - set(keys)
        if unknown:
            raise ValidationError(f"unknown parameter keys: {sorted(unknown)}")
        return cls(**{k: d[k] for k in keys if k in d and d[k] is not None})


DEFAULT_PARAMS = Params(gamma=0.0714, beta=0.5, beta_star=0.185, i_max=0.021, delay=6.0)


@dataclass(frozen=True)
class State:
    s: float
    i: float

    def __iter__(self):
        yield self.s
        yield self.i


def rhs_delayed(x: State, i_del: float, b: float, p: Params) -> tuple[float, float]:
    """Vector field of the delayed SIR system at state ``x``."""
    flux = b * x.s * i_del
    return -flux, flux - p.gamma * x.i


def psi_truncate(i, p: Params, lipschitz: Optional[float] = None, delay: Optional[float] = None):
    """Worst admissible delayed infected level for an L-Lipschitz past.

    Works on scalars and arrays. ``lipschitz``/``delay`` default to the values
    stored in ``p``.
    """
    L = p.lipschitz if lipschitz is None else lipschitz
    h = p.delay if delay is None else delay
    if L is None or not L > 0.0 or not h > 0.0:
        raise ValidationError("psi_truncate needs L > 0 and h > 0")
    return np.clip(np.asarray(i, dtype=float) + L * h, -p.i_max, p.i_max)[()]


def min_lipschitz(p: Params) -> float:
    return p.i_max * max(p.beta, p.gamma)


def in_T(x: State, tol: float = 0.0) -> bool:
    return x.s >= -tol and x.i >= -tol and x.s + x.i <= 1.0 + tol


def in_C(x: State, p: Params, tol: float = 0.0) -> bool:
    return in_T(x, tol) and x.i <= p.i_max + tol


# --- initial histories on [-h, 0] -------------------------------------------

@dataclass(frozen=True)
class Constant:
    state: State
    kind = "constant"

    def arrays(self, t, p: Params):
        t = np.asarray(t, dtype=float)
        return np.full_like(t, self.state.s), np.full_like(t, self.state.i)


@dataclass(frozen=True)
class ExpRecovery:
    """History whose infected part decays at the recovery rate: i0*exp(-gamma*t)."""
    s0: float
    i0: float
    kind = "exp_recovery"

    def arrays(self, t, p: Params):
        t = np.asarray(t, dtype=float)
        return np.full_like(t, self.s0), self.i0 * np.exp(-p.gamma * t)


@dataclass(frozen=True)
class ExpSurge:
    """History starting at i_max at t=-h and falling steeply to i0 at t=0."""
    s0: float
    i0: float
    rate: float = 5.0
    kind = "exp_surge"

    def arrays(self, t, p: Params):
        t = np.asarray(t, dtype=float)
        scale = (p.i_max - self.i0) / (1.0 - math.exp(-self.rate * p.delay))
        return np.full_like(t, self.s0), self.i0 + scale * (1.0 - np.exp(self.rate * t))


@dataclass(frozen=True)
class Sampled:
    """Tabulated history, linearly interpolated between nodes."""
    t: tuple
    s: tuple
    i: tuple
    kind = "sampled"

    def __post_init__(self):
        if not (len(self.t) == len(self.s) == len(self.i)) or len(self.t) < 2:
            raise ValidationError("sampled history needs >= 2 nodes of equal length")
        if np.any(np.diff(self.t) <= 0):
            raise ValidationError("sampled history times must be strictly increasing")

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]]) -> "Sampled":
        rows = [tuple(map(float, r)) for r in rows]
        t, s, i = zip(*rows)
        return cls(tuple(t), tuple(s), tuple(i))

    def arrays(self, t, p: Params):
        if abs(self.t[0] + p.delay) > 1e-9 * max(1.0, p.delay) or abs(self.t[-1]) > 1e-12:
            raise ValidationError(
                f"sampled history must cover [-h, 0] = [{-p.delay}, 0], "
                f"got [{self.t[0]}, {self.t[-1]}]")
        t = np.asarray(t, dtype=float)
        return np.interp(t, self.t, self.s), np.interp(t, self.t, self.i)


InitialCondition = Union[Constant, ExpRecovery, ExpSurge, Sampled]


def eval_initial(ic: InitialCondition, t: float, p: Params) -> State:
    if not -p.delay * (1.0 + 1e-12) <= t <= 0.0:
        raise DomainError(f"history is defined on [-{p.delay}, 0], got t={t}")
    s, i = ic.arrays(np.array([t]), p)
    return State(float(s[0]), float(i[0]))


def history_grid(p: Params, n: int = 1000) -> np.ndarray:
    return np.linspace(-p.delay, 0.0, n)


def check_admissible(ic: InitialCondition, p: Params, lipschitz: Optional[float] = None,
                     n: int = 1000) -> None:
    """Raise ValidationError unless the history takes values in C on a uniform grid.

    With ``lipschitz`` given, also check the max-norm increments against L*dt.
    """
    t = history_grid(p, n)
    s, i = ic.arrays(t, p)
    tol = 1e-12
    bad = (s < -tol) | (i < -tol) | (s + i > 1.0 + tol) | (i > p.i_max * (1 + 1e-12))
    if np.any(bad):
        k = int(np.argmax(bad))
        raise ValidationError(
            f"history leaves C at t={t[k]:.6g}: (s, i)=({s[k]:.6g}, {i[k]:.6g}), i_max={p.i_max}")
    if lipschitz is not None:
        dt = t[1] - t[0]
        inc = np.maximum(np.abs(np.diff(s)), np.abs(np.diff(i)))
        limit = lipschitz * dt * (1.0 + 1e-9)
        if np.any(inc > limit):
            k = int(np.argmax(inc))
            raise ValidationError(
                f"history violates the Lipschitz bound L={lipschitz} near t={t[k]:.6g} "
                f"(increment {inc[k]:.3g} > {limit:.3g})")


def is_degenerate(ic: InitialCondition, p: Params, n: int = 1000) -> bool:
    """True when the infected history vanishes identically (frozen dynamics)."""
    _, i = ic.arrays(history_grid(p, n), p)
    return bool(np.all(i == 0.0))


def ic_to_dict(ic: InitialCondition) -> dict:
    if isinstance(ic, Constant):
        return {"kind": "constant", "s0": ic.state.s, "i0": ic.state.i}
    if isinstance(ic, ExpRecovery):
        return {"kind": "exp_recovery", "s0": ic.s0, "i0": ic.i0}
    if isinstance(ic, ExpSurge):
        return {"kind": "exp_surge", "s0": ic.s0, "i0": ic.i0, "rate": ic.rate}
    return {"kind": "sampled", "rows": [list(r) for r in zip(ic.t, ic.s, ic.i)]}


def ic_from_dict(d: dict) -> InitialCondition:
    kind = d.get("kind")
    try:
        if kind == "constant":
            return Constant(State(float(d["s0"]), float(d["i0"])))
        if kind == "exp_recovery":
            return ExpRecovery(float(d["s0"]), float(d["i0"]))
        if kind == "exp_surge":
            return ExpSurge(float(d["s0"]), float(d["i0"]), float(d.get("rate", 5.0)))
        if kind == "sampled":
            return Sampled.from_rows(d["rows"])
    except KeyError as exc:
        raise ValidationError(f"initial condition of kind {kind!r} misses field {exc}") from None
    raise ValidationError(f"unknown initial condition kind {kind!r}")
