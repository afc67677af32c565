"""Invariant/viable region membership, boundary classes and probe harnesses."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels as K
from ._parallel import pmap
from .curves import FrontierCurve, curve_family
from .dde import StepConfig, integrate_schedule
from .model import DomainError, Params, Sampled, State, ValidationError

VARIANTS = ("continuous", "lipschitz", "delay_free")


class BoundaryClass(enum.Enum):
    INTERIOR = "Interior"
    ON_S1 = "OnS1"
    ON_S2 = "OnS2"
    OUTSIDE = "Outside"


_FROM_CODE = {
    K.INTERIOR: BoundaryClass.INTERIOR,
    K.ON_S1: BoundaryClass.ON_S1,
    K.ON_S2: BoundaryClass.ON_S2,
    K.ON_BOTH: BoundaryClass.ON_S1,  # caps coincide at the corner
    K.OUTSIDE: BoundaryClass.OUTSIDE,
}


@dataclass(frozen=True, eq=False)
class RegionSpec:
    variant: str
    curve_beta: FrontierCurve
    curve_beta_star: FrontierCurve
    params: Params

    def curve(self, region: str) -> FrontierCurve:
        if region == "A":
            return self.curve_beta
        if region == "B":
            return self.curve_beta_star
        raise ValidationError(f"region must be 'A' or 'B', got {region!r}")


def region_spec(p: Params, variant: str = "continuous") -> RegionSpec:
    if variant not in VARIANTS:
        raise ValidationError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    ca, cb = curve_family(p, variant)
    return RegionSpec(variant, ca, cb, p)


def contains(region: str, spec: RegionSpec, x: State, tol: float = 0.0) -> bool:
    """Closed-set membership of ``x`` in A (``region='A'``) or B."""
    c = spec.curve(region)
    return bool(K.in_region(float(x.s), float(x.i), c.s_lo, c.i_max,
                            c.par, c.tab, c.slopes, tol))


def class_code(spec: RegionSpec, x: State, band: float = 1e-3) -> int:
    c = spec.curve_beta_star
    p = spec.params
    return int(K.classify(float(x.s), float(x.i), p.herd, p.herd_star, p.i_max, band,
                          c.par, c.tab, c.slopes))


def classify_boundary(spec: RegionSpec, x: State, band: float = 1e-3) -> BoundaryClass:
    return _FROM_CODE[class_code(spec, x, band)]


def worst_past(x0: State, p: Params, dt: float) -> Sampled:
    """Past with i = i_max on [-h, -dt], ramping linearly to ``x0.i`` at 0."""
    dt = min(dt, 0.5 * p.delay)
    return Sampled((-p.delay, -dt, 0.0), (x0.s,) * 3, (p.i_max, p.i_max, x0.i))


def sample_region(region: str, spec: RegionSpec, rng: np.random.Generator) -> State:
    """Uniform draw from the region by rejection from its bounding box."""
    c = spec.curve(region)
    while True:
        x = State(float(rng.uniform(0.0, c.s_hat)), float(rng.uniform(0.0, c.i_max)))
        if contains(region, spec, x):
            return x


@dataclass(frozen=True)
class ProbeReport:
    n_trials: int
    max_violation: float
    worst_trial: int


def _invariance_trial(args):
    spec, seed, cfg, horizon = args
    p = spec.params
    rng = np.random.default_rng(seed)
    x0 = sample_region("A", spec, rng)
    b = rng.uniform(p.beta_star, p.beta, size=int(np.ceil(horizon)))
    dt = cfg.resolve(p)[0]
    traj = integrate_schedule(worst_past(x0, p, dt), b, 1.0, p,
                              StepConfig(cfg.dt, horizon), check=False)
    return float(np.max(traj.i) - p.i_max)


def invariance_probe(spec: RegionSpec, n_trials: int = 200, seed: int = 0,
                     cfg: Optional[StepConfig] = None, horizon: float = 300.0,
                     workers: Optional[int] = None) -> ProbeReport:
    """Random initial states in A with the worst past, random 1-day rate pieces.

    Reports the largest ``max_t i(t) - i_max`` over the trials.
    """
    p = spec.params
    cfg = cfg or StepConfig(dt=p.delay / 600)
    seeds = np.random.SeedSequence(seed).spawn(n_trials)
    viol = pmap(_invariance_trial, [(spec, s, cfg, horizon) for s in seeds], workers)
    k = int(np.argmax(viol))
    return ProbeReport(n_trials, float(viol[k]), k)


def maximality_probe(spec: RegionSpec, delta: float, cfg: Optional[StepConfig] = None,
                     horizon: float = 200.0, tol: float = 1e-9,
                     s0: Optional[float] = None) -> Optional[float]:
    """First grid time with ``i > i_max + tol`` when starting ``delta`` above the A frontier.

    The rate is held at beta. The run is a chain of segments of length
    ``h - dt``; each segment restarts from the current state with a fresh past
    equal to i_max on ``[-h, -dt]``, so the delayed term stays at i_max
    throughout. Returns None when no violation occurs before ``horizon``.
    """
    if delta < 0.0:
        raise ValidationError(f"delta must be non-negative, got {delta}")
    p = spec.params
    c = spec.curve_beta
    cfg = cfg or StepConfig(dt=0.01)
    dt, nh, _ = cfg.resolve(p)
    if nh < 2:
        raise ValidationError("maximality probe needs at least two steps per delay")
    if s0 is None:
        s0 = 0.5 * (c.s_lo + c.s_hat)
    x = State(s0, float(c(s0)) + delta)
    seg_cfg = StepConfig(dt, p.delay)
    t0 = 0.0
    if x.i > p.i_max + tol:
        return 0.0
    while t0 < horizon:
        traj = integrate_schedule(worst_past(x, p, dt), [p.beta], p.delay, p, seg_cfg,
                                  check=False)
        # drop the last step: it reads the ramp on [-dt, 0]
        i = traj.i[:nh]
        over = np.nonzero(i > p.i_max + tol)[0]
        if over.size:
            t = t0 + over[0] * dt
            return t if t < horizon else None
        t0 += (nh - 1) * dt
        x = State(float(traj.s[nh - 1]), float(traj.i[nh - 1]))
    return None


def curve_sup_distance(c1: FrontierCurve, c2: FrontierCurve, n: int = 4096) -> float:
    """Sup distance between two frontiers over the union of their domains.

    Each curve is clipped to its own domain, i.e. continued by i_max to the
    left and by 0 to the right, which compares the regions' upper boundaries.
    """
    lo = min(c1.s_lo, c2.s_lo)
    hi = max(c1.s_hat, c2.s_hat)
    if max(c1.s_lo, c2.s_lo) >= min(c1.s_hat, c2.s_hat):
        raise DomainError("curve domains do not overlap")
    s = np.linspace(lo, hi, n)
    return float(np.max(np.abs(_clipped(c1, s) - _clipped(c2, s))))


def _clipped(c: FrontierCurve, s: np.ndarray) -> np.ndarray:
    return c(np.clip(s, c.s_lo, c.s_hat))
