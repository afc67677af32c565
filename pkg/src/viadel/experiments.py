"""Built-in scenarios, cost surface, delay sweep and file I/O."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ._parallel import pmap
from .control import ClosedLoopResult, PolicyConfig, run_greedy
from .curves import build_gamma_lh, delay_free_curve
from .dde import StepConfig
from .model import (DEFAULT_PARAMS, Constant, ExpRecovery, ExpSurge, InitialCondition,
                    Params, Sampled, SolverError, State, ValidationError, ic_from_dict)
from .regions import RegionSpec, contains, curve_sup_distance, region_spec

SCENARIOS = ("phi0", "phi1", "phi2", "file")
X0 = State(0.45, 0.001)
DEFAULT_H_LIST = (6.0, 3.0, 1.0, 0.3, 0.1, 0.01)


@dataclass
class ExperimentConfig:
    params: Params = DEFAULT_PARAMS
    scenario: str = "phi0"
    ic_file: Optional[str] = None
    variant: str = "continuous"
    s2_rule: str = "current"
    band: float = 1e-3
    dt: float = 0.01
    t_max: float = 1000.0
    out: Optional[str] = None
    resolution: int = 128
    h_list: tuple = DEFAULT_H_LIST
    workers: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValidationError(f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")
        if self.scenario == "file":
            if not self.ic_file:
                raise ValidationError("scenario 'file' needs an ic_file")
            if not Path(self.ic_file).is_file():
                raise ValidationError(f"ic file not found: {self.ic_file}")
        if self.resolution < 8:
            raise ValidationError(f"resolution must be at least 8, got {self.resolution}")
        h = np.asarray(self.h_list, dtype=float)
        if h.size == 0 or np.any(h <= 0.0) or np.any(np.diff(h) >= 0.0):
            raise ValidationError("h list must be positive and strictly decreasing")
        if self.workers is not None and self.workers < 1:
            raise ValidationError("workers must be at least 1")

    def policy(self, region: Optional[RegionSpec] = None) -> PolicyConfig:
        return PolicyConfig(self.variant, self.band, self.s2_rule, region)

    def step(self) -> StepConfig:
        return StepConfig(self.dt, self.t_max)


# --- scenarios -----------------------------------------------------------------

def load_ic(path: str) -> InitialCondition:
    """Read a history from JSON (``{"kind": ...}``) or CSV with header t,s,i."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json":
        try:
            return ic_from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc})") from None
    rows = list(csv.reader(text.splitlines()))
    if not rows or [c.strip() for c in rows[0]] != ["t", "s", "i"]:
        raise ValidationError(f"{path}: expected CSV header t,s,i")
    try:
        return Sampled.from_rows([r for r in rows[1:] if r])
    except ValueError as exc:
        raise ValidationError(f"{path}: {exc}") from None


def scenario_ic(cfg: ExperimentConfig) -> InitialCondition:
    if cfg.scenario == "phi0":
        return Constant(X0)
    if cfg.scenario == "phi1":
        return ExpRecovery(X0.s, X0.i)
    if cfg.scenario == "phi2":
        return ExpSurge(X0.s, X0.i)
    return load_ic(cfg.ic_file)


def _nonmonotone(x: np.ndarray, tol: float = 1e-12) -> bool:
    d = np.diff(x)
    return bool(np.any(d > tol) and np.any(d < -tol))


def scenario_summary(res: ClosedLoopResult) -> dict:
    """JSON summary of a run plus whether u or i wobble during the first two delays."""
    traj = res.trajectory
    n = int(round(2 * traj.params.delay / traj.dt)) + 1
    out = res.summary()
    out["terminated"] = res.terminated
    out["max_i"] = res.max_i
    out["initial_nonmonotone_u"] = _nonmonotone(res.u[:n])
    out["initial_nonmonotone_i"] = _nonmonotone(traj.i[:n])
    return out


def run_scenario(cfg: ExperimentConfig) -> tuple[ClosedLoopResult, dict]:
    ic = scenario_ic(cfg)
    res = run_greedy(ic, cfg.params, cfg.policy(), cfg.step())
    summary = scenario_summary(res)
    if cfg.out:
        stem = Path(cfg.out)
        stem.parent.mkdir(parents=True, exist_ok=True)
        write_trajectory_csv(stem.with_suffix(".csv"), res)
        write_json(stem.with_suffix(".json"), summary)
    return res, summary


# --- cost surface ----------------------------------------------------------------

@dataclass
class CostSurface:
    s: np.ndarray
    i: np.ndarray
    J: np.ndarray  # shape (len(s), len(i)); NaN outside B
    meta: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)


def surface_grid(region: RegionSpec, resolution: int) -> tuple[np.ndarray, np.ndarray]:
    c = region.curve_beta_star
    return np.linspace(0.0, c.s_hat, resolution), np.linspace(0.0, c.i_max, resolution)


def _surface_column(args):
    s, i_values, p, policy, step = args
    out = []
    for i in i_values:
        x = State(float(s), float(i))
        if not contains("B", policy.region, x):
            out.append((math.nan, None))
            continue
        try:
            res = run_greedy(Constant(x), p, policy, step, check=False)
            out.append((res.J, None))
        except (SolverError, ValidationError) as exc:
            out.append((math.nan, str(exc)))
    return out


def cost_surface(cfg: ExperimentConfig) -> CostSurface:
    """Greedy cost for constant histories on a grid over the viable set."""
    p = cfg.params
    region = region_spec(p, cfg.variant)
    policy = cfg.policy(region)
    s_grid, i_grid = surface_grid(region, cfg.resolution)
    tasks = [(s, i_grid, p, policy, cfg.step()) for s in s_grid]
    cols = pmap(_surface_column, tasks, cfg.workers)
    J = np.array([[v for v, _ in col] for col in cols])
    failures = [(float(s_grid[a]), float(i_grid[b]), err)
                for a, col in enumerate(cols) for b, (_, err) in enumerate(col) if err]
    meta = {"variant": cfg.variant, "band": cfg.band, "s2_rule": cfg.s2_rule,
            "dt": cfg.dt, "resolution": cfg.resolution, "params": p.to_dict()}
    surf = CostSurface(s_grid, i_grid, J, meta, failures)
    if cfg.out:
        write_surface_csv(Path(cfg.out).with_suffix(".csv"), surf)
    return surf


# --- delay sweep -------------------------------------------------------------------

SWEEP_COLUMNS = ("h", "sup_dist_beta", "sup_dist_beta_star", "area_A", "area_B")


def _region_area(curve, p: Params) -> float:
    return curve.s_lo * p.i_max + curve.area()


def _sweep_row(args):
    h, L, p = args
    q = p.with_(delay=h, lipschitz=L)
    try:
        ca = build_gamma_lh(q.beta, L, h, q)
        cb = build_gamma_lh(q.beta_star, L, h, q)
    except (SolverError, ValidationError) as exc:
        return (h, math.nan, math.nan, math.nan, math.nan), str(exc)
    da = curve_sup_distance(ca, delay_free_curve(q.beta, q))
    db = curve_sup_distance(cb, delay_free_curve(q.beta_star, q))
    return (h, da, db, _region_area(ca, q), _region_area(cb, q)), None


def h_sweep(cfg: ExperimentConfig) -> tuple[list[tuple], list]:
    """Per-delay sup distances to the delay-free frontiers and region areas."""
    p = cfg.params
    if p.lipschitz is None:
        raise ValidationError("h sweep needs a Lipschitz constant")
    tasks = [(float(h), p.lipschitz, p) for h in cfg.h_list]
    out = pmap(_sweep_row, tasks, cfg.workers)
    rows = [r for r, _ in out]
    errors = [(r[0], e) for r, e in out if e]
    if cfg.out:
        write_rows_csv(Path(cfg.out).with_suffix(".csv"), SWEEP_COLUMNS, rows)
    return rows, errors


# --- file output ---------------------------------------------------------------------

def fmt(x) -> str:
    x = float(x)
    return "" if math.isnan(x) else "%.17g" % x


def write_rows_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])


def write_trajectory_csv(path, res: ClosedLoopResult) -> None:
    traj = res.trajectory
    cols = (traj.t, traj.s, traj.i, res.b, res.u, res.J_cum)
    write_rows_csv(path, ("t", "s", "i", "b", "u", "J_cum"), zip(*cols))


def write_surface_csv(path, surf: CostSurface) -> None:
    rows = ((s, i, surf.J[a, b]) for a, s in enumerate(surf.s) for b, i in enumerate(surf.i))
    write_rows_csv(path, ("s", "i", "J"), rows)


def write_curve_csv(path, s, i) -> None:
    write_rows_csv(path, ("s", "i"), zip(s, i))


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, allow_nan=False) + "\n")
