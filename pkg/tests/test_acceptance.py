"""Acceptance criteria, one test each; a PASS/FAIL line per criterion is printed
in the terminal summary (see conftest.py)."""
import time

import numpy as np
import pytest

from viadel.cli import main
from viadel.control import PolicyConfig, asymptotics, run_greedy, weak_monotone_check
from viadel.curves import (build_gamma_lh, delay_free_curve, event_s_hat, gamma_closed_form,
                           s_hat_closed_form)
from viadel.dde import StepConfig, integrate_schedule
from viadel.model import (DEFAULT_PARAMS as P, Constant, ExpRecovery, ExpSurge, State,
                          check_admissible)
from viadel.regions import (contains, curve_sup_distance, invariance_probe, maximality_probe,
                            region_spec, sample_region)

SCENARIOS = {
    "phi0": (Constant(State(0.45, 0.001)), 37.99, 39.54),
    "phi1": (ExpRecovery(0.45, 0.001), 38.02, 39.58),
    "phi2": (ExpSurge(0.45, 0.001), 39.98, 42.03),
}
CFG = PolicyConfig(band=1e-3)
STEP = StepConfig(dt=0.01)


@pytest.fixture(scope="module")
def scenario_runs():
    run_greedy(SCENARIOS["phi0"][0], P, CFG, StepConfig(0.01, 20.0))  # warm the kernels
    out = {}
    for name, (ic, _, _) in SCENARIOS.items():
        t0 = time.perf_counter()
        res = run_greedy(ic, P, CFG, STEP)
        out[name] = (res, time.perf_counter() - t0)
    return out


def _random_viable_ic(rng, spec):
    while True:
        x = sample_region("B", spec, rng)
        kind = rng.integers(3)
        if kind == 0:
            ic = Constant(x)
        elif kind == 1:
            ic = ExpRecovery(x.s, x.i)
        else:
            ic = ExpSurge(x.s, x.i, rng.uniform(0.5, 5.0))
        try:
            check_admissible(ic, P)
        except ValueError:
            continue
        return ic


@pytest.fixture(scope="module")
def random_runs():
    spec = region_spec(P)
    rng = np.random.default_rng(2024)
    return [run_greedy(_random_viable_ic(rng, spec), P, CFG, STEP) for _ in range(200)]


def test_criterion_01_scenario_costs(scenario_runs):
    for name, (_, lo, hi) in SCENARIOS.items():
        res, elapsed = scenario_runs[name]
        assert lo <= res.J <= hi, f"{name}: J={res.J}"
        assert elapsed < 5.0, f"{name}: {elapsed:.2f} s"


def test_criterion_02_not_better_than_optimum(scenario_runs):
    assert scenario_runs["phi0"][0].J >= 38.3


def test_criterion_03_icu_constraint(scenario_runs, random_runs):
    cap = 0.021 * (1 + 1e-3)
    for res, _ in scenario_runs.values():
        assert res.max_i <= cap
    worst = max(r.max_i for r in random_runs)
    assert worst <= cap, f"max i over random runs {worst}"


def test_criterion_04_invariance():
    t0 = time.perf_counter()
    rep = invariance_probe(region_spec(P), n_trials=200, seed=11, cfg=StepConfig(P.delay / 600))
    assert rep.max_violation <= 1e-6
    assert time.perf_counter() - t0 < 60.0


def test_criterion_05_maximality():
    spec = region_spec(P)
    t_hit = maximality_probe(spec, 0.02 * P.i_max)
    assert t_hit is not None and t_hit < 200.0
    assert maximality_probe(spec, 0.0) is None


def _strictly_decreasing_concave(curve, n=10_000):
    s, i = curve.sample(n)
    d2 = np.diff(i, 2)
    return bool(np.all(np.diff(i) < 0)), float(d2.max())


def test_criterion_06_curve_identities():
    g = gamma_closed_form(P.beta, P)
    assert abs(g(P.gamma / P.beta) - P.i_max) <= 1e-12
    assert abs(g(s_hat_closed_form(P.beta, P))) <= 1e-8
    for b in (P.beta, P.beta_star):
        assert abs(event_s_hat(b, P)[1] - s_hat_closed_form(b, P)) <= 1e-6
    curves = [gamma_closed_form(P.beta, P), gamma_closed_form(P.beta_star, P),
              delay_free_curve(P.beta, P), delay_free_curve(P.beta_star, P)]
    for h in (1.0, 0.1):
        curves += [build_gamma_lh(P.beta, 0.0105, h, P), build_gamma_lh(P.beta_star, 0.0105, h, P)]
    for c in curves:
        dec, d2max = _strictly_decreasing_concave(c)
        assert dec, f"{c.label} b={c.b_level} not strictly decreasing"
        assert d2max <= 1e-8, f"{c.label} b={c.b_level}: second difference {d2max}"


def test_criterion_07_ordering_and_convergence():
    L = 0.0105
    hs = (6.0, 3.0, 1.0, 0.3, 0.1, 0.01)
    problems = []
    dists = []
    for h in hs:
        lh = build_gamma_lh(P.beta, L, h, P)
        cf, free = gamma_closed_form(P.beta, P), delay_free_curve(P.beta, P)
        s = np.linspace(cf.s_lo, free.s_hat, 10_000)
        v = [c(np.clip(s, c.s_lo, c.s_hat)) for c in (cf, lh, free)]
        if np.any(v[0] > v[1] + 1e-8) or np.any(v[1] > v[2] + 1e-8):
            problems.append(f"ordering fails at h={h}")
        if L * h >= P.i_max and curve_sup_distance(lh, cf) > 1e-6:
            problems.append(f"h={h}: Lh >= i_M but curve differs from closed form")
        dists.append(curve_sup_distance(lh, free))
    for (h1, d1), (h2, d2) in zip(zip(hs, dists), zip(hs[1:], dists[1:])):
        if not d2 < d1:
            problems.append(f"distance not strictly decreasing from h={h1} ({d1:.6g}) "
                            f"to h={h2} ({d2:.6g})")
    if not dists[-1] < 5e-3 * P.i_max:
        problems.append(f"h=0.01 distance {dists[-1]:.4g} >= 5e-3*i_M = {5e-3 * P.i_max:.4g}")
    assert not problems, "; ".join(problems)


def test_criterion_08_weak_monotonicity():
    rng = np.random.default_rng(8)
    worst = -np.inf
    for _ in range(100):
        s0 = rng.uniform(0.0, P.gamma / P.beta)
        i0 = rng.uniform(0.0, P.i_max)
        ic = [Constant(State(s0, i0)), ExpSurge(s0, i0),
              ExpRecovery(s0, i0 * np.exp(-P.gamma * P.delay))][rng.integers(3)]
        tr = integrate_schedule(ic, rng.uniform(P.beta_star, P.beta, 100), 1.0, P,
                                StepConfig(0.01, 100.0))
        worst = max(worst, weak_monotone_check(tr, P))
    assert worst <= 1e-9, f"violation {worst}"


def test_criterion_09_asymptotics(scenario_runs, random_runs):
    runs = [r for r, _ in scenario_runs.values()] + random_runs
    checked = 0
    for res in runs:
        if not res.terminated:
            continue
        a = asymptotics(res, P)
        assert a.below_herd, f"s_inf={a.s_inf}"
        if a.residual is not None:
            assert a.residual < 1e-2
            checked += 1
    assert checked >= 3


def test_criterion_10_richardson():
    ic = Constant(State(0.45, 0.001))
    ends = []
    for dt in (0.04, 0.02, 0.01):
        tr = integrate_schedule(ic, [P.beta], 1.0, P, StepConfig(dt, 50.0))
        ends.append(np.array([tr.s[-1], tr.i[-1]]))
    ratio = np.max(np.abs(ends[0] - ends[1])) / np.max(np.abs(ends[1] - ends[2]))
    assert 8.0 <= ratio <= 24.0, f"ratio {ratio}"


def test_criterion_11_surface_determinism(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(["cost-surface", "--resolution", "64", "--workers", "1", "--out", "w1"]) == 0
    assert main(["cost-surface", "--resolution", "64", "--workers", "8", "--out", "w8"]) == 0
    assert (tmp_path / "w1.csv").read_bytes() == (tmp_path / "w8.csv").read_bytes()


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-v"]))
