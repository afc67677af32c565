import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from viadel.model import (Constant, DomainError, ExpRecovery, ExpSurge, Params, Sampled,
                          State, ValidationError, check_admissible, eval_initial, ic_from_dict,
                          ic_to_dict, in_C, is_degenerate, min_lipschitz, psi_truncate,
                          rhs_delayed)


def test_params_validation(p):
    with pytest.raises(ValidationError):
        p.with_(beta_star=0.6)
    with pytest.raises(ValidationError):
        p.with_(gamma=0.0)
    with pytest.raises(ValidationError):
        p.with_(delay=-1.0)
    with pytest.raises(ValidationError):
        p.with_(lipschitz=0.01)
    assert p.with_(lipschitz=0.0105).lipschitz == 0.0105


def test_params_dict_roundtrip(p):
    q = p.with_(lipschitz=0.02)
    assert Params.from_dict(q.to_dict()) == q
    with pytest.raises(ValidationError):
        Params.from_dict({**p.to_dict(), "alpha": 1.0})


def test_rhs_examples(p):
    ds, di = rhs_delayed(State(0.4, 0.01), 0.02, 0.5, p)
    assert ds == pytest.approx(-0.004, abs=1e-15)
    assert di == pytest.approx(0.003286, abs=1e-15)
    assert rhs_delayed(State(0.3, 0.01), 0.0, 0.3, p) == (-0.0, -p.gamma * 0.01)
    ds, di = rhs_delayed(State(0.45, 0.001), 0.001, 0.5, p)
    assert ds == pytest.approx(-2.25e-4, rel=1e-12)
    assert di == pytest.approx(2.25e-4 - 7.14e-5, rel=1e-12)


@given(st.floats(0, 1), st.floats(0, 0.021), st.floats(0, 0.021), st.floats(0.185, 0.5))
def test_rhs_sums_to_recovery(s, i, i_del, b):
    from viadel.model import DEFAULT_PARAMS as p
    ds, di = rhs_delayed(State(s, i), i_del, b, p)
    total = ds + di
    assert abs(total + p.gamma * i) <= np.spacing(max(abs(ds), abs(di), 1e-300))


def test_psi_examples(p):
    q = p.with_(lipschitz=0.0105)
    # Lh = 0.005
    assert psi_truncate(0.010, q, 0.01, 0.5) == pytest.approx(0.015)
    assert psi_truncate(0.020, q, 0.01, 0.5) == 0.021
    assert psi_truncate(-0.030, q, 0.01, 0.5) == -0.021
    with pytest.raises(ValidationError):
        psi_truncate(0.01, p)


def test_psi_properties(p):
    rng = np.random.default_rng(1)
    a, b = rng.uniform(-0.05, 0.05, (2, 100_000))
    pa, pb = psi_truncate(a, p, 0.01, 0.5), psi_truncate(b, p, 0.01, 0.5)
    assert np.all(np.abs(pa - pb) <= np.abs(a - b) + 1e-17)
    assert np.all((pa - pb) * (a - b) >= 0)
    i = np.linspace(0, p.i_max, 1001)
    v = psi_truncate(i, p, 0.01, 0.5)
    assert np.all(i <= v) and np.all(v <= p.i_max)


def test_min_lipschitz(p):
    assert min_lipschitz(p) == pytest.approx(0.0105)
    assert min_lipschitz(Params(0.3, 0.3, 0.2, 0.021, 1.0)) == pytest.approx(0.021 * 0.3)
    assert min_lipschitz(Params(0.9, 0.5, 0.2, 1.0, 1.0)) == pytest.approx(0.9)


def test_eval_initial_examples(p):
    assert eval_initial(Constant(State(0.45, 0.001)), -3.0, p) == State(0.45, 0.001)
    rec = ExpRecovery(0.45, 0.001)
    assert eval_initial(rec, 0.0, p) == State(0.45, 0.001)
    assert eval_initial(rec, -6.0, p).i == pytest.approx(0.001 * math.exp(0.4284), rel=1e-14)
    surge = ExpSurge(0.45, 0.001)
    assert eval_initial(surge, -6.0, p).i == pytest.approx(0.021, rel=1e-14)
    assert eval_initial(surge, 0.0, p).i == pytest.approx(0.001, abs=1e-18)
    with pytest.raises(DomainError):
        eval_initial(rec, 0.5, p)
    with pytest.raises(DomainError):
        eval_initial(rec, -6.5, p)


def test_surge_strictly_decreasing(p):
    t = np.linspace(-p.delay, 0, 2001)
    _, i = ExpSurge(0.45, 0.001).arrays(t, p)
    assert np.all(np.diff(i) < 0)


def test_in_C(p):
    assert in_C(State(0.1, 0.01), p)
    assert not in_C(State(0.1, 0.03), p)
    assert not in_C(State(0.6, 0.5), p)


def test_admissibility_checks(p):
    check_admissible(ExpSurge(0.45, 0.001), p)
    with pytest.raises(ValidationError, match="leaves C"):
        check_admissible(ExpRecovery(0.45, 0.02), p)
    steep = Sampled((-6.0, -0.01, 0.0), (0.3,) * 3, (0.021, 0.021, 0.0))
    check_admissible(steep, p)
    with pytest.raises(ValidationError, match="Lipschitz"):
        check_admissible(steep, p, lipschitz=0.0105)
    with pytest.raises(ValidationError, match="cover"):
        Sampled((-5.0, 0.0), (0.3, 0.3), (0.0, 0.0)).arrays(np.zeros(1), p)


def test_degenerate_flag(p):
    assert is_degenerate(Constant(State(0.3, 0.0)), p)
    assert not is_degenerate(Constant(State(0.3, 1e-9)), p)


@pytest.mark.parametrize("ic", [
    Constant(State(0.4, 0.002)), ExpRecovery(0.4, 0.002), ExpSurge(0.4, 0.002, 3.0),
    Sampled((-6.0, 0.0), (0.4, 0.4), (0.01, 0.002)),
])
def test_ic_dict_roundtrip(ic):
    assert ic_from_dict(ic_to_dict(ic)) == ic


def test_ic_from_dict_errors():
    with pytest.raises(ValidationError):
        ic_from_dict({"kind": "spline"})
    with pytest.raises(ValidationError, match="misses"):
        ic_from_dict({"kind": "constant", "s0": 0.4})
