import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from viadel.curves import gamma_closed_form
from viadel.model import DomainError, State, ValidationError
from viadel.regions import (BoundaryClass, classify_boundary, contains, curve_sup_distance,
                            invariance_probe, maximality_probe, region_spec)

_SPEC = {}


def test_membership_examples(spec):
    assert contains("B", spec, State(0.45, 0.001))
    assert not contains("A", spec, State(0.45, 0.001))
    assert contains("A", spec, State(0.1, 0.02))
    assert contains("A", spec, State(spec.params.herd, spec.params.i_max))
    assert not contains("B", spec, State(0.3, 0.03))
    with pytest.raises(ValidationError):
        contains("C", spec, State(0.1, 0.0))


def test_classify_examples(spec, p):
    g = spec.curve_beta_star
    assert classify_boundary(spec, State(0.2, 0.021)) is BoundaryClass.ON_S1
    assert classify_boundary(spec, State(0.42, g(0.42))) is BoundaryClass.ON_S2
    assert classify_boundary(spec, State(0.1, 0.001)) is BoundaryClass.INTERIOR
    assert classify_boundary(spec, State(p.herd_star, p.i_max)) is BoundaryClass.ON_S1
    assert classify_boundary(spec, State(0.5, 0.01)) is BoundaryClass.OUTSIDE


def test_set_inclusions(p):
    q = p.with_(lipschitz=0.0105, delay=1.0)
    cont, lip, free = (region_spec(q, v) for v in ("continuous", "lipschitz", "delay_free"))
    rng = np.random.default_rng(3)
    pts = rng.uniform([0, 0], [0.6, 0.025], (100_000, 2))
    for s, i in pts:
        x = State(s, i)
        if contains("A", cont, x):
            assert contains("B", cont, x)
            assert contains("A", lip, x)
        if contains("A", lip, x):
            assert contains("A", free, x)
        if contains("B", lip, x):
            assert contains("B", free, x)


@settings(max_examples=300, deadline=None)
@given(st.floats(0.0, 0.6), st.floats(0.0, 0.025))
def test_classification_stable_under_tiny_moves(s, i):
    from viadel.model import DEFAULT_PARAMS
    spec = _SPEC.setdefault("s", region_spec(DEFAULT_PARAMS))
    base = classify_boundary(spec, State(s, i))
    for ds, di in ((1e-9, 0), (-1e-9, 0), (0, 1e-9), (0, -1e-9)):
        moved = classify_boundary(spec, State(s + ds, i + di))
        assert {base, moved} != {BoundaryClass.INTERIOR, BoundaryClass.OUTSIDE}



def test_invariance_examples(spec, p):
    rep = invariance_probe(spec, 8, seed=5, workers=1)
    assert rep.max_violation <= 1e-6 and rep.n_trials == 8
    assert invariance_probe(spec, 8, seed=5, workers=2) == rep


def test_maximality_examples(spec, p):
    small = maximality_probe(spec, 0.02 * p.i_max)
    big = maximality_probe(spec, 0.5 * p.i_max)
    assert small is not None and small < 200
    assert big is not None and big < small
    assert maximality_probe(spec, 0.0) is None
    with pytest.raises(ValidationError):
        maximality_probe(spec, -1.0)


def test_sup_distance(p):
    a = gamma_closed_form(p.beta, p)
    assert curve_sup_distance(a, a) == 0.0
    b = gamma_closed_form(p.beta_star, p)
    with pytest.raises(DomainError):
        curve_sup_distance(a, b)
