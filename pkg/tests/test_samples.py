import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drcc.samples import (
    InfeasibleCurveError,
    RiskBounds,
    RiskCost,
    SampleSet,
    alpha_for_level,
    alpha_for_level_exact,
    build_var_curve,
    critical_index,
    empirical_quantile,
    partial_sum_excess,
    var_point,
    worst_case_var_continuous,
    worst_case_var_finite,
)
from drcc.solve.oracles import var_bisection_oracle

from conftest import TOY, random_samples

samples_st = st.builds(
    lambda vals, eps: SampleSet(vals, eps),
    st.lists(st.floats(-50, 50, allow_nan=False), min_size=1, max_size=30),
    st.floats(0.01, 10.0),
)
alpha_st = st.floats(0.01, 0.99)


# -- types -------------------------------------------------------------------


def test_sample_set_sorts_and_validates():
    s = SampleSet([2, 10, 6, 4, 8], 0.4)
    assert s.values.tolist() == TOY
    assert s.n == 5 and s.level(1) == 10.0
    with pytest.raises(ValueError):
        SampleSet([], 0.4)
    with pytest.raises(ValueError):
        SampleSet([1.0], 0.0)
    with pytest.raises(ValueError):
        SampleSet([math.nan], 0.1)
    with pytest.raises(ValueError):
        s.values[0] = 1.0


def test_risk_cost_and_bounds():
    assert RiskCost("linear", 3.0)(0.5) == 1.5
    assert RiskCost("custom", evaluator=lambda a: a * a)(0.5) == 0.25
    with pytest.raises(ValueError):
        RiskCost("custom", evaluator=lambda a: -a)
    with pytest.raises(ValueError):
        RiskCost("linear", -1.0)
    with pytest.raises(ValueError):
        RiskBounds(0.3, 0.5)
    with pytest.raises(ValueError):
        RiskBounds(1.0)


# -- worked examples ---------------------------------------------------------


def test_partial_sum_excess_examples(toy):
    assert partial_sum_excess(toy, 8.0, 0.6) == pytest.approx(0.4, abs=1e-12)
    assert partial_sum_excess(toy, 10.0, 1e-9) == pytest.approx(0.0, abs=1e-9)
    assert partial_sum_excess(toy, 26.0 / 3.0, 0.5) == pytest.approx(0.4, abs=1e-12)
    with pytest.raises(ValueError):
        partial_sum_excess(toy, 8.0, 1.0)
    with pytest.raises(ValueError):
        partial_sum_excess(toy, 8.0, 0.0)


def test_critical_index_examples():
    assert critical_index(SampleSet(TOY, 0.4), 0.6) == 2
    assert critical_index(SampleSet(TOY, 0.5), 0.6) == 1
    assert critical_index(SampleSet(TOY, 3.0), 0.4) is None


def test_var_examples():
    assert worst_case_var_continuous(SampleSet(TOY, 0.4), 0.6) == pytest.approx(8.0, abs=1e-12)
    assert worst_case_var_continuous(SampleSet(TOY, 0.5), 0.6) == pytest.approx(8.25, abs=1e-12)
    assert worst_case_var_continuous(SampleSet(TOY, 0.4), 0.5) == pytest.approx(26.0 / 3.0, abs=1e-12)
    assert worst_case_var_finite(SampleSet(TOY, 0.4), 0.6) == 8.0
    assert worst_case_var_finite(SampleSet(TOY, 0.5), 0.6) == 10.0


def test_flat_samples_overflow():
    s = SampleSet([3.0] * 6, 0.2)
    for a in (0.1, 0.5, 0.9):
        pt = var_point(s, a)
        assert pt.overflow
        assert pt.finite == pytest.approx(3.0 + 0.2 / a, abs=1e-12)
        assert pt.continuous == pytest.approx(pt.finite, abs=1e-12)


def test_alpha_for_level_examples(toy):
    assert alpha_for_level_exact(toy, 2) == pytest.approx(0.6, abs=1e-15)
    assert alpha_for_level_exact(toy, 1) == pytest.approx(0.4, abs=1e-15)
    assert alpha_for_level_exact(toy, 5) is None
    assert alpha_for_level(toy, 5) is None
    assert alpha_for_level(toy, 2) == pytest.approx(0.6, abs=1e-9)
    with pytest.raises(IndexError):
        alpha_for_level(toy, 0)


def test_var_curve_examples(toy):
    c = build_var_curve(toy, RiskBounds(0.7))
    assert c.n_prime == 2
    np.testing.assert_allclose(c.sample_alphas, [0.4, 0.6], atol=1e-9)
    c = build_var_curve(toy, RiskBounds(0.9))
    assert c.n_prime == 3
    np.testing.assert_allclose(c.sample_alphas, [0.4, 0.6, 0.8], atol=1e-9)
    assert c.levels.tolist() == [10.0, 8.0, 6.0]
    assert c.preprocess_seconds >= 0.0
    with pytest.raises(InfeasibleCurveError):
        build_var_curve(SampleSet(TOY, 3.0), RiskBounds(0.4))


def test_curve_clamps_tiny_alpha_to_alpha_min():
    s = SampleSet([100.0] + [0.0] * 1999, 1e-6)
    assert alpha_for_level_exact(s, 1) < 1e-3
    c = build_var_curve(s, RiskBounds(0.5, 1e-3))
    assert c.sample_alphas[0] == 1e-3


# -- properties --------------------------------------------------------------


@settings(max_examples=200, deadline=None)
@given(samples_st, alpha_st)
def test_defining_equation(s, a):
    t = worst_case_var_continuous(s, a)
    assert partial_sum_excess(s, t, a) == pytest.approx(s.epsilon, abs=1e-9 * max(1.0, s.epsilon, abs(t)))


@settings(max_examples=200, deadline=None)
@given(samples_st, alpha_st, alpha_st)
def test_monotone_in_alpha(s, a1, a2):
    a1, a2 = sorted((a1, a2))
    p1, p2 = var_point(s, a1), var_point(s, a2)
    tol = 1e-9 * max(1.0, abs(p1.continuous))
    assert p1.continuous >= p2.continuous - tol
    assert p1.finite >= p2.finite - tol


@settings(max_examples=200, deadline=None)
@given(samples_st, alpha_st)
def test_sandwich(s, a):
    pt = var_point(s, a)
    tol = 1e-9 * max(1.0, abs(pt.finite))
    assert pt.finite >= pt.continuous - tol
    assert pt.continuous >= empirical_quantile(s, a) - tol


@settings(max_examples=100, deadline=None)
@given(samples_st, st.floats(0.0, 60.0), alpha_st, alpha_st)
def test_partial_sum_monotone(s, v, a1, a2):
    a1, a2 = sorted((a1, a2))
    assert partial_sum_excess(s, v, a1) <= partial_sum_excess(s, v, a2) + 1e-12
    assert partial_sum_excess(s, v, a1) <= partial_sum_excess(s, v + 1.0, a1) + 1e-12


def test_matches_bisection_oracle(rng):
    for _ in range(300):
        s = random_samples(rng)
        a = float(rng.uniform(0.01, 0.99))
        assert worst_case_var_continuous(s, a) == pytest.approx(var_bisection_oracle(s, a), abs=1e-9)


def test_level_round_trip_and_closed_form(rng):
    for _ in range(200):
        s = random_samples(rng, n_max=30)
        for n in range(1, s.n + 1):
            a_bis = alpha_for_level(s, n)
            a_ex = alpha_for_level_exact(s, n)
            assert (a_bis is None) == (a_ex is None)
            if a_bis is None:
                continue
            assert a_bis == pytest.approx(a_ex, abs=1e-9)
            assert worst_case_var_finite(s, a_bis) == s.level(n)


def test_curve_alphas_nondecreasing(rng):
    for _ in range(100):
        s = random_samples(rng)
        try:
            c = build_var_curve(s, RiskBounds(0.5))
        except InfeasibleCurveError:
            continue
        assert np.all(np.diff(c.sample_alphas) >= -1e-12)
        for a, lv in zip(c.sample_alphas, c.levels):
            assert worst_case_var_finite(s, float(a)) == lv
