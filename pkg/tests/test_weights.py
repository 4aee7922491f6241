import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gamurn.errors import ConfigurationError
from gamurn.weights import (Family, Phase, TailRule, Verdict, WeightScheme, check_spb,
                            classify_phase, tail_sum, theta_k)


def zeta_tail(a, k):
    return float(mpmath.zeta(a, k))


@pytest.mark.parametrize("gamma", [1.5, 2.0, 3.0, 4.5])
@pytest.mark.parametrize("k", [1, 2, 7, 100, 5000])
def test_power_tail_matches_hurwitz_zeta(gamma, k):
    t = WeightScheme.power(gamma).reciprocal_tail(k, tol=1e-13)
    ref = zeta_tail(gamma, k)
    assert abs(t.value - ref) <= t.abs_error + 1e-15 * ref
    assert t.abs_error <= 1e-12


@pytest.mark.parametrize("q", [1, 2, 3])
def test_power_tail_higher_moments(q):
    t = WeightScheme.power(2.0).reciprocal_tail(4, q=q, tol=1e-14)
    assert t.value == pytest.approx(zeta_tail(2.0 * q, 4), rel=1e-12)


def test_tail_sum_helper_and_interval(power2):
    t = tail_sum(power2, 1, 1, 1e-12)
    assert t.value == pytest.approx(math.pi ** 2 / 6, rel=1e-12)
    lo, hi = t.interval
    assert lo <= math.pi ** 2 / 6 <= hi


def test_linear_tail_diverges():
    t = WeightScheme.linear().reciprocal_tail(3)
    assert t.divergent


def test_exponential_and_group_exponential_tails():
    e = WeightScheme.exponential(2.0)
    assert e.reciprocal_tail(3).value == pytest.approx(2 ** -3 / (1 - 0.5), rel=1e-14)
    g = WeightScheme.group_exponential()
    ref = float(mpmath.nsum(lambda j: mpmath.exp(-(8 + j)), [2, mpmath.inf]))
    assert g.reciprocal_tail(2, group=2).value == pytest.approx(ref, rel=1e-13)


def test_table_power_extend_tail():
    vals = [1.0, 4.0, 9.0]
    t = WeightScheme.table(vals, TailRule.POWER_EXTEND, gamma=2.0)
    assert t.reciprocal_tail(1, tol=1e-13).value == pytest.approx(math.pi ** 2 / 6, rel=1e-11)
    assert t.summable() is True


def test_table_without_rule():
    t = WeightScheme.table([1.0, 2.0])
    assert t.summable() is None
    with pytest.raises(ConfigurationError):
        t.log_table(5)
    with pytest.raises(ConfigurationError):
        t.log_eval(1, 3)


def test_repeat_last_not_summable():
    t = WeightScheme.table([1.0, 2.0], TailRule.REPEAT_LAST)
    assert t.summable() is False
    assert t.eval(1, 10) == 2.0


@settings(max_examples=40, deadline=None)
@given(gamma=st.floats(0.2, 4.0), n=st.integers(1, 200))
def test_log_table_agrees_with_eval(gamma, n):
    s = WeightScheme.power(gamma)
    tab = s.log_table(n)
    assert tab[0] == -math.inf
    assert tab[n] == pytest.approx(math.log(s.eval(1, n)), abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(k=st.integers(1, 400), J=st.integers(3, 8))
def test_tail_power_sum_bound_dominates(k, J):
    s = WeightScheme.power(2.0)
    bound = s.tail_power_sum_bound(k, J)
    F = [zeta_tail(2.0, j) for j in range(k + 1, k + 2001)]
    assert sum(x ** J for x in F) <= bound


def test_group_exponential_offsets():
    g = WeightScheme.group_exponential()
    assert g.log_eval(3, 2) == pytest.approx(27 + 2)
    assert np.allclose(g.group_log_offset([1, 2, 3]), [1, 8, 27])
    assert g.group_dependent


def test_serialization_roundtrip():
    for s in (WeightScheme.power(2.5), WeightScheme.linear(), WeightScheme.constant(3.0),
              WeightScheme.exponential(1.5), WeightScheme.group_exponential(),
              WeightScheme.table([1, 2, 5], "power_extend", gamma=2.0)):
        assert WeightScheme.from_json(s.to_json()) == s


def test_invalid_constructions():
    with pytest.raises(ConfigurationError):
        WeightScheme.power(0.0)
    with pytest.raises(ConfigurationError):
        WeightScheme.table([1.0, -1.0])
    with pytest.raises(ConfigurationError):
        WeightScheme.from_dict({"family": "nope"})
    with pytest.raises(ConfigurationError):
        WeightScheme.power(2).reciprocal_tail(0)


def test_theta_k_definition(power2):
    p = 0.5
    ref = (1 - p) / math.sqrt(2 * zeta_tail(4.0, 4))
    assert theta_k(power2, p, 3) == pytest.approx(ref, rel=1e-10)


def test_check_spb_power2(power2):
    chk = check_spb(power2, 0.5)
    assert chk.holds
    assert chk.evidence.analytic
    assert chk.summable_reciprocals is Verdict.HOLDS
    sums = [v for _, v in chk.evidence.partial_product_sums]
    assert all(b >= a for a, b in zip(sums, sums[1:]))


def test_check_spb_linear_fails():
    chk = check_spb(WeightScheme.linear(), 0.3)
    assert chk.summable_reciprocals is Verdict.FAILS
    assert not chk.holds


def test_check_spb_rejects_group_dependent():
    with pytest.raises(ConfigurationError):
        check_spb(WeightScheme.group_exponential(), 0.5)


@pytest.mark.parametrize("gamma,phase", [(0.5, Phase.ALL_INFINITE), (1.0, Phase.ALL_INFINITE),
                                         (1.01, Phase.MONOPOLY), (2.0, Phase.MONOPOLY)])
def test_classify_phase_power(gamma, phase):
    assert classify_phase(WeightScheme.power(gamma), 0.4).verdict is phase


def test_classify_phase_other_families():
    assert classify_phase(WeightScheme.group_exponential(), 0.5).verdict is Phase.AT_MOST_ONE_INFINITE
    assert classify_phase(WeightScheme.constant(), 0.5).verdict is Phase.ALL_INFINITE
    assert classify_phase(WeightScheme.table([1.0, 3.0]), 0.5).verdict is Phase.INCONCLUSIVE
    rep = classify_phase(WeightScheme.exponential(2.0), 0.5)
    assert rep.verdict is Phase.MONOPOLY
    assert rep.to_dict()["verdict"] == "monopoly"


def test_classify_phase_rejects_bad_p(power2):
    with pytest.raises(ConfigurationError):
        classify_phase(power2, 1.0)


def test_monotone_and_infimum():
    assert WeightScheme.table([1, 3, 2], "repeat_last").is_monotone() is False
    assert WeightScheme.power(2).infimum() == 1.0
    assert WeightScheme.table([2, 1, 5], "repeat_last").infimum() == 1.0
    assert WeightScheme.power(2).family is Family.POWER
