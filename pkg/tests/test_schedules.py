import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dvsgt import schedules


def test_geometric_values():
    g = schedules.geometric(0.98)
    assert schedules.batch_at(g, 0) == 1
    assert schedules.batch_at(g, 10) == 2     # ceil(0.98^-20) = ceil(1.4977)
    assert schedules.batch_at(g, 1) == math.ceil(0.98 ** -2)


def test_polynomial_values():
    p = schedules.polynomial(0.55)
    assert schedules.batch_at(p, 1) == 3      # ceil(2^1.1) = ceil(2.1435)
    assert schedules.batch_at(p, 0) == 1
    p1 = schedules.polynomial(1.0)
    assert [schedules.batch_at(p1, k) for k in range(4)] == [1, 4, 9, 16]


def test_power_schedule_matches_empirical_ramp():
    w = schedules.power(1.1)
    assert schedules.batch_at(w, 0) == 1      # clamped from ceil(0) = 0
    assert schedules.batch_at(w, 1) == 1
    assert schedules.batch_at(w, 10) == math.ceil(10 ** 1.1)


def test_constant_and_table():
    c = schedules.constant(20)
    assert schedules.batch_at(c, 123) == 20
    t = schedules.table([1, 2, 7])
    assert schedules.batch_at(t, 2) == 7
    with pytest.raises(IndexError):
        schedules.batch_at(t, 3)


def test_invalid_parameters_rejected():
    with pytest.raises(ValueError):
        schedules.constant(0)
    with pytest.raises(ValueError):
        schedules.geometric(1.0)
    with pytest.raises(ValueError):
        schedules.geometric(0.0)
    with pytest.raises(ValueError):
        schedules.polynomial(0.0)
    with pytest.raises(ValueError):
        schedules.table([])
    with pytest.raises(ValueError):
        schedules.table([1, 0])
    with pytest.raises(ValueError):
        schedules.batch_at(schedules.constant(1), -1)


def test_summability_classification():
    rep = schedules.is_as_summable(schedules.constant(5), 100)
    assert rep.summable is False and abs(rep.partial_sum - 20.0) < 1e-12

    rep = schedules.is_as_summable(schedules.geometric(0.5), 50)
    assert rep.summable is True

    rep = schedules.is_as_summable(schedules.polynomial(0.55), 1000)
    assert rep.summable is True               # 2 theta = 1.1 > 1
    assert rep.partial_sum < 12.0

    rep = schedules.is_as_summable(schedules.polynomial(0.4), 10)
    assert rep.summable is False

    rep = schedules.is_as_summable(schedules.table([1, 2, 3]), 3)
    assert rep.summable is None


def test_cumulative_samples_exact():
    assert schedules.cumulative_samples(schedules.constant(20), 9) == 200
    g = schedules.geometric(0.98)
    expected = sum(math.ceil(0.98 ** (-2 * k)) for k in range(11))
    assert schedules.cumulative_samples(g, 10) == expected
    assert schedules.cumulative_samples(schedules.polynomial(1.0), 3) == 30


def test_cumulative_samples_arbitrary_precision():
    g = schedules.geometric(0.98)
    total = schedules.cumulative_samples(g, 2000)
    assert total > 10 ** 35                   # exceeds any fixed-width integer
    assert isinstance(total, int)


def test_geometric_overflow_reported():
    g = schedules.geometric(0.98)
    with pytest.raises(OverflowError):
        schedules.batch_at(g, 10 ** 6)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.5, 0.99), st.integers(0, 200))
def test_geometric_monotone_and_bracketed(q, k):
    g = schedules.geometric(q)
    v = schedules.batch_at(g, k)
    assert v >= schedules.batch_at(g, max(k - 1, 0))
    raw = q ** (-2 * k)
    if raw < 2.0 ** 50:     # the ceil bracket is only expressible in floats here
        assert raw <= v < raw + 1


@settings(max_examples=30, deadline=None)
@given(st.floats(0.3, 2.0), st.integers(1, 300))
def test_cumulative_recurrence(theta, K):
    sch = schedules.polynomial(theta)
    assert (schedules.cumulative_samples(sch, K)
            == schedules.cumulative_samples(sch, K - 1)
            + schedules.batch_at(sch, K))


def test_min_schedule_summability():
    per_agent = [schedules.geometric(0.9), schedules.polynomial(1.0),
                 schedules.constant(50)]
    rep = schedules.min_schedule_summability(per_agent, 200)
    assert rep.summable is False              # the constant agent dominates
    fast = [schedules.geometric(0.9), schedules.polynomial(1.0)]
    rep = schedules.min_schedule_summability(fast, 200)
    assert rep.summable is True
    assert rep.partial_sum <= sum(
        1.0 / min(schedules.batch_at(s, k) for s in fast) for k in range(200)) + 1e-12
