from __future__ import annotations

import math
from decimal import Decimal
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from timing_games.distributions import (
    QuantileSummary,
    SeededRng,
    build_ecdf,
    nearest_rank,
    quantile,
    read_ecdf_cache,
    sample,
    sample_many,
    summarize,
    write_ecdf_cache,
)
from timing_games.errors import EmptyInput, NonFiniteSample, QuantileOutOfRange

samples_st = st.lists(st.integers(-1000, 1000), min_size=1, max_size=60)


def oracle_cdf(values, x):
    return Fraction(sum(1 for v in values if v <= x), len(values))


def oracle_quantile(values, q):
    s = sorted(values)
    k = math.ceil(Fraction(q) * len(s))
    return s[max(k, 1) - 1]


def test_build_sorts_and_cdf():
    d = build_ecdf([3, 1, 2])
    assert d.samples == (1, 2, 3)
    assert d.cdf(2) == oracle_cdf([3, 1, 2], 2) == Fraction(2, 3)


def test_point_mass_cdf():
    d = build_ecdf([5])
    assert d.cdf(4.9) == 0
    assert d.cdf(5) == 1


def test_degenerate():
    assert build_ecdf([1, 1, 1]).cdf(1) == 1


def test_empty_and_nonfinite():
    with pytest.raises(EmptyInput):
        build_ecdf([])
    with pytest.raises(NonFiniteSample):
        build_ecdf([1.0, float("nan")])
    with pytest.raises(NonFiniteSample):
        build_ecdf([Decimal("Infinity")])


def test_quantile_examples():
    d = build_ecdf([10, 20, 30, 40])
    assert quantile(d, 0.5) == oracle_quantile([10, 20, 30, 40], Fraction(1, 2)) == 20
    assert quantile(d, 0) == 10
    assert quantile(d, 1) == 40


def test_quantile_recovers_median_of_triple():
    d = build_ecdf([Decimal("74"), Decimal("240.5"), Decimal("1410")])
    assert quantile(d, 0.5) == Fraction(481, 2)


def test_quantile_out_of_range():
    d = build_ecdf([1, 2])
    for q in (-0.01, 1.01):
        with pytest.raises(QuantileOutOfRange):
            quantile(d, q)


def test_float_q_is_read_as_decimal():
    # 0.07 * 100 is 7.000000000000001 in binary; the rank must still be 7
    d = build_ecdf(range(1, 101))
    assert quantile(d, 0.07) == 7


def test_summarize():
    assert summarize(build_ecdf([4] * 7)).as_tuple() == (4, 4, 4)
    assert summarize(build_ecdf(range(1, 101))).as_tuple() == (25, 50, 95)
    s = summarize(build_ecdf(range(1, 101)))
    assert summarize(build_ecdf(s.as_tuple())).as_tuple() == (25, 50, 95)


def test_summary_order_checked():
    with pytest.raises(ValueError):
        QuantileSummary(2, 1, 3)


def test_sample_point_mass():
    rng = SeededRng(3)
    assert all(sample(build_ecdf([7]), rng) == 7 for _ in range(50))


def test_sample_fair_coin():
    d = build_ecdf([0, 1])
    ones = sample_many(d, SeededRng(11), 10_000).sum()
    assert abs(ones / 10_000 - 0.5) <= 0.02


def test_rng_determinism():
    a = SeededRng(42, 7).random(100)
    b = SeededRng(42, 7).random(100)
    assert a.tobytes() == b.tobytes()
    assert SeededRng(42, 8).random(100).tobytes() != a.tobytes()


def test_rng_bounds():
    with pytest.raises(ValueError):
        SeededRng(-1)
    with pytest.raises(ValueError):
        SeededRng(0, 2**64)


def test_sample_matches_sample_many():
    d = build_ecdf([1, 5, 5, 9, 12])
    rng = SeededRng(5, 1)
    one = [sample(d, rng) for _ in range(20)]
    many = sample_many(d, SeededRng(5, 1), 20)
    assert [float(x) for x in one] == many.tolist()


@given(samples_st, st.floats(0, 1))
def test_quantile_matches_oracle(values, q):
    d = build_ecdf(values)
    assert quantile(d, q) == oracle_quantile(values, Fraction(repr(q)))


@given(samples_st, st.integers(-1100, 1100))
def test_cdf_matches_oracle(values, x):
    assert build_ecdf(values).cdf(x) == oracle_cdf(values, x)


@given(samples_st)
def test_cdf_properties(values):
    d = build_ecdf(values)
    assert d.cdf(d.max) == 1
    xs = sorted(set(values))
    cdfs = [d.cdf(x) for x in xs]
    assert cdfs == sorted(cdfs)


@given(samples_st, st.floats(0, 1), st.floats(0, 1))
def test_quantile_monotone(values, a, b):
    d = build_ecdf(values)
    lo, hi = sorted((a, b))
    assert quantile(d, lo) <= quantile(d, hi)


@given(samples_st, st.integers(0, 2**32))
def test_samples_are_members(values, seed):
    d = build_ecdf(values)
    drawn = {sample(d, SeededRng(seed)) for _ in range(20)}
    assert drawn <= set(values)


@given(samples_st, st.integers(0, 2**32))
def test_inverse_cdf_rule(values, seed):
    # the draw is the smallest sample whose CDF reaches u
    d = build_ecdf(values)
    u = SeededRng(seed).random()
    got = sample(d, SeededRng(seed))
    expected = min(v for v in values if float(oracle_cdf(values, v)) >= u)
    assert got == expected


@given(st.lists(st.integers(0, 50), min_size=1, max_size=40), st.integers(0, 2**20))
def test_empirical_quantiles_of_draws(values, seed):
    d = build_ecdf(values)
    draws = np.sort(sample_many(d, SeededRng(seed), 100_000))
    distinct = sorted(set(values))
    for q in (Fraction(1, 4), Fraction(1, 2), Fraction(19, 20)):
        emp = draws[max(math.ceil(q * len(draws)), 1) - 1]
        i = distinct.index(quantile(d, q))
        assert distinct[max(i - 1, 0)] <= emp <= distinct[min(i + 1, len(distinct) - 1)]


def test_weighted_quantile_and_cdf():
    d = build_ecdf([1, 2, 3], weights=[1, 1, 2])
    assert d.cdf(2) == Fraction(1, 2)
    assert quantile(d, 0.5) == 2
    assert quantile(d, 0.51) == 3
    with pytest.raises(ValueError):
        build_ecdf([1, 2], weights=[1, 0])


def test_nearest_rank_empty():
    with pytest.raises(EmptyInput):
        nearest_rank([], 0.5)


@pytest.mark.parametrize("values", [[3, 1, 2], [Fraction(1, 3), Fraction(5, 7)], [0.25, 1e-9, 3.5], [Decimal("240.5"), 74]])
def test_cache_roundtrip(tmp_path, values):
    d = build_ecdf(values, units="ms")
    path = tmp_path / "d.ecdf"
    write_ecdf_cache(d, path)
    back = read_ecdf_cache(path)
    assert back.samples == d.samples
    assert back.units == "ms"
    assert back.sha256() == d.sha256()


def test_cache_roundtrip_weighted(tmp_path):
    d = build_ecdf([2, 1], weights=[Fraction(1, 3), 2])
    write_ecdf_cache(d, tmp_path / "w.ecdf")
    back = read_ecdf_cache(tmp_path / "w.ecdf")
    assert back.weights == (2, Fraction(1, 3))


def test_cache_rejects_garbage(tmp_path):
    (tmp_path / "x").write_text("hello\n")
    with pytest.raises(ValueError):
        read_ecdf_cache(tmp_path / "x")
