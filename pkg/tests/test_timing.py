from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from conftest import auctions, bids
from timing_games.auction import BidTrace, SlotAuction, supersede_by_builder
from timing_games.distributions import SeededRng, build_ecdf, summarize
from timing_games.errors import AllDrawsSkipped, EmptyInput, NoBaselineBid, ZeroBaselineValue
from timing_games.timing import (
    HazardModel,
    ProposerStrategy,
    RelayConfig,
    SimConfig,
    compare_strategies,
    fixed_lag,
    flattening_report,
    missed_rate_expectation,
    pilot_presets,
    run_uplift_simulation,
    simulate_slot,
    synthesize_eligibility,
    uplift_draw,
    uplift_per_block,
)


def bid(t, value, builder="b", relay="r"):
    return BidTrace(1, relay, builder, t, t, value)


def test_uplift_example():
    a = SlotAuction(1, (bid(100, 100, "x"), bid(900, 110, "y")))
    assert uplift_per_block(a, 200, 950) == Fraction(1, 10)
    assert uplift_per_block(a, 200, 200) == 0


def test_uplift_errors():
    a = SlotAuction(1, (bid(500, 100),))
    with pytest.raises(NoBaselineBid):
        uplift_per_block(a, 100, 900)
    with pytest.raises(ZeroBaselineValue):
        uplift_per_block(SlotAuction(1, (bid(0, 0),)), 10, 900)
    with pytest.raises(ValueError):
        uplift_per_block(a, 900, 100)


@given(auctions(), st.integers(-600, 2500), st.integers(0, 1500), st.booleans())
def test_uplift_matches_oracle(a, t0, dt, sup):
    expected = oracles.uplift(a.bids, t0, t0 + dt, sup)
    try:
        got = uplift_per_block(a, t0, t0 + dt, sup)
    except ZeroBaselineValue:
        assert oracles.best(a.bids, t0, supersede=sup).value == 0
        assert expected is None
        return
    except NoBaselineBid:
        assert oracles.best(a.bids, t0, supersede=sup) is None
        return
    assert got == expected


@given(auctions(), st.integers(-600, 2500), st.lists(st.integers(0, 1500), min_size=2, max_size=5))
def test_uplift_nonnegative_and_monotone(a, t0, delays):
    try:
        values = [uplift_per_block(a, t0, t0 + d) for d in sorted(delays)]
    except (NoBaselineBid, ZeroBaselineValue):
        return
    assert values[0] >= 0
    assert values == sorted(values)


def test_hazard():
    h = HazardModel.default()
    assert h(0) == 0 and h(950) == 0
    assert h(2000) == Fraction(1, 20)
    assert h(1475) == Fraction(1, 40)
    assert h(5000) == Fraction(1, 20)
    with pytest.raises(ValueError):
        HazardModel(((0, Fraction(1, 2)), (10, Fraction(1, 4))))
    with pytest.raises(ValueError):
        HazardModel.constant(Fraction(3, 2))


def test_simulate_slot_no_hazard_matches_best_bid(corpus):
    a = corpus.auctions[0]
    strat = ProposerStrategy("one", (RelayConfig("*", False, fixed_lag(0), 800),))
    out = simulate_slot(a, strat, HazardModel.constant(0), SeededRng(1))
    assert not out.missed
    assert out.effective_query_time == 800
    from timing_games.auction import best_eligible_bid

    assert out.winning_bid == best_eligible_bid(a, None, 800)


def test_simulate_slot_certain_miss(corpus):
    strat = ProposerStrategy("one", (RelayConfig("*", False, fixed_lag(0), 500),))
    out = simulate_slot(corpus.auctions[0], strat, HazardModel.constant(1), SeededRng(1))
    assert out.missed and out.winning_bid is None and out.reward == 0
    assert out.uplift_vs_baseline == -1


def test_strategy_validation():
    with pytest.raises(ValueError):
        ProposerStrategy("x", ())
    with pytest.raises(ValueError):
        ProposerStrategy("x", (RelayConfig("r", artificial_delay=1300),))
    with pytest.raises(ValueError):
        RelayConfig("r", artificial_delay=-1)


def test_pilot_presets_respect_threshold():
    for s in pilot_presets(950):
        assert all(r.artificial_delay <= 950 for r in s.relays)


def test_compare_strategies_paired(corpus):
    auctions = corpus.auctions[:60]
    strategies = pilot_presets(950)
    cfg = SimConfig(seed=9)
    a = compare_strategies(auctions, strategies, HazardModel.default(), cfg)
    b = compare_strategies(auctions, strategies, HazardModel.default(), cfg)
    assert a == b
    assert a["benchmark"].uplift.as_tuple() == (0, 0, 0)
    assert a["aggressive"].selection.q50 >= a["benchmark"].selection.q50
    assert 0 <= a["aggressive"].missed_rate <= Fraction(1, 20)


def test_missed_rate_expectation(corpus):
    strat = ProposerStrategy("late", (RelayConfig("*", False, fixed_lag(1000), 1000),))
    outs = [simulate_slot(a, strat, HazardModel.default(), SeededRng(3, i)) for i, a in enumerate(corpus.auctions[:20])]
    assert missed_rate_expectation(outs, HazardModel.default()) == pytest.approx(0.05)


def test_uplift_simulation_zero_delay(corpus):
    sim = run_uplift_simulation(corpus.auctions, build_ecdf([0, 50, 100]), SimConfig(200, 0, seed=4))
    assert summarize(sim.distribution).as_tuple() == (0, 0, 0)
    assert set(sim.distribution.samples) == {0}


def test_uplift_simulation_deterministic(corpus):
    base = build_ecdf([0, 100, 300])
    cfg = SimConfig(100, 950, seed=12)
    assert run_uplift_simulation(corpus.auctions, base, cfg) == run_uplift_simulation(corpus.auctions, base, cfg)


def test_uplift_simulation_all_skipped():
    a = SlotAuction(1, (bid(1500, 10),))
    with pytest.raises(AllDrawsSkipped):
        run_uplift_simulation([a], build_ecdf([0]), SimConfig(5, 950))
    with pytest.raises(EmptyInput):
        run_uplift_simulation([], build_ecdf([0]), SimConfig(5, 950))


def test_uplift_draw_streams_are_paired(corpus):
    base = build_ecdf(range(0, 500, 10))
    lo = [uplift_draw(corpus.auctions, base, SimConfig(1, 250, 3), i) for i in range(50)]
    hi = [uplift_draw(corpus.auctions, base, SimConfig(1, 950, 3), i) for i in range(50)]
    for x, y in zip(lo, hi):
        if x is not None:
            assert y >= x


def test_flattening_linear_corpus():
    from timing_games.synthetic import linear_corpus

    rep = flattening_report(linear_corpus(3))
    # R(t) = (1000 + t) / 3000 exactly on the grid
    assert rep.early_gain == Fraction(1950, 1250) - 1
    assert rep.late_gain == Fraction(2000, 1950) - 1


def test_synthesize_eligibility_keeps_known_times():
    known = bid(100, 5)
    missing = BidTrace(1, "r", "x", 200, None, 6)
    out = synthesize_eligibility(SlotAuction(1, (known, missing)), SeededRng(2), default_lag=fixed_lag(30))
    times = sorted(b.eligible_at for b in out.bids)
    assert times == [100, 230]
