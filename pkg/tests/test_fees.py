from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from timing_games.auction import BidTrace, SlotAuction, eth
from timing_games.distributions import SeededRng, build_ecdf, sample
from timing_games.errors import GasAboveLimit, NoBaselineBid
from timing_games.fees import (
    FeeMarketState,
    burn_draw,
    burn_impact_on_reward,
    burn_increase_for_delay,
    next_base_fee,
    run_burn_simulation,
)
from timing_games.timing import SimConfig

GWEI = 10**9


@pytest.mark.parametrize("gas", [0, 15_000_000, 30_000_000, 1, 14_999_999, 15_000_001, 29_999_999])
def test_next_base_fee_matches_reference(gas):
    s = FeeMarketState(20 * GWEI)
    assert next_base_fee(s, gas) == oracles.eip1559_reference(20 * GWEI, gas, 15_000_000)


def test_next_base_fee_boundaries():
    s = FeeMarketState(20 * GWEI)
    assert next_base_fee(s, 15_000_000) == 20 * GWEI
    assert next_base_fee(s, 30_000_000) == 22_500_000_000
    assert next_base_fee(s, 0) == 17_500_000_000
    with pytest.raises(GasAboveLimit):
        next_base_fee(s, 30_000_001)


def test_minimum_increment_is_one_wei():
    assert next_base_fee(FeeMarketState(7), 15_000_001) == 8


@given(st.integers(1, 10**15), st.integers(0, 30_000_000))
def test_next_base_fee_property(base, gas):
    s = FeeMarketState(base)
    assert next_base_fee(s, gas) == oracles.eip1559_reference(base, gas, 15_000_000)


def test_burn_example():
    b = BidTrace(1, "r", "x", 100, 100, eth("1"), gas_used=15_000_000)
    late = BidTrace(1, "r", "y", 900, 900, eth("1.1"), gas_used=16_500_000)
    a = SlotAuction(1, (b, late))
    # next base fee rises by 1/80 of the parent's
    assert burn_increase_for_delay(a, 200, 950) == Fraction(1, 80)


def test_burn_no_change_at_same_time():
    a = SlotAuction(1, (BidTrace(1, "r", "x", 0, 0, 5, gas_used=20_000_000),))
    assert burn_increase_for_delay(a, 10, 10) == 0
    with pytest.raises(NoBaselineBid):
        burn_increase_for_delay(a, -10, 10)


def test_burn_impact_worked_example():
    out = burn_impact_on_reward(eth("0.077"), eth("0.633"), Fraction(5, 1000))
    assert abs(Fraction(out.adjusted_reward, 10**18) - Fraction(74, 1000)) <= Fraction(1, 1000)
    assert abs(out.reward_decrease_pct - Fraction(39, 1000)) <= Fraction(3, 1000)


def test_burn_impact_floors_at_zero():
    out = burn_impact_on_reward(100, 10**6, Fraction(1, 2))
    assert out.adjusted_reward == 0 and out.reward_decrease_pct == 1


@given(st.integers(0, 10**20), st.integers(0, 10**21), st.fractions(0, 1))
def test_burn_impact_linear_below_floor(mev, burnt, pct):
    out = burn_impact_on_reward(mev, burnt, pct)
    exact = max(Fraction(0), mev - burnt * pct)
    assert out.adjusted_reward == int(exact)
    assert 0 <= out.reward_decrease_pct <= 1


def test_burn_simulation_matches_direct_draws(corpus):
    base = build_ecdf(range(0, 400, 20))
    cfg = SimConfig(150, 950, seed=8)
    sim = run_burn_simulation(corpus.auctions, base, cfg)
    direct = []
    for i in range(cfg.n_runs):
        rng = SeededRng(cfg.seed, i)
        t0 = max(sample(base, rng), 0)
        a = corpus.auctions[int(rng.integers(0, len(corpus.auctions)))]
        try:
            direct.append(burn_increase_for_delay(a, t0, max(t0, 950)))
        except NoBaselineBid:
            pass
    assert sim.distribution == build_ecdf(direct, units="fraction")
