"""EIP-1559 base-fee update and the next-slot burn cost of a delayed header."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from typing import Sequence

from .auction import BLOCK_GAS_LIMIT, SlotAuction, best_eligible_bid, check_wei, supersede_by_builder
from .distributions import EmpiricalDistribution, SeededRng, build_ecdf, sample
from .errors import AllDrawsSkipped, EmptyInput, GasAboveLimit, NoBaselineBid
from .timing import SimConfig

DEFAULT_BASE_FEE = 20 * 10**9  # 20 gwei


@dataclass(frozen=True, slots=True)
class FeeMarketState:
    base_fee_per_gas: int = DEFAULT_BASE_FEE
    gas_limit: int = BLOCK_GAS_LIMIT
    adjustment_denominator: int = 8
    elasticity: int = 2

    def __post_init__(self):
        if self.base_fee_per_gas <= 0:
            raise ValueError("base_fee_per_gas must be positive")
        if self.gas_limit % self.elasticity:
            raise ValueError("gas_limit must be a multiple of the elasticity multiplier")
        if self.adjustment_denominator <= 0:
            raise ValueError("adjustment_denominator must be positive")

    @property
    def gas_target(self) -> int:
        return self.gas_limit // self.elasticity


@dataclass(frozen=True, slots=True)
class BurnImpact:
    burn_increase_pct: Fraction
    adjusted_reward: int
    reward_decrease_pct: Fraction


def next_base_fee(state: FeeMarketState, gas_used: int) -> int:
    """Base fee of the following block, integer arithmetic as in the EIP reference."""
    if gas_used < 0 or gas_used > state.gas_limit:
        raise GasAboveLimit(f"gas_used {gas_used} outside [0, {state.gas_limit}]")
    base, target, denom = state.base_fee_per_gas, state.gas_target, state.adjustment_denominator
    if gas_used == target:
        return base
    if gas_used > target:
        delta = max(base * (gas_used - target) // target // denom, 1)
        return base + delta
    return base - base * (target - gas_used) // target // denom


def burn_increase_for_delay(
    auction: SlotAuction,
    baseline_time,
    delay_time,
    state: FeeMarketState = FeeMarketState(),
    supersede: bool = False,
) -> Fraction:
    """Relative rise in next-slot burn when the header is taken at ``delay_time``.

    Next-slot gas is held at the target, so the burn ratio equals the ratio of
    the two next-slot base fees.
    """
    if delay_time < baseline_time:
        raise ValueError(f"delay_time {delay_time} precedes baseline_time {baseline_time}")
    view = supersede_by_builder(auction, supersede)
    base = best_eligible_bid(view, None, baseline_time)
    if base is None:
        raise NoBaselineBid(f"slot {auction.slot}: nothing eligible at {baseline_time} ms")
    late = best_eligible_bid(view, None, delay_time)
    burn_base = next_base_fee(state, base.gas_used) * state.gas_target
    burn_late = next_base_fee(state, late.gas_used) * state.gas_target
    return Fraction(burn_late, burn_base) - 1


def burn_impact_on_reward(mev_reward: int, burnt: int, burn_increase_pct) -> BurnImpact:
    """Proposer reward left after absorbing ``burnt * burn_increase_pct`` extra burn.

    ``burn_increase_pct`` is a fraction (0.005 for half a percent). The
    adjusted reward floors at zero and is rounded down to whole wei; the
    decrease is computed before that rounding.
    """
    check_wei(mev_reward)
    check_wei(burnt)
    pct = Fraction(repr(burn_increase_pct)) if isinstance(burn_increase_pct, float) else Fraction(burn_increase_pct)
    adjusted = max(Fraction(0), mev_reward - burnt * pct)
    decrease = (mev_reward - adjusted) / mev_reward if mev_reward else Fraction(0)
    return BurnImpact(pct, math.floor(adjusted), decrease)


@dataclass(frozen=True)
class BurnSimulation:
    distribution: EmpiricalDistribution
    skipped: int
    n_runs: int


def burn_draw(
    auctions: Sequence[SlotAuction],
    baseline_dist: EmpiricalDistribution,
    config: SimConfig,
    run_id: int,
    state: FeeMarketState = FeeMarketState(),
) -> Fraction | None:
    """Burn increase for one run; draws match :func:`timing.uplift_draw` on the same stream."""
    rng = SeededRng(config.seed, run_id)
    baseline = max(sample(baseline_dist, rng), 0)
    auction = auctions[int(rng.integers(0, len(auctions)))]
    try:
        return burn_increase_for_delay(
            auction, baseline, max(baseline, config.delay_threshold), state, config.supersede
        )
    except NoBaselineBid:
        return None


def run_burn_simulation(
    auctions: Sequence[SlotAuction],
    baseline_dist: EmpiricalDistribution,
    config: SimConfig,
    state: FeeMarketState = FeeMarketState(),
) -> BurnSimulation:
    if not auctions:
        raise EmptyInput("run_burn_simulation needs at least one auction")
    draws = [burn_draw(auctions, baseline_dist, config, i, state) for i in range(config.n_runs)]
    kept = [d for d in draws if d is not None]
    if not kept:
        raise AllDrawsSkipped(f"none of {config.n_runs} draws found a baseline bid")
    return BurnSimulation(build_ecdf(kept, units="fraction"), config.n_runs - len(kept), config.n_runs)
