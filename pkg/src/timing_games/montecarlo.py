"""Weekly and annual reward uplift from per-block uplift, block value and proposal count.

The three inputs are sampled independently. A run draws how many blocks an
operator proposes in the period, then that many (MEV, uplift) pairs, and
reports the value-weighted uplift ``sum(mev * uplift) / sum(mev)``.

Per-run arithmetic is float64: a 13% operator proposes thousands of blocks a
week and exact rationals would be far too slow at that size.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Sequence

import numpy as np

from .auction import SlotAuction
from .distributions import (
    EmpiricalDistribution,
    QuantileSummary,
    SeededRng,
    build_ecdf,
    sample_many,
    summarize,
)
from .errors import AllRunsDegenerate, EmptyInput
from .ingest import winning_bid_eligibility_ecdf
from .timing import SimConfig, run_uplift_simulation

SECONDS_PER_SLOT = 12
SLOTS_PER_WEEK = 7 * 24 * 3600 // SECONDS_PER_SLOT
WEEKS_PER_YEAR = 52
# stream used for the period stage of annual_pilot_uplift; per-block runs use 0..n_runs-1
ANNUAL_PERIOD_STREAM = 1 << 31


def _exact(x) -> Fraction:
    return Fraction(repr(x)) if isinstance(x, float) else Fraction(x)


@dataclass(frozen=True, slots=True)
class VotingPower:
    fraction: Fraction

    def __post_init__(self):
        f = _exact(self.fraction)
        if not 0 <= f <= 1:
            raise ValueError(f"voting power must lie in [0, 1], got {self.fraction}")
        object.__setattr__(self, "fraction", f)


@dataclass(frozen=True)
class RewardModel:
    per_block_mev: EmpiricalDistribution
    uplift: EmpiricalDistribution
    slots_per_week: int = SLOTS_PER_WEEK
    el_share: Fraction = Fraction(3, 10)
    base_apr: Fraction = Fraction(42, 1000)

    def __post_init__(self):
        object.__setattr__(self, "el_share", _exact(self.el_share))
        object.__setattr__(self, "base_apr", _exact(self.base_apr))
        if not 0 < self.el_share < 1:
            raise ValueError("el_share must lie strictly between 0 and 1")
        if self.slots_per_week <= 0:
            raise ValueError("slots_per_week must be positive")


@dataclass(frozen=True)
class PeriodUplift:
    distribution: EmpiricalDistribution
    degenerate: int
    n_runs: int


@dataclass(frozen=True, slots=True)
class AprDelta:
    absolute: Fraction
    relative: Fraction
    new_apr: Fraction


@dataclass(frozen=True)
class UpliftReport:
    horizon: str
    summary: QuantileSummary
    apr_delta: QuantileSummary
    apr_absolute: QuantileSummary
    degenerate: int = 0
    skipped: int = 0
    distribution: EmpiricalDistribution | None = None


def proposals_in_period(vp: VotingPower, n_slots: int, rng: SeededRng) -> int:
    """Number of slots won out of ``n_slots`` at per-slot probability ``vp``."""
    if vp.fraction == 0:
        return 0
    return rng.binomial(n_slots, float(vp.fraction))


def _run_stream(rng: SeededRng, i: int) -> SeededRng:
    return SeededRng(rng.seed, (rng.stream_id << 32) | i)


def period_uplift(
    vp: VotingPower,
    model: RewardModel,
    n_runs: int,
    rng: SeededRng,
    n_slots: int | None = None,
) -> PeriodUplift:
    """Distribution of value-weighted uplift over one period (a week by default).

    Run ``i`` uses stream ``(rng.stream_id << 32) | i`` of ``rng.seed``. Runs
    with no proposals or zero total MEV are dropped and counted.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    n_slots = model.slots_per_week if n_slots is None else n_slots
    # measuring from the smallest uplift keeps a constant uplift exact in float
    ref = float(model.uplift.min)
    results, degenerate = [], 0
    for i in range(n_runs):
        r = _run_stream(rng, i)
        k = proposals_in_period(vp, n_slots, r)
        if k == 0:
            degenerate += 1
            continue
        mev = sample_many(model.per_block_mev, r, k)
        up = sample_many(model.uplift, r, k)
        total = mev.sum()
        if total == 0:
            degenerate += 1
            continue
        results.append(ref + float(np.dot(mev, up - ref) / total))
    if not results:
        raise AllRunsDegenerate(f"all {n_runs} runs had no proposals or zero MEV")
    return PeriodUplift(build_ecdf(results, units="fraction"), degenerate, n_runs)


def apr_delta(median_uplift, model: RewardModel) -> AprDelta:
    """APR change when execution-layer rewards grow by ``median_uplift``."""
    u = _exact(median_uplift)
    if u < 0:
        raise ValueError("median_uplift must be >= 0")
    relative = model.el_share * u
    absolute = model.base_apr * relative
    return AprDelta(absolute, relative, model.base_apr + absolute)


def _report(horizon: str, period: PeriodUplift, model: RewardModel, skipped: int = 0) -> UpliftReport:
    summary = summarize(period.distribution)
    return UpliftReport(
        horizon=horizon,
        summary=summary,
        apr_delta=summary.map(lambda u: float(model.el_share) * u),
        apr_absolute=summary.map(lambda u: float(model.base_apr * model.el_share) * u),
        degenerate=period.degenerate,
        skipped=skipped,
        distribution=period.distribution,
    )


def weekly_report(vp: VotingPower, model: RewardModel, n_runs: int, rng: SeededRng) -> UpliftReport:
    return _report("weekly", period_uplift(vp, model, n_runs, rng), model)


def annual_pilot_uplift(
    model: RewardModel,
    pilot_eligibility: EmpiricalDistribution,
    auctions: Sequence[SlotAuction],
    vp: VotingPower,
    config: SimConfig,
    baseline_dist: EmpiricalDistribution | None = None,
) -> UpliftReport:
    """Annual uplift when the realized delay is drawn per block from ``pilot_eligibility``.

    Baseline times come from ``baseline_dist``, by default the winning-bid
    eligibility of ``auctions``. The per-block uplift distribution this
    produces replaces ``model.uplift``, and one binomial over 52 weeks of
    slots gives the annual proposal count.
    """
    if not auctions:
        raise EmptyInput("annual_pilot_uplift needs auctions")
    if baseline_dist is None:
        baseline_dist = winning_bid_eligibility_ecdf(auctions)
    sim = run_uplift_simulation(auctions, baseline_dist, config, delay_dist=pilot_eligibility)
    annual_model = replace(model, uplift=sim.distribution)
    period = period_uplift(
        vp,
        annual_model,
        config.n_runs,
        SeededRng(config.seed, ANNUAL_PERIOD_STREAM),
        n_slots=WEEKS_PER_YEAR * model.slots_per_week,
    )
    return _report("annual", period, model, skipped=sim.skipped)
