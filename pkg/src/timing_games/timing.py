"""Proposer latency strategies replayed against reconstructed slot auctions.

A strategy is a set of relays, each queried with its own artificial
``getHeader`` delay. The relay's eligibility lag is drawn per slot and added
to that delay, the proposer keeps the best header across relays, and a
piecewise-linear hazard decides whether the late query costs the slot.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Mapping, Sequence

from .auction import (
    DEFAULT_CUTOFF_MS,
    SLOT_TIME_BOUND_MS,
    BidTrace,
    SlotAuction,
    _preference_key,
    best_eligible_bid,
    compute_r,
    supersede_by_builder,
)
from .distributions import (
    EmpiricalDistribution,
    QuantileSummary,
    SeededRng,
    build_ecdf,
    sample,
    summarize,
)
from .errors import AllDrawsSkipped, EmptyInput, NoBaselineBid, ZeroBaselineValue

DEFAULT_DELAY_THRESHOLD_MS = 950
DEFAULT_MAX_DELAY_MS = 1200
DEFAULT_RUNS = 1000
ANY_RELAY = "*"


def uniform_lag(lo: int = 100, hi: int = 200) -> EmpiricalDistribution:
    """Integer-millisecond lag, uniform on ``[lo, hi]``."""
    return build_ecdf(range(lo, hi + 1), units="ms")


def fixed_lag(ms: int = 0) -> EmpiricalDistribution:
    return build_ecdf([ms], units="ms")


# Optimistic relays skip full validation before serving a bid.
OPTIMISTIC_LAG = (20, 60)
NON_OPTIMISTIC_LAG = (100, 200)


@dataclass(frozen=True)
class RelayConfig:
    relay_id: str
    optimistic: bool = False
    eligibility_lag: EmpiricalDistribution = field(default_factory=uniform_lag)
    artificial_delay: int = 0

    def __post_init__(self):
        if self.artificial_delay < 0:
            raise ValueError(f"relay {self.relay_id}: artificial_delay must be >= 0")
        lag = self.eligibility_lag
        if lag.min < 0 or lag.max > DEFAULT_CUTOFF_MS:
            raise ValueError(f"relay {self.relay_id}: eligibility lag must lie within [0, 2000] ms")

    @property
    def relay_filter(self):
        return None if self.relay_id == ANY_RELAY else (self.relay_id,)


def _default_lag(optimistic: bool) -> EmpiricalDistribution:
    return uniform_lag(*(OPTIMISTIC_LAG if optimistic else NON_OPTIMISTIC_LAG))


@dataclass(frozen=True)
class ProposerStrategy:
    name: str
    relays: tuple[RelayConfig, ...]
    max_delay: int = DEFAULT_MAX_DELAY_MS

    def __post_init__(self):
        object.__setattr__(self, "relays", tuple(self.relays))
        if not self.relays:
            raise ValueError(f"strategy {self.name!r} needs at least one relay")
        for r in self.relays:
            if r.artificial_delay > self.max_delay:
                raise ValueError(
                    f"strategy {self.name!r}: relay {r.relay_id} delay {r.artificial_delay} ms "
                    f"exceeds the {self.max_delay} ms cap"
                )

    @classmethod
    def benchmark(cls, relay_ids: Sequence[str] = ("benchmark-1", "benchmark-2")) -> ProposerStrategy:
        return cls("benchmark", tuple(RelayConfig(r, False, _default_lag(False), 0) for r in relay_ids))

    @classmethod
    def aggressive(cls, relay_id: str = "aggressive", delay: int = DEFAULT_DELAY_THRESHOLD_MS) -> ProposerStrategy:
        return cls("aggressive", (RelayConfig(relay_id, False, _default_lag(False), delay),))

    @classmethod
    def normal(cls, relay_id: str = "normal", delay: int = 700) -> ProposerStrategy:
        return cls("normal", (RelayConfig(relay_id, True, _default_lag(True), delay),))

    @classmethod
    def moderate(cls, relay_id: str = "moderate", threshold: int = DEFAULT_DELAY_THRESHOLD_MS) -> ProposerStrategy:
        return cls("moderate", (RelayConfig(relay_id, True, _default_lag(True), threshold - 100),))

    def with_delay(self, delay: int) -> ProposerStrategy:
        return replace(self, relays=tuple(replace(r, artificial_delay=delay) for r in self.relays))


def pilot_presets(threshold: int = DEFAULT_DELAY_THRESHOLD_MS) -> list[ProposerStrategy]:
    """The four relay setups: benchmark, aggressive, normal and moderate."""
    return [
        ProposerStrategy.benchmark(),
        ProposerStrategy.aggressive(delay=threshold),
        ProposerStrategy.normal(),
        ProposerStrategy.moderate(threshold=threshold),
    ]


@dataclass(frozen=True)
class HazardModel:
    """Missed-slot probability, piecewise linear in the effective query time.

    Flat beyond the first and last knots.
    """

    knots: tuple[tuple[int, Fraction], ...]

    def __post_init__(self):
        knots = tuple((int(t), Fraction(p)) for t, p in self.knots)
        if not knots:
            raise ValueError("hazard model needs at least one knot")
        for (t0, p0), (t1, p1) in zip(knots, knots[1:]):
            if t1 <= t0:
                raise ValueError("hazard knot times must be strictly increasing")
            if p1 < p0:
                raise ValueError("hazard probabilities must be non-decreasing")
        if not all(0 <= p <= 1 for _, p in knots):
            raise ValueError("hazard probabilities must lie in [0, 1]")
        object.__setattr__(self, "knots", knots)

    @classmethod
    def default(cls, p_max=Fraction(1, 20), safe_until: int = DEFAULT_DELAY_THRESHOLD_MS, ramp_end: int = 2000):
        return cls(((safe_until, Fraction(0)), (ramp_end, Fraction(p_max))))

    @classmethod
    def constant(cls, p) -> HazardModel:
        return cls(((0, Fraction(p)),))

    def __call__(self, t) -> Fraction:
        knots = self.knots
        if t <= knots[0][0]:
            return knots[0][1]
        for (t0, p0), (t1, p1) in zip(knots, knots[1:]):
            if t <= t1:
                return p0 + (p1 - p0) * (Fraction(t) - t0) / (t1 - t0)
        return knots[-1][1]


@dataclass(frozen=True, slots=True)
class SlotOutcome:
    slot: int
    winning_bid: BidTrace | None
    missed: bool
    effective_query_time: int
    uplift_vs_baseline: Fraction | None

    def __post_init__(self):
        if self.missed and self.winning_bid is not None:
            raise ValueError("a missed slot has no winning bid")

    @property
    def reward(self) -> int:
        return 0 if self.winning_bid is None else self.winning_bid.value


@dataclass(frozen=True, slots=True)
class SimConfig:
    n_runs: int = DEFAULT_RUNS
    delay_threshold: int = DEFAULT_DELAY_THRESHOLD_MS
    seed: int = 0
    supersede: bool = False

    def __post_init__(self):
        if self.n_runs < 1:
            raise ValueError("n_runs must be >= 1")
        if not 0 <= self.delay_threshold <= 2000:
            raise ValueError("delay_threshold must lie in [0, 2000] ms")


def uplift_per_block(
    auction: SlotAuction, baseline_time, delay_time, supersede: bool = False
) -> Fraction:
    """Relative gain of the best header at ``delay_time`` over the one at ``baseline_time``."""
    if delay_time < baseline_time:
        raise ValueError(f"delay_time {delay_time} precedes baseline_time {baseline_time}")
    view = supersede_by_builder(auction, supersede)
    base = best_eligible_bid(view, None, baseline_time)
    if base is None:
        raise NoBaselineBid(f"slot {auction.slot}: nothing eligible at {baseline_time} ms")
    if base.value == 0:
        raise ZeroBaselineValue(f"slot {auction.slot}: baseline winner bids zero")
    late = best_eligible_bid(view, None, delay_time)
    return Fraction(late.value, base.value) - 1


@dataclass(frozen=True)
class UpliftSimulation:
    distribution: EmpiricalDistribution
    skipped: int
    n_runs: int

    @property
    def collected(self) -> int:
        return self.n_runs - self.skipped


def uplift_draw(
    auctions: Sequence[SlotAuction],
    baseline_dist: EmpiricalDistribution,
    config: SimConfig,
    run_id: int,
    delay_dist: EmpiricalDistribution | None = None,
) -> Fraction | None:
    """One Monte Carlo run on stream ``run_id``; None when the draw has no baseline bid.

    Draw order is baseline time, auction, then delay (only when ``delay_dist``
    is given), so fixed-threshold runs stay paired across thresholds. The
    baseline query happens no earlier than the slot start, and a baseline
    later than the delay leaves the selection unchanged.
    """
    rng = SeededRng(config.seed, run_id)
    baseline = max(sample(baseline_dist, rng), 0)
    auction = auctions[int(rng.integers(0, len(auctions)))]
    delay = config.delay_threshold if delay_dist is None else sample(delay_dist, rng)
    try:
        return uplift_per_block(auction, baseline, max(baseline, delay), config.supersede)
    except NoBaselineBid:
        return None


def run_uplift_simulation(
    auctions: Sequence[SlotAuction],
    baseline_dist: EmpiricalDistribution,
    config: SimConfig,
    delay_dist: EmpiricalDistribution | None = None,
) -> UpliftSimulation:
    if not auctions:
        raise EmptyInput("run_uplift_simulation needs at least one auction")
    draws = [uplift_draw(auctions, baseline_dist, config, i, delay_dist) for i in range(config.n_runs)]
    kept = [d for d in draws if d is not None]
    if not kept:
        raise AllDrawsSkipped(f"none of {config.n_runs} draws found a baseline bid")
    return UpliftSimulation(build_ecdf(kept, units="fraction"), config.n_runs - len(kept), config.n_runs)


def simulate_slot(
    auction: SlotAuction,
    strategy: ProposerStrategy,
    hazard: HazardModel,
    rng: SeededRng,
    supersede: bool = False,
) -> SlotOutcome:
    """Query every relay of ``strategy`` once and keep the best header.

    ``uplift_vs_baseline`` compares against the same relays queried without
    artificial delay (same lag draws); it is -1 for a missed slot and None
    when the undelayed query finds nothing.
    """
    view = supersede_by_builder(auction, supersede)
    picks, base_picks, query_times = [], [], []
    for relay in strategy.relays:
        lag = sample(relay.eligibility_lag, rng)
        t = relay.artificial_delay + lag
        query_times.append(t)
        for out, when in ((picks, t), (base_picks, lag)):
            bid = best_eligible_bid(view, relay.relay_filter, when)
            if bid is not None:
                out.append(bid)
    effective = max(query_times)
    u = rng.random()
    winner = min(picks, key=_preference_key) if picks else None
    missed = winner is not None and u < hazard(effective)
    base = min(base_picks, key=_preference_key) if base_picks else None

    uplift = None
    if base is not None and base.value > 0:
        reward = 0 if missed else winner.value
        uplift = Fraction(reward, base.value) - 1
    return SlotOutcome(auction.slot, None if missed else winner, missed, effective, uplift)


@dataclass(frozen=True)
class StrategyReport:
    name: str
    n_slots: int
    missed_rate: Fraction
    eligibility: QuantileSummary | None
    selection: QuantileSummary
    winning_value: QuantileSummary
    uplift: QuantileSummary | None
    uplift_skipped: int


def _summary_or_none(values):
    return summarize(build_ecdf(values)) if values else None


def compare_strategies(
    auctions: Sequence[SlotAuction],
    strategies: Sequence[ProposerStrategy],
    hazard: HazardModel,
    config: SimConfig,
) -> dict[str, StrategyReport]:
    """Replay every auction under each strategy with paired random streams.

    Auction ``i`` uses stream ``i`` for every strategy, so strategies with the
    same relay layout see identical lag and miss draws. Uplift is measured
    against the strategy named ``benchmark`` (or the first one); slots where
    the benchmark missed or found nothing are skipped and counted.
    """
    if not strategies:
        raise EmptyInput("compare_strategies needs at least one strategy")
    if not auctions:
        raise EmptyInput("compare_strategies needs at least one auction")
    outcomes = {}
    for s in strategies:
        outcomes[s.name] = [
            simulate_slot(a, s, hazard, SeededRng(config.seed, i), config.supersede)
            for i, a in enumerate(auctions)
        ]
    bench_name = "benchmark" if "benchmark" in outcomes else strategies[0].name
    bench = outcomes[bench_name]

    reports = {}
    for s in strategies:
        rows = outcomes[s.name]
        uplifts, skipped = [], 0
        for mine, ref in zip(rows, bench):
            if ref.winning_bid is None or ref.winning_bid.value == 0:
                skipped += 1
                continue
            uplifts.append(Fraction(mine.reward, ref.winning_bid.value) - 1)
        reports[s.name] = StrategyReport(
            name=s.name,
            n_slots=len(rows),
            missed_rate=Fraction(sum(o.missed for o in rows), len(rows)),
            eligibility=_summary_or_none([o.winning_bid.eligible_at for o in rows if o.winning_bid]),
            selection=summarize(build_ecdf([o.effective_query_time for o in rows])),
            winning_value=summarize(build_ecdf([o.reward for o in rows])),
            uplift=_summary_or_none(uplifts),
            uplift_skipped=skipped,
        )
    return reports


def median_r_at(
    auctions: Sequence[SlotAuction], query_time, cutoff: int = DEFAULT_CUTOFF_MS, supersede: bool = False
) -> Fraction | None:
    """Median normalized value of the header a proposer would get at ``query_time``."""
    rs = []
    for a in auctions:
        bid = best_eligible_bid(supersede_by_builder(a, supersede), None, query_time)
        if bid is not None:
            rs.append(compute_r(bid, a, cutoff))
    if not rs:
        return None
    return summarize(build_ecdf(rs)).q50


@dataclass(frozen=True, slots=True)
class FlatteningReport:
    early_gain: Fraction
    late_gain: Fraction
    times: tuple[int, int, int]

    @property
    def ratio(self):
        if self.late_gain == 0:
            return float("inf") if self.early_gain > 0 else float("nan")
        return self.early_gain / self.late_gain


def flattening_report(
    auctions: Sequence[SlotAuction], times: tuple[int, int, int] = (250, 950, 1000), cutoff: int = DEFAULT_CUTOFF_MS
) -> FlatteningReport:
    """Relative median-R gains over ``times[0]->times[1]`` and ``times[1]->times[2]``.

    Only auctions with a header available at ``times[0]`` take part, so all
    three medians cover the same slots.
    """
    t0, t1, t2 = times
    pool = [a for a in auctions if best_eligible_bid(a, None, t0) is not None]
    if not pool:
        raise EmptyInput(f"no auction has a bid eligible by {t0} ms")
    m0, m1, m2 = (median_r_at(pool, t, cutoff) for t in times)
    return FlatteningReport(m1 / m0 - 1, m2 / m1 - 1, times)


def synthesize_eligibility(
    auction: SlotAuction,
    rng: SeededRng,
    lags: Mapping[str, EmpiricalDistribution] | None = None,
    default_lag: EmpiricalDistribution | None = None,
) -> SlotAuction:
    """Fill missing eligibility times with receiving time plus a per-relay lag draw.

    Bids that already carry an eligibility time are kept verbatim.
    """
    lags = lags or {}
    default_lag = default_lag or uniform_lag()
    out = []
    for b in auction.bids:
        if b.eligible_at is not None:
            out.append(b)
            continue
        lag = sample(lags.get(b.relay_id, default_lag), rng)
        out.append(replace(b, eligible_at=min(b.received_at + int(lag), SLOT_TIME_BOUND_MS)))
    return auction.with_bids(out)


def missed_rate_expectation(outcomes: Sequence[SlotOutcome], hazard: HazardModel) -> float:
    """Mean hazard over the realized effective query times."""
    return statistics.fmean(float(hazard(o.effective_query_time)) for o in outcomes)
