"""Synthetic bid corpora and reference distributions for calibration.

Real relay exports are large and not redistributable, so tests and demos run
on generated slots whose shape matches published summary statistics:

* winning-bid eligibility quantiles of 74 / 240.5 / 1410 ms,
* bid values that climb steeply before ~1 s and flatten after,
* gas and transaction counts that grow slowly with time into the slot.

Reference distributions are built deterministically from quantile knots
(stratified, no randomness), so their nearest-rank quantiles hit the knots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .auction import BLOCK_GAS_LIMIT, WEI_PER_ETH, BidTrace, SlotAuction
from .distributions import EmpiricalDistribution, SeededRng, build_ecdf
from .ingest import ChainConfig, TraceRecord, DeliveredPayload

ELIGIBILITY_KNOTS = ((0.0, 5.0), (0.25, 74.0), (0.5, 240.5), (0.95, 1410.0), (1.0, 2000.0))
# realized eligibility of winning bids under the delayed setups
PILOT_ELIGIBILITY_KNOTS = ((0.0, 420.0), (0.25, 589.5), (0.5, 656.0), (0.95, 886.35), (1.0, 990.0))
UPLIFT_KNOTS = ((0.0, 0.0), (0.25, 0.0007), (0.5, 0.0128), (0.95, 0.2399), (1.0, 0.55))
MEV_KNOTS_ETH = (
    (0.0, 0.002),
    (0.25, 0.02),
    (0.5, 0.045),
    (0.75, 0.09),
    (0.95, 0.35),
    (0.99, 1.2),
    (1.0, 20.0),
)

DEFAULT_RELAYS = (
    ("benchmark-1", False),
    ("benchmark-2", False),
    ("aggressive", False),
    ("normal", True),
    ("moderate", True),
)


def _interp(knots, p: float) -> float:
    for (p0, x0), (p1, x1) in zip(knots, knots[1:]):
        if p <= p1:
            w = 0.0 if p1 == p0 else (p - p0) / (p1 - p0)
            if x0 > 0 and x1 > 0:
                return math.exp(math.log(x0) + w * (math.log(x1) - math.log(x0)))
            return x0 + w * (x1 - x0)
    return knots[-1][1]


def knot_samples(knots: Sequence[tuple[float, float]], n: int) -> list[float]:
    """``n`` stratified samples at probabilities ``(i + 1) / n``.

    Interpolation is log-linear between positive knots and linear otherwise.
    With ``n`` a multiple of 20 the nearest-rank 25/50/95% quantiles land
    exactly on knots placed at those probabilities.
    """
    return [_interp(knots, (i + 1) / n) for i in range(n)]


def eligibility_distribution(n: int = 1000) -> EmpiricalDistribution:
    """Winning-bid eligibility in integer ms (fractional knots truncate)."""
    return build_ecdf((int(x) for x in knot_samples(ELIGIBILITY_KNOTS, n)), units="ms")


def pilot_eligibility_distribution(n: int = 1000) -> EmpiricalDistribution:
    return build_ecdf((int(x) for x in knot_samples(PILOT_ELIGIBILITY_KNOTS, n)), units="ms")


def uplift_distribution(n: int = 2000) -> EmpiricalDistribution:
    """Per-block uplift fractions with a heavy right tail."""
    return build_ecdf((Fraction(x).limit_denominator(10**9) for x in knot_samples(UPLIFT_KNOTS, n)), units="fraction")


def mev_distribution(n: int = 2000) -> EmpiricalDistribution:
    """Per-block proposer MEV payments, in wei."""
    return build_ecdf((int(x * 1e6) * 10**12 for x in knot_samples(MEV_KNOTS_ETH, n)), units="wei")


# per-slot size of the late-auction climb: most slots are nearly flat, a few jump
AMPLITUDE_KNOTS = ((0.0, 0.002), (0.25, 0.01), (0.5, 0.06), (0.9, 0.4), (0.95, 0.8), (1.0, 1.5))


def value_curve(t: float, amplitude: float = 0.17) -> float:
    """Normalized bid value at ``t`` ms into the slot; saturates towards 1."""
    return max(0.02, 1.0 - amplitude * math.exp(-(t + 500.0) / 600.0))


@dataclass(frozen=True)
class SyntheticCorpus:
    auctions: list[SlotAuction]
    delivered: dict[int, str]
    payloads: list[DeliveredPayload]


def generate_corpus(
    n_slots: int = 400,
    seed: int = 0,
    relays: Sequence[tuple[str, bool]] = DEFAULT_RELAYS,
    n_builders: int = 4,
    start_ms: int = -2000,
    end_ms: int = 2000,
    first_slot: int = 7_000_000,
) -> SyntheticCorpus:
    """Generate ``n_slots`` auctions plus the delivered winner of each slot.

    Winner eligibility times are a seeded shuffle of
    :func:`eligibility_distribution`, so the corpus reproduces its quantiles.
    Each winner is the best bid eligible at that moment.
    """
    rng = SeededRng(seed, 0)
    winners_ms = list(eligibility_distribution(n_slots).samples)
    order = rng.permutation(n_slots)
    winners_ms = [winners_ms[i] for i in order]
    mev = mev_distribution(max(n_slots, 200)).values
    amplitudes = knot_samples(AMPLITUDE_KNOTS, 200)

    auctions, delivered, payloads = [], {}, []
    for k in range(n_slots):
        slot = first_slot + k
        srng = SeededRng(seed, k + 1)
        # ETH scale of the slot; bids are built as whole gwei
        scale = float(mev[int(srng.integers(0, len(mev)))]) / 1e18 * 4.0
        gas_base = float(srng.integers(12_000_000, 18_000_001))
        tx_base = float(srng.integers(100, 201))
        amp = amplitudes[int(srng.integers(0, len(amplitudes)))]
        # hotter slots pack gas faster
        gas_slope = 0.03 + 0.25 * amp
        bids: list[BidTrace] = []
        for b in range(n_builders):
            builder = f"0x{(slot * 31 + b * 7919) % 16**12:012x}{b:02x}"
            shortfall = 0.0 if b == 0 else float(srng.random()) * 0.05
            t = start_ms + int(srng.integers(0, 200))
            n = 0
            while t <= end_ms:
                noise = 1.0 + (float(srng.random()) - 0.5) * 0.01
                value = int(scale * value_curve(t, amp) * (1 - shortfall) * noise * 1e9) * 10**9
                gas = int(min(BLOCK_GAS_LIMIT, gas_base * (1 + gas_slope * t / 1000) * (1 + (float(srng.random()) - 0.5) * 0.01)))
                txs = int(tx_base * (1 + 0.1 * t / 1000))
                block_hash = f"0x{slot:08x}{b:02x}{n:04x}"
                for relay_id, optimistic in relays:
                    if srng.random() < 0.5:
                        continue
                    lo, hi = (20, 60) if optimistic else (100, 200)
                    lag = int(srng.integers(lo, hi + 1))
                    bids.append(BidTrace(slot, relay_id, builder, t, min(t + lag, 12_000), value, gas, txs, block_hash))
                n += 1
                t += int(srng.integers(100, 301))

        t_win = int(winners_ms[k])
        prior = max((x.value for x in bids if x.eligible_at <= t_win), default=0)
        win_value = max(prior + prior // 1000, int(scale * value_curve(t_win, amp) * 1e9) * 10**9)
        relay_id, optimistic = relays[int(srng.integers(0, len(relays)))]
        lag = 40 if optimistic else 150
        win_hash = f"0x{slot:08x}ffffff"
        win_gas = int(min(BLOCK_GAS_LIMIT, gas_base * (1 + gas_slope * t_win / 1000)))
        bids.append(
            BidTrace(
                slot, relay_id, f"0x{slot % 16**12:012x}ff", max(t_win - lag, -12_000), t_win,
                win_value, win_gas, int(tx_base * (1 + 0.1 * t_win / 1000)), win_hash,
            )
        )
        auctions.append(SlotAuction(slot, tuple(bids)))
        delivered[slot] = win_hash
        payloads.append(DeliveredPayload(slot, win_hash, win_value))
    return SyntheticCorpus(auctions, delivered, payloads)


def linear_corpus(n_slots: int = 5, step_ms: int = 50, end_ms: int = 2000) -> list[SlotAuction]:
    """Auctions whose value is exactly ``1 + 0.001 t`` ETH at every ``step_ms`` grid point >= 0."""
    out = []
    for k in range(n_slots):
        bids = [
            BidTrace(k, "relay", "0xbuilder", t, t, (1000 + t) * WEI_PER_ETH // 1000, 15_000_000, 100)
            for t in range(0, end_ms + 1, step_ms)
        ]
        out.append(SlotAuction(k, tuple(bids)))
    return out


def to_records(auctions: Sequence[SlotAuction], chain: ChainConfig = ChainConfig()) -> list[TraceRecord]:
    """Export auctions back to absolute-time trace records."""
    out = []
    for a in auctions:
        start = chain.slot_start_ms(a.slot)
        for b in a.bids:
            out.append(
                TraceRecord(
                    slot=b.slot,
                    relay=b.relay_id,
                    builder_pubkey=b.builder_id,
                    timestamp_ms=start + b.received_at,
                    eligible_ms=None if b.eligible_at is None else start + b.eligible_at,
                    value=b.value,
                    gas_used=b.gas_used,
                    num_tx=b.tx_count,
                    block_hash=b.block_hash,
                )
            )
    return out
