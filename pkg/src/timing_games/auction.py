"""Slot auctions, the normalized bid estimator and winning-bid selection.

Bid values are integer wei throughout; ratios are exact ``Fraction`` values
and only turn into floats when printed.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field, replace
from decimal import Decimal
from fractions import Fraction
from typing import Callable, Collection, Iterable, Sequence

from .distributions import nearest_rank
from .errors import (
    BidNotInAuction,
    EmptyInput,
    InvalidBid,
    InvalidSlotTime,
    MissingEligibility,
    NoEligibleBids,
    WeiOverflow,
)

WEI_PER_ETH = 10**18
MAX_WEI = 2**256 - 1
BLOCK_GAS_LIMIT = 30_000_000
SLOT_TIME_BOUND_MS = 12_000
DEFAULT_CUTOFF_MS = 2_000
DEFAULT_BIN_WIDTH_MS = 100

ORDINATES = ("r_value", "gas_used", "tx_count", "value")


def check_wei(amount: int) -> int:
    if isinstance(amount, bool) or not isinstance(amount, int):
        raise TypeError(f"wei amounts are integers, got {type(amount).__name__}")
    if amount < 0:
        raise InvalidBid(f"negative wei amount {amount}")
    if amount > MAX_WEI:
        raise WeiOverflow(f"{amount} does not fit in 256 bits")
    return amount


def eth(value) -> int:
    """Convert an ETH amount (str, int, Decimal or Fraction) to exact wei."""
    if isinstance(value, float):
        raise TypeError("pass ETH amounts as str or Decimal to avoid float rounding")
    wei = Fraction(Decimal(value) if isinstance(value, str) else value) * WEI_PER_ETH
    if wei.denominator != 1:
        raise ValueError(f"{value} ETH is not a whole number of wei")
    return check_wei(wei.numerator)


def to_eth(wei: int) -> Decimal:
    return Decimal(wei) / WEI_PER_ETH


def check_slot_time(ms: int) -> int:
    if isinstance(ms, bool) or not isinstance(ms, int):
        raise TypeError(f"slot times are integer milliseconds, got {ms!r}")
    if not -SLOT_TIME_BOUND_MS <= ms <= SLOT_TIME_BOUND_MS:
        raise InvalidSlotTime(f"{ms} ms lies outside [-12000, 12000]")
    return ms


@dataclass(frozen=True, slots=True)
class BidTrace:
    slot: int
    relay_id: str
    builder_id: str
    received_at: int
    eligible_at: int | None
    value: int
    gas_used: int = 0
    tx_count: int = 0
    block_hash: str | None = None

    def __post_init__(self):
        if self.slot < 0:
            raise InvalidBid(f"negative slot {self.slot}")
        check_slot_time(self.received_at)
        if self.eligible_at is not None:
            check_slot_time(self.eligible_at)
            if self.eligible_at < self.received_at:
                raise InvalidBid(
                    f"eligible_at {self.eligible_at} precedes received_at {self.received_at}"
                )
        check_wei(self.value)
        if not 0 <= self.gas_used <= BLOCK_GAS_LIMIT:
            raise InvalidBid(f"gas_used {self.gas_used} outside [0, {BLOCK_GAS_LIMIT}]")
        if self.tx_count < 0:
            raise InvalidBid(f"negative tx_count {self.tx_count}")

    @property
    def order_time(self) -> int:
        # bids whose eligibility is not yet synthesized sort by receiving time
        return self.received_at if self.eligible_at is None else self.eligible_at

    def require_eligible_at(self) -> int:
        if self.eligible_at is None:
            raise MissingEligibility(
                f"bid from {self.builder_id} on {self.relay_id} (slot {self.slot}) has no eligibility time"
            )
        return self.eligible_at


def _canonical_key(bid: BidTrace):
    return (
        bid.order_time, -bid.value, bid.builder_id, bid.relay_id, bid.received_at,
        bid.block_hash or "", bid.gas_used, bid.tx_count,
    )


def _recency_key(bid: BidTrace):
    # newest bid of a (relay, builder) pair; exact ties go to the higher value
    return (bid.order_time, bid.received_at, bid.value, bid.block_hash or "")


def _preference_key(bid: BidTrace):
    # max value first; then earliest eligibility, then lowest builder id
    return (-bid.value, bid.order_time, bid.builder_id, bid.relay_id, bid.block_hash or "")


@dataclass(frozen=True)
class SlotAuction:
    """All bids of one slot, kept in canonical order.

    Order is eligibility ascending, then value descending, then builder id.
    ``supersede`` marks a view in which only each builder's latest eligible
    bid per relay is live.
    """

    slot: int
    bids: tuple[BidTrace, ...] = ()
    supersede: bool = False
    _ids: frozenset = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for b in self.bids:
            if b.slot != self.slot:
                raise InvalidBid(f"bid for slot {b.slot} placed in auction for slot {self.slot}")
        object.__setattr__(self, "bids", tuple(sorted(self.bids, key=_canonical_key)))
        object.__setattr__(self, "_ids", frozenset(id(b) for b in self.bids))

    @classmethod
    def from_bids(cls, bids: Iterable[BidTrace], slot: int | None = None) -> SlotAuction:
        bids = tuple(bids)
        if slot is None:
            if not bids:
                raise EmptyInput("cannot infer the slot of an empty auction")
            slot = bids[0].slot
        return cls(slot, bids)

    def __len__(self) -> int:
        return len(self.bids)

    def __contains__(self, bid: BidTrace) -> bool:
        return id(bid) in self._ids or bid in self.bids

    def with_bids(self, bids: Iterable[BidTrace]) -> SlotAuction:
        return SlotAuction(self.slot, tuple(bids), self.supersede)

    @property
    def relays(self) -> frozenset[str]:
        return frozenset(b.relay_id for b in self.bids)

    def scale_values(self, factor: Fraction) -> SlotAuction:
        """Multiply every bid value by ``factor``; the product must stay whole wei."""
        out = []
        for b in self.bids:
            v = b.value * Fraction(factor)
            if v.denominator != 1:
                raise ValueError(f"scaling {b.value} by {factor} leaves fractional wei")
            out.append(replace(b, value=v.numerator))
        return self.with_bids(out)


def supersede_by_builder(auction: SlotAuction, enabled: bool = True) -> SlotAuction:
    """Return a view where a builder's newer bid cancels its older ones on the same relay."""
    return replace(auction, supersede=enabled)


def _live_bids(auction: SlotAuction, relay_filter: Collection[str] | None, query_time: int):
    if not auction.supersede:
        for b in auction.bids:
            if b.require_eligible_at() > query_time:
                break
            if relay_filter is None or b.relay_id in relay_filter:
                yield b
        return
    latest: dict[tuple[str, str], BidTrace] = {}
    for b in auction.bids:
        if b.require_eligible_at() > query_time:
            break
        if relay_filter is None or b.relay_id in relay_filter:
            k = (b.relay_id, b.builder_id)
            if k not in latest or _recency_key(b) > _recency_key(latest[k]):
                latest[k] = b
    yield from latest.values()


def best_eligible_bid(
    auction: SlotAuction,
    relay_filter: Collection[str] | None = None,
    query_time: int = DEFAULT_CUTOFF_MS,
) -> BidTrace | None:
    """Highest-value bid eligible by ``query_time`` on the given relays (all when None)."""
    return min(_live_bids(auction, relay_filter, query_time), key=_preference_key, default=None)


def max_eligible_value(auction: SlotAuction, cutoff: int = DEFAULT_CUTOFF_MS) -> int:
    top = None
    for b in auction.bids:
        if b.require_eligible_at() > cutoff:
            break
        if top is None or b.value > top:
            top = b.value
    if top is None:
        raise NoEligibleBids(f"slot {auction.slot}: no bid eligible by {cutoff} ms")
    return top


def compute_r(bid: BidTrace, auction: SlotAuction, cutoff: int = DEFAULT_CUTOFF_MS) -> Fraction:
    """Bid value over the largest bid eligible by ``cutoff``.

    The denominator ignores the supersede flag: it is the auction's maximum,
    not the live maximum. A bid past the cutoff can score above 1.
    """
    if bid not in auction:
        raise BidNotInAuction(f"bid from {bid.builder_id} is not part of slot {auction.slot}")
    top = max_eligible_value(auction, cutoff)
    if top == 0:
        return Fraction(1)
    return Fraction(bid.value, top)


@dataclass(frozen=True, slots=True)
class BinnedCurve:
    bin_edges: tuple
    counts: tuple[int, ...]
    q25: tuple
    q50: tuple
    q95: tuple

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.bin_edges, self.bin_edges[1:])):
            raise ValueError("bin edges must be strictly increasing")
        if len(self.counts) != len(self.bin_edges) - 1:
            raise ValueError("need exactly one count per bin")

    def rows(self):
        for i, n in enumerate(self.counts):
            yield self.bin_edges[i], self.bin_edges[i + 1], n, self.q25[i], self.q50[i], self.q95[i]


def binned_quantiles(points: Sequence[tuple], edges: Sequence) -> BinnedCurve:
    """Per-bin nearest-rank 25/50/95% quantiles of ``y`` over ``(x, y)`` points.

    Bins are half-open ``[lo, hi)``; points outside the edges are ignored.
    """
    edges = tuple(edges)
    if len(edges) < 2:
        raise ValueError("need at least two bin edges")
    buckets: list[list] = [[] for _ in range(len(edges) - 1)]
    for x, y in points:
        i = bisect_right(edges, x) - 1
        if 0 <= i < len(buckets):
            buckets[i].append(y)
    qs = {0.25: [], 0.5: [], 0.95: []}
    for ys in buckets:
        ys.sort()
        for q, col in qs.items():
            col.append(nearest_rank(ys, q) if ys else None)
    return BinnedCurve(edges, tuple(len(b) for b in buckets), tuple(qs[0.25]), tuple(qs[0.5]), tuple(qs[0.95]))


def _ordinate_fn(ordinate) -> Callable:
    if callable(ordinate):
        return ordinate
    if ordinate == "gas_used":
        return lambda bid, auction: bid.gas_used
    if ordinate == "tx_count":
        return lambda bid, auction: bid.tx_count
    if ordinate == "value":
        return lambda bid, auction: bid.value
    raise ValueError(f"unknown ordinate {ordinate!r}; expected one of {ORDINATES}")


def binned_quantile_curve(
    auctions: Sequence[SlotAuction],
    ordinate="r_value",
    bin_width: int = DEFAULT_BIN_WIDTH_MS,
    abscissa: str = "eligible_at",
    time_range: tuple[int, int] | None = None,
    cutoff: int = DEFAULT_CUTOFF_MS,
) -> BinnedCurve:
    """Quantile bands of a per-bid quantity against time into the slot.

    ``ordinate`` is one of ``ORDINATES`` or a callable ``(bid, auction) -> number``.
    For ``r_value`` only bids eligible by ``cutoff`` take part, in auctions
    that have at least one such bid.
    """
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    if not auctions:
        raise EmptyInput("binned_quantile_curve needs at least one auction")
    if abscissa not in ("eligible_at", "received_at"):
        raise ValueError(f"unknown abscissa {abscissa!r}")

    points = []
    for auction in auctions:
        if ordinate == "r_value":
            eligible = [b for b in auction.bids if b.require_eligible_at() <= cutoff]
            if not eligible:
                continue
            top = max(b.value for b in eligible)
            for b in eligible:
                r = Fraction(b.value, top) if top else Fraction(1)
                points.append((getattr(b, abscissa), r))
        else:
            fn = _ordinate_fn(ordinate)
            for b in auction.bids:
                x = b.require_eligible_at() if abscissa == "eligible_at" else b.received_at
                points.append((x, fn(b, auction)))

    if time_range is None:
        if not points:
            time_range = (0, bin_width)
        else:
            xs = [p[0] for p in points]
            lo = math.floor(min(xs) / bin_width) * bin_width
            hi = (math.floor(max(xs) / bin_width) + 1) * bin_width
            time_range = (lo, hi)
    lo, hi = time_range
    n_bins = max(1, math.ceil((hi - lo) / bin_width))
    edges = [lo + i * bin_width for i in range(n_bins + 1)]
    return binned_quantiles(points, edges)
