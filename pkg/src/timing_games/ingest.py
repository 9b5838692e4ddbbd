"""Parse relay bid-trace exports and turn them into per-slot auctions.

JSONL is the canonical format, one object per line::

    {"slot": 7000000, "relay": "ultrasound", "builder_pubkey": "0xa1...",
     "timestamp_ms": 1690824023120, "eligible_ms": 1690824023250,
     "value": "770000000000000000000", "gas_used": 15000000, "num_tx": 140,
     "block_hash": "0x..."}

``eligible_ms`` and ``block_hash`` are optional and unknown keys are ignored.
``value`` is a decimal wei string and never passes through a float. CSV uses
the same fields as columns, in the order of ``CSV_COLUMNS``; a header row
matching that order is optional on input and always written on output.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from typing import IO, Iterable, Mapping, Sequence

from .auction import (
    DEFAULT_CUTOFF_MS,
    MAX_WEI,
    SLOT_TIME_BOUND_MS,
    BLOCK_GAS_LIMIT,
    BidTrace,
    SlotAuction,
    _preference_key,
    best_eligible_bid,
)
from .distributions import EmpiricalDistribution, build_ecdf
from .errors import EmptyInput, MalformedRecord, UnknownFormat

CSV_COLUMNS = (
    "slot",
    "relay",
    "builder_pubkey",
    "timestamp_ms",
    "eligible_ms",
    "value",
    "gas_used",
    "num_tx",
    "block_hash",
)
FORMATS = ("jsonl", "csv")
MAINNET_GENESIS_S = 1_606_824_023


@dataclass(frozen=True, slots=True)
class TraceRecord:
    slot: int
    relay: str
    builder_pubkey: str
    timestamp_ms: int | Decimal
    eligible_ms: int | Decimal | None
    value: int
    gas_used: int
    num_tx: int
    block_hash: str | None = None


@dataclass(frozen=True, slots=True)
class ChainConfig:
    genesis_time_s: int = MAINNET_GENESIS_S
    seconds_per_slot: int = 12

    def __post_init__(self):
        if self.seconds_per_slot <= 0:
            raise ValueError("seconds_per_slot must be positive")

    def slot_start_ms(self, slot: int) -> int:
        return (self.genesis_time_s + slot * self.seconds_per_slot) * 1000


@dataclass(frozen=True)
class ParsedTraces:
    records: list[TraceRecord]
    errors: list[MalformedRecord]


@dataclass(frozen=True)
class AuctionSet:
    auctions: list[SlotAuction]
    dropped: int
    duplicates: int

    @property
    def n_bids(self) -> int:
        return sum(len(a) for a in self.auctions)


@dataclass(frozen=True, slots=True)
class DeliveredPayload:
    slot: int
    block_hash: str
    value: int


def _uint(raw, name: str, limit: int | None = None) -> int:
    if isinstance(raw, str):
        if not raw.isdigit():
            raise ValueError(f"{name} must be a non-negative integer, got {raw!r}")
        v = int(raw)
    elif type(raw) is int:
        v = raw
    else:
        raise ValueError(f"{name} must be a non-negative integer, got {raw!r}")
    if v < 0:
        raise ValueError(f"{name} must be non-negative, got {v}")
    if limit is not None and v > limit:
        raise ValueError(f"{name} {v} exceeds {limit}")
    return v


def _millis(raw, name: str) -> int | Decimal:
    if type(raw) is int:
        v = raw
    elif isinstance(raw, Decimal):
        v = raw
    elif isinstance(raw, str):
        try:
            v = Decimal(raw) if any(c in raw for c in ".eE") else int(raw)
        except (ValueError, InvalidOperation):
            raise ValueError(f"{name} is not a number: {raw!r}") from None
    else:
        raise ValueError(f"{name} must be a number, got {raw!r}")
    if isinstance(v, Decimal) and not v.is_finite():
        raise ValueError(f"{name} is not finite")
    if v < 0:
        raise ValueError(f"{name} must be non-negative")
    return v


def _wei(raw) -> int:
    if type(raw) is int:
        text = str(raw)
    elif isinstance(raw, str):
        text = raw.strip()
    else:
        raise ValueError(f"value must be a decimal wei string, got {raw!r}")
    if not text.isdigit() or not text.isascii():
        raise ValueError(f"value must be a non-negative decimal integer, got {raw!r}")
    v = int(text)
    if v > MAX_WEI:
        raise ValueError("value does not fit in 32 bytes")
    return v


def _text(raw, name: str, optional: bool = False) -> str | None:
    if raw is None or raw == "":
        if optional:
            return None
        raise ValueError(f"{name} is required")
    if not isinstance(raw, str):
        raise ValueError(f"{name} must be a string, got {raw!r}")
    return raw


def record_from_mapping(obj: Mapping) -> TraceRecord:
    """Validate one decoded object; raises ValueError on the first problem."""
    for key in ("slot", "relay", "builder_pubkey", "timestamp_ms", "value", "gas_used", "num_tx"):
        if key not in obj:
            raise ValueError(f"missing field {key!r}")
    ts = _millis(obj["timestamp_ms"], "timestamp_ms")
    el = obj.get("eligible_ms")
    el = None if el is None or el == "" else _millis(el, "eligible_ms")
    if el is not None and el < ts:
        raise ValueError("eligible_ms precedes timestamp_ms")
    return TraceRecord(
        slot=_uint(obj["slot"], "slot"),
        relay=_text(obj["relay"], "relay"),
        builder_pubkey=_text(obj["builder_pubkey"], "builder_pubkey"),
        timestamp_ms=ts,
        eligible_ms=el,
        value=_wei(obj["value"]),
        gas_used=_uint(obj["gas_used"], "gas_used", BLOCK_GAS_LIMIT),
        num_tx=_uint(obj["num_tx"], "num_tx"),
        block_hash=_text(obj.get("block_hash"), "block_hash", optional=True),
    )


def _read_text(source) -> str:
    if isinstance(source, (bytes, bytearray)):
        return bytes(source).decode("utf-8")
    if isinstance(source, str):
        return source
    data = source.read()
    return data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data


def _rows(text: str, fmt: str):
    if fmt == "jsonl":
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line, parse_float=Decimal)
            except json.JSONDecodeError as exc:
                yield lineno, None, f"invalid JSON: {exc.msg}"
                continue
            if not isinstance(obj, dict):
                yield lineno, None, "expected a JSON object"
                continue
            yield lineno, obj, None
    elif fmt == "csv":
        reader = csv.reader(io.StringIO(text))
        for row in reader:
            lineno = reader.line_num
            if not row or not any(cell.strip() for cell in row):
                continue
            if tuple(c.strip() for c in row) == CSV_COLUMNS:
                continue
            if len(row) != len(CSV_COLUMNS):
                yield lineno, None, f"expected {len(CSV_COLUMNS)} columns, got {len(row)}"
                continue
            yield lineno, dict(zip(CSV_COLUMNS, row)), None
    else:
        raise UnknownFormat(f"unknown trace format {fmt!r}; expected one of {FORMATS}")


def parse_traces(source, fmt: str = "jsonl", strict: bool = True) -> ParsedTraces:
    """Parse a byte or text stream of bid traces.

    With ``strict`` the first bad record raises :class:`MalformedRecord`;
    otherwise bad records are collected in ``errors`` and parsing continues.
    """
    if fmt not in FORMATS:
        raise UnknownFormat(f"unknown trace format {fmt!r}; expected one of {FORMATS}")
    text = _read_text(source)
    records, errors = [], []
    for lineno, obj, problem in _rows(text, fmt):
        if problem is None:
            try:
                records.append(record_from_mapping(obj))
                continue
            except ValueError as exc:
                problem = str(exc)
        err = MalformedRecord(lineno, problem)
        if strict:
            raise err
        errors.append(err)
    return ParsedTraces(records, errors)


def _record_dict(r: TraceRecord) -> dict:
    out = {
        "slot": r.slot,
        "relay": r.relay,
        "builder_pubkey": r.builder_pubkey,
        "timestamp_ms": r.timestamp_ms,
    }
    if r.eligible_ms is not None:
        out["eligible_ms"] = r.eligible_ms
    out.update(value=str(r.value), gas_used=r.gas_used, num_tx=r.num_tx)
    if r.block_hash is not None:
        out["block_hash"] = r.block_hash
    return out


def _json_value(v) -> str:
    # Decimals are written as raw JSON numbers so fractional milliseconds stay exact
    return str(v) if isinstance(v, Decimal) else json.dumps(v)


def serialize_traces(records: Iterable[TraceRecord], fmt: str = "jsonl") -> str:
    if fmt == "jsonl":
        return "".join(
            "{" + ",".join(f"{json.dumps(k)}:{_json_value(v)}" for k, v in _record_dict(r).items()) + "}\n"
            for r in records
        )
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow(
                [
                    r.slot,
                    r.relay,
                    r.builder_pubkey,
                    r.timestamp_ms,
                    "" if r.eligible_ms is None else r.eligible_ms,
                    r.value,
                    r.gas_used,
                    r.num_tx,
                    r.block_hash or "",
                ]
            )
        return buf.getvalue()
    raise UnknownFormat(f"unknown trace format {fmt!r}; expected one of {FORMATS}")


def _relative(ms, slot_start: int) -> int:
    # int() truncates toward zero: 240.5 ms after the slot start becomes 240
    return int(ms - slot_start)


def to_auctions(records: Iterable[TraceRecord], chain: ChainConfig = ChainConfig()) -> AuctionSet:
    """Group records by slot with slot-relative millisecond times.

    Records whose receiving or eligibility time falls outside +-12 s of the
    slot start are dropped; exact duplicates (slot, relay, builder,
    eligibility, value, block hash) are collapsed. Both are counted.
    Missing eligibility stays missing.
    """
    by_slot: dict[int, list[BidTrace]] = {}
    seen = set()
    dropped = duplicates = 0
    for r in records:
        start = chain.slot_start_ms(r.slot)
        received = _relative(r.timestamp_ms, start)
        eligible = None if r.eligible_ms is None else _relative(r.eligible_ms, start)
        if any(t is not None and abs(t) > SLOT_TIME_BOUND_MS for t in (received, eligible)):
            dropped += 1
            continue
        key = (
            r.slot,
            r.relay,
            r.builder_pubkey,
            r.eligible_ms if r.eligible_ms is not None else ("received", r.timestamp_ms),
            r.value,
            r.block_hash,
        )
        if key in seen:
            duplicates += 1
            continue
        seen.add(key)
        by_slot.setdefault(r.slot, []).append(
            BidTrace(
                slot=r.slot,
                relay_id=r.relay,
                builder_id=r.builder_pubkey,
                received_at=received,
                eligible_at=eligible,
                value=r.value,
                gas_used=r.gas_used,
                tx_count=r.num_tx,
                block_hash=r.block_hash,
            )
        )
    auctions = [SlotAuction(slot, tuple(bids)) for slot, bids in sorted(by_slot.items())]
    return AuctionSet(auctions, dropped, duplicates)


def parse_delivered(source) -> list[DeliveredPayload]:
    """Read a delivered-payload export: JSONL of ``{"slot", "block_hash", "value"}``."""
    out = []
    for lineno, line in enumerate(_read_text(source).splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            out.append(DeliveredPayload(_uint(obj["slot"], "slot"), _text(obj["block_hash"], "block_hash"), _wei(obj["value"])))
        except (ValueError, KeyError, TypeError) as exc:
            raise MalformedRecord(lineno, str(exc)) from None
    return out


def serialize_delivered(payloads: Iterable[DeliveredPayload]) -> str:
    return "".join(
        json.dumps({"slot": p.slot, "block_hash": p.block_hash, "value": str(p.value)}, separators=(",", ":")) + "\n"
        for p in payloads
    )


def winning_bids(
    auctions: Sequence[SlotAuction],
    delivered: Mapping[int, str] | None = None,
    cutoff: int = DEFAULT_CUTOFF_MS,
) -> list[BidTrace]:
    """The winning bid of every slot that has one.

    A delivered block hash, when known and present among the slot's bids,
    names the winner; otherwise the best bid eligible by ``cutoff`` wins.
    """
    delivered = delivered or {}
    out = []
    for a in auctions:
        winner = None
        h = delivered.get(a.slot)
        if h is not None:
            matches = [b for b in a.bids if b.block_hash == h]
            if matches:
                winner = min(matches, key=_preference_key)
        if winner is None:
            winner = best_eligible_bid(a, None, cutoff)
        if winner is not None:
            out.append(winner)
    return out


def winning_bid_eligibility_ecdf(
    auctions: Sequence[SlotAuction],
    delivered: Mapping[int, str] | None = None,
    cutoff: int = DEFAULT_CUTOFF_MS,
) -> EmpiricalDistribution:
    if not auctions:
        raise EmptyInput("winning_bid_eligibility_ecdf needs at least one auction")
    winners = winning_bids(auctions, delivered, cutoff)
    if not winners:
        raise EmptyInput("no slot has a winning bid")
    return build_ecdf((w.require_eligible_at() for w in winners), units="ms")
