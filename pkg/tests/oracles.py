"""Brute-force reference implementations, written without the package's helpers."""

from __future__ import annotations

from fractions import Fraction


def live(bids, t, relays=None, supersede=False):
    pool = [b for b in bids if b.eligible_at <= t and (relays is None or b.relay_id in relays)]
    if not supersede:
        return pool
    out = []
    for b in pool:
        rivals = [c for c in pool if (c.relay_id, c.builder_id) == (b.relay_id, b.builder_id)]
        newest = max(rivals, key=lambda c: (c.eligible_at, c.received_at, c.value, c.block_hash or ""))
        if newest is b:
            out.append(b)
    return out


def best(bids, t, relays=None, supersede=False):
    pool = live(bids, t, relays, supersede)
    if not pool:
        return None
    top = max(b.value for b in pool)
    pool = [b for b in pool if b.value == top]
    first = min(b.eligible_at for b in pool)
    pool = [b for b in pool if b.eligible_at == first]
    return sorted(pool, key=lambda b: (b.builder_id, b.relay_id, b.block_hash or ""))[0]


def uplift(bids, t0, t1, supersede=False):
    a = best(bids, t0, supersede=supersede)
    b = best(bids, t1, supersede=supersede)
    if a is None or a.value == 0:
        return None
    return Fraction(b.value, a.value) - 1


def eip1559_reference(parent_base_fee, parent_gas_used, parent_gas_target, denominator=8):
    """Integer base-fee update as written in the EIP's Python reference."""
    if parent_gas_used == parent_gas_target:
        return parent_base_fee
    if parent_gas_used > parent_gas_target:
        gas_used_delta = parent_gas_used - parent_gas_target
        base_fee_per_gas_delta = max(parent_base_fee * gas_used_delta // parent_gas_target // denominator, 1)
        return parent_base_fee + base_fee_per_gas_delta
    gas_used_delta = parent_gas_target - parent_gas_used
    base_fee_per_gas_delta = parent_base_fee * gas_used_delta // parent_gas_target // denominator
    return parent_base_fee - base_fee_per_gas_delta
