from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from timing_games.auction import BidTrace, SlotAuction
from timing_games.synthetic import generate_corpus

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

RELAYS = ("r1", "r2", "r3")
BUILDERS = ("b1", "b2", "b3", "b4")


@st.composite
def bids(draw, slot: int = 1, lo: int = -500, hi: int = 2500, with_eligibility: bool = True):
    received = draw(st.integers(lo, hi))
    eligible = received + draw(st.integers(0, 300)) if with_eligibility else None
    return BidTrace(
        slot=slot,
        relay_id=draw(st.sampled_from(RELAYS)),
        builder_id=draw(st.sampled_from(BUILDERS)),
        received_at=received,
        eligible_at=eligible,
        # a narrow value range forces plenty of ties
        value=draw(st.integers(0, 40)) * 10**15,
        gas_used=draw(st.integers(0, 30_000_000)),
        tx_count=draw(st.integers(0, 400)),
        block_hash=draw(st.sampled_from((None, "0xaa", "0xbb", "0xcc"))),
    )


@st.composite
def auctions(draw, min_size: int = 1, max_size: int = 50):
    items = draw(st.lists(bids(), min_size=min_size, max_size=max_size))
    return SlotAuction(1, tuple(items))


@pytest.fixture(scope="session")
def corpus():
    return generate_corpus(200, seed=1)
