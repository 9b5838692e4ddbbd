"""Timing games in MEV-Boost auctions: trace analysis and proposer-delay simulation."""

from __future__ import annotations

__version__ = "0.1.0"
