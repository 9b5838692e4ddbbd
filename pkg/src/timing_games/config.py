"""Declarative run configuration (INI syntax, read with :mod:`configparser`).

Every section and key is optional::

    [sim]
    runs = 1000
    delay_ms = 950
    seed = 7
    supersede = false

    [hazard]
    # time_ms:probability pairs, piecewise linear between them
    knots = 950:0, 2000:0.05

    [fees]
    base_fee_per_gas = 20000000000
    gas_limit = 30000000
    adjustment_denominator = 8

    [chain]
    genesis_time_s = 1606824023
    seconds_per_slot = 12

    [strategy aggressive]
    max_delay_ms = 1200
    relay.ultrasound = delay=950 optimistic=no lag=100-200

A strategy section holds one ``relay.<relay_id>`` line per relay. ``lag`` is
``lo-hi`` (uniform integer ms), a single integer, or ``@path`` to an ECDF
cache file. When no strategy section exists the four presets apply.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .distributions import EmpiricalDistribution, read_ecdf_cache
from .errors import ConfigError
from .fees import FeeMarketState
from .ingest import ChainConfig
from .timing import (
    DEFAULT_DELAY_THRESHOLD_MS,
    DEFAULT_MAX_DELAY_MS,
    DEFAULT_RUNS,
    HazardModel,
    ProposerStrategy,
    RelayConfig,
    fixed_lag,
    uniform_lag,
)

_TRUE = {"1", "yes", "true", "on"}
_FALSE = {"0", "no", "false", "off"}


@dataclass
class RunConfig:
    runs: int = DEFAULT_RUNS
    delay_ms: int = DEFAULT_DELAY_THRESHOLD_MS
    seed: int | None = None
    supersede: bool = False
    hazard: HazardModel = field(default_factory=HazardModel.default)
    fees: FeeMarketState = field(default_factory=FeeMarketState)
    chain: ChainConfig = field(default_factory=ChainConfig)
    strategies: list[ProposerStrategy] | None = None


def _bool(text: str, where: str) -> bool:
    t = text.strip().lower()
    if t in _TRUE:
        return True
    if t in _FALSE:
        return False
    raise ConfigError(f"{where}: expected a boolean, got {text!r}")


def parse_knots(text: str) -> HazardModel:
    knots = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        t, sep, p = part.partition(":")
        if not sep:
            raise ConfigError(f"hazard knot {part!r} is not time:probability")
        knots.append((int(t), Fraction(p.strip())))
    try:
        return HazardModel(tuple(knots))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def parse_lag(text: str, base_dir: Path) -> EmpiricalDistribution:
    text = text.strip()
    if text.startswith("@"):
        return read_ecdf_cache(base_dir / text[1:])
    lo, sep, hi = text.partition("-")
    if sep:
        return uniform_lag(int(lo), int(hi))
    return fixed_lag(int(text))


def parse_relay(relay_id: str, text: str, base_dir: Path) -> RelayConfig:
    fields = {}
    for item in text.split():
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"relay {relay_id}: expected key=value, got {item!r}")
        fields[key] = value
    unknown = set(fields) - {"delay", "optimistic", "lag"}
    if unknown:
        raise ConfigError(f"relay {relay_id}: unknown keys {sorted(unknown)}")
    optimistic = _bool(fields.get("optimistic", "no"), f"relay {relay_id}")
    lag = parse_lag(fields["lag"], base_dir) if "lag" in fields else uniform_lag(*((20, 60) if optimistic else (100, 200)))
    try:
        return RelayConfig(relay_id, optimistic, lag, int(fields.get("delay", "0")))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> RunConfig:
    path = Path(path)
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # relay ids are case-sensitive
    try:
        with path.open(encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None

    cfg = RunConfig()
    try:
        if parser.has_section("sim"):
            sim = parser["sim"]
            cfg.runs = sim.getint("runs", cfg.runs)
            cfg.delay_ms = sim.getint("delay_ms", cfg.delay_ms)
            if "seed" in sim:
                cfg.seed = sim.getint("seed")
            if "supersede" in sim:
                cfg.supersede = _bool(sim["supersede"], "sim.supersede")
        if parser.has_section("hazard") and "knots" in parser["hazard"]:
            cfg.hazard = parse_knots(parser["hazard"]["knots"])
        if parser.has_section("fees"):
            f = parser["fees"]
            cfg.fees = FeeMarketState(
                base_fee_per_gas=f.getint("base_fee_per_gas", cfg.fees.base_fee_per_gas),
                gas_limit=f.getint("gas_limit", cfg.fees.gas_limit),
                adjustment_denominator=f.getint("adjustment_denominator", cfg.fees.adjustment_denominator),
            )
        if parser.has_section("chain"):
            c = parser["chain"]
            cfg.chain = ChainConfig(
                genesis_time_s=c.getint("genesis_time_s", cfg.chain.genesis_time_s),
                seconds_per_slot=c.getint("seconds_per_slot", cfg.chain.seconds_per_slot),
            )
        strategies = []
        for section in parser.sections():
            kind, _, name = section.partition(" ")
            if kind != "strategy":
                continue
            s = parser[section]
            relays = [
                parse_relay(key[len("relay."):], value, path.parent)
                for key, value in s.items()
                if key.startswith("relay.")
            ]
            strategies.append(ProposerStrategy(name.strip(), tuple(relays), s.getint("max_delay_ms", DEFAULT_MAX_DELAY_MS)))
        cfg.strategies = strategies or None
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return cfg
