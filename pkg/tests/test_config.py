from __future__ import annotations

from fractions import Fraction

import pytest

from timing_games.config import load_config, parse_knots, parse_lag
from timing_games.distributions import build_ecdf, write_ecdf_cache
from timing_games.errors import ConfigError


def test_defaults(tmp_path):
    (tmp_path / "c.ini").write_text("")
    cfg = load_config(tmp_path / "c.ini")
    assert cfg.runs == 1000 and cfg.delay_ms == 950 and cfg.seed is None
    assert cfg.strategies is None


def test_full_config(tmp_path):
    write_ecdf_cache(build_ecdf([10, 20, 30]), tmp_path / "lag.ecdf")
    (tmp_path / "c.ini").write_text(
        """
[sim]
runs = 50
delay_ms = 700
seed = 3
supersede = yes

[hazard]
knots = 900:0, 1900:1/10

[fees]
base_fee_per_gas = 7

[chain]
genesis_time_s = 0

[strategy mine]
max_delay_ms = 1000
relay.UltraSound = delay=700 optimistic=yes
relay.other = delay=0 lag=@lag.ecdf
"""
    )
    cfg = load_config(tmp_path / "c.ini")
    assert (cfg.runs, cfg.delay_ms, cfg.seed, cfg.supersede) == (50, 700, 3, True)
    assert cfg.hazard(1900) == Fraction(1, 10)
    assert cfg.fees.base_fee_per_gas == 7
    assert cfg.chain.slot_start_ms(1) == 12_000
    (s,) = cfg.strategies
    assert s.name == "mine" and s.max_delay == 1000
    ultra, other = s.relays
    assert ultra.relay_id == "UltraSound" and ultra.optimistic and ultra.artificial_delay == 700
    assert other.eligibility_lag.samples == (10, 20, 30)


@pytest.mark.parametrize(
    "body",
    [
        "[sim]\nruns = many\n",
        "[sim]\nsupersede = maybe\n",
        "[hazard]\nknots = 900\n",
        "[strategy x]\nrelay.r = delay=5000\n",
        "[strategy x]\nrelay.r = speed=3\n",
        "not ini at all",
    ],
)
def test_bad_configs(tmp_path, body):
    (tmp_path / "c.ini").write_text(body)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "c.ini")


def test_parse_lag_forms(tmp_path):
    assert parse_lag("100-200", tmp_path).samples == tuple(range(100, 201))
    assert parse_lag("40", tmp_path).samples == (40,)
    assert parse_knots("0:0, 10:1").knots[-1] == (10, 1)
