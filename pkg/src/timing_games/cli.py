"""Command-line entry point: ``timing-games {analyze,simulate,synth,replay}``.

Every command writes a report directory holding CSV tables, SVG plots drawn
from those tables and a ``manifest.json``. The manifest records the canonical
arguments, the seed and the SHA-256 of every input file, which is enough for
``timing-games replay`` to rebuild identical tables.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import secrets
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from . import __version__
from .auction import (
    DEFAULT_BIN_WIDTH_MS,
    DEFAULT_CUTOFF_MS,
    SlotAuction,
    binned_quantile_curve,
    supersede_by_builder,
)
from .config import RunConfig, load_config
from .distributions import EmpiricalDistribution, SeededRng, build_ecdf, read_ecdf_cache, summarize
from .errors import ConfigError, EmptyInput, TimingGameError
from .fees import next_base_fee, run_burn_simulation
from .ingest import (
    FORMATS,
    parse_delivered,
    parse_traces,
    serialize_delivered,
    serialize_traces,
    to_auctions,
    winning_bid_eligibility_ecdf,
    winning_bids,
)
from .montecarlo import RewardModel, VotingPower, annual_pilot_uplift, weekly_report
from .report import ReportBundle, Table, summary_table
from .synthetic import (
    eligibility_distribution,
    generate_corpus,
    mev_distribution,
    pilot_eligibility_distribution,
    to_records,
    uplift_distribution,
)
from .timing import SimConfig, compare_strategies, pilot_presets, run_uplift_simulation, synthesize_eligibility

# eligibility synthesis for bids that lack it uses streams far from the run streams
SYNTH_STREAM_BASE = 1 << 48
WEEKLY_PERIOD_STREAM = 1


@dataclass(frozen=True)
class Opt:
    flags: tuple[str, ...]
    dest: str
    kind: str = "value"  # value | path | flag | positional


_OPTS: dict[str, list[Opt]] = {}


def _add(parser, key: str, *flags, path: bool = False, **kw) -> None:
    action = parser.add_argument(*flags, **kw)
    if not flags[0].startswith("-"):
        kind = "positional"
    elif kw.get("action") == "store_true":
        kind = "flag"
    else:
        kind = "path" if path else "value"
    _OPTS.setdefault(key, []).append(Opt(tuple(flags), action.dest, kind))
    if path:
        _PATH_DESTS.add(action.dest)


_PATH_DESTS: set[str] = set()


def _pct(x) -> str:
    return f"{float(x) * 100:.4f}%"


def _headline(label: str, s) -> str:
    return f"{label}: q25={_pct(s.q25)} q50={_pct(s.q50)} q95={_pct(s.q95)}"


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _common_out(p, key: str) -> None:
    _add(p, key, "--out", required=True, help="output directory, replaced atomically")
    _add(p, key, "--seed", type=int, help="RNG seed; generated and printed when omitted")
    _add(p, key, "--config", path=True, help="INI run configuration")


def _trace_inputs(p, key: str) -> None:
    _add(p, key, "--format", choices=FORMATS, help="trace format (default: from file suffix)")
    _add(p, key, "--delivered", path=True, help="delivered-payload JSONL naming each slot's winner")
    _add(p, key, "--supersede", action="store_true", default=None, help="a builder's newer bid replaces its older one")
    _add(p, key, "--cutoff-ms", type=int, help=f"eligibility cutoff for R and winners (default {DEFAULT_CUTOFF_MS})")


def build_parser() -> argparse.ArgumentParser:
    _OPTS.clear()
    parser = argparse.ArgumentParser(prog="timing-games", description="Timing-game analysis of relay bid traces.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="curves and eligibility distributions from bid traces")
    _add(p, "analyze", "traces", path=True, help="bid trace file (JSONL or CSV)")
    _trace_inputs(p, "analyze")
    _add(p, "analyze", "--bins-ms", type=int, help=f"bin width of time curves (default {DEFAULT_BIN_WIDTH_MS})")
    _add(p, "analyze", "--range-ms", help="LO:HI time range of curves (default: extent of the data)")
    _add(p, "analyze", "--lenient", action="store_true", default=None, help="skip malformed records instead of failing")
    _common_out(p, "analyze")

    sim = sub.add_parser("simulate", help="Monte Carlo simulations")
    ssub = sim.add_subparsers(dest="kind", required=True)
    helps = {
        "uplift": "per-block value uplift from delaying the header request",
        "weekly": "weekly reward uplift for an operator of given voting power",
        "annual": "annual reward uplift with delays drawn from a pilot ECDF",
        "burn": "next-slot burn increase caused by a delayed header",
        "strategies": "compare proposer relay strategies under a miss hazard",
    }
    for kind, text in helps.items():
        key = f"simulate {kind}"
        p = ssub.add_parser(kind, help=text, description=text)
        _add(p, key, "--traces", path=True, help="bid trace file (JSONL or CSV)")
        _trace_inputs(p, key)
        _add(p, key, "--runs", type=int, help="Monte Carlo runs (default 1000)")
        if kind in ("uplift", "burn", "weekly", "strategies"):
            _add(p, key, "--delay-ms", type=int, help="header request delay / threshold in ms (default 950)")
        if kind in ("uplift", "burn", "annual"):
            _add(p, key, "--baseline-ecdf", path=True, help="ECDF of baseline request times (default: winners of --traces)")
        if kind in ("weekly", "annual"):
            _add(p, key, "--vp", type=str, required=True, help="voting power as a fraction, e.g. 0.13")
            _add(p, key, "--mev-ecdf", path=True, help="ECDF of per-block MEV in wei (default: built-in reference)")
            _add(p, key, "--el-share", type=str, help="execution-layer share of staking rewards (default 0.3)")
            _add(p, key, "--base-apr", type=str, help="baseline staking APR as a fraction (default 0.042)")
        if kind == "weekly":
            _add(p, key, "--uplift-ecdf", path=True, help="ECDF of per-block uplift (default: built-in reference)")
        if kind == "annual":
            _add(p, key, "--pilot-ecdf", path=True, help="ECDF of realized delayed eligibility (default: built-in reference)")
        _common_out(p, key)

    p = sub.add_parser("synth", help="write a synthetic trace corpus and reference ECDFs")
    _add(p, "synth", "--slots", type=int, default=None, help="number of slots (default 400)")
    _add(p, "synth", "--format", choices=FORMATS, help="trace format (default jsonl)")
    _common_out(p, "synth")

    p = sub.add_parser("replay", help="rerun the command recorded in a manifest")
    p.add_argument("manifest", help="manifest.json of an earlier run")
    p.add_argument("--out", required=True, help="output directory")
    return parser


def _command_key(args) -> str:
    return args.command if args.command != "simulate" else f"simulate {args.kind}"


def canonical_argv(args) -> list[str]:
    """Arguments that reproduce ``args``; paths are absolute, ``--out`` and ``--seed`` are left to the caller."""
    key = _command_key(args)
    argv = key.split()
    for opt in _OPTS[key]:
        value = getattr(args, opt.dest)
        if value is None or opt.dest in ("out", "seed"):
            continue
        if opt.dest in _PATH_DESTS:
            value = str(Path(value).resolve())
        if opt.kind == "positional":
            argv.append(str(value))
        elif opt.kind == "flag":
            if value:
                argv.append(opt.flags[0])
        else:
            argv.extend([opt.flags[0], str(value)])
    return argv


def _inputs(args) -> dict[str, str]:
    out = {}
    for opt in _OPTS[_command_key(args)]:
        value = getattr(args, opt.dest)
        if opt.dest in _PATH_DESTS and value is not None:
            out[str(Path(value).resolve())] = sha256_file(value)
    return out


def _fraction(parser, text: str | None, name: str, lo, hi, default, open_lo=False):
    if text is None:
        return default
    try:
        x = Fraction(text)
    except (ValueError, ZeroDivisionError):
        parser.error(f"{name}: not a number: {text!r}")
    if x > hi or x < lo or (open_lo and x == lo):
        parser.error(f"{name} must lie in {'(' if open_lo else '['}{lo}, {hi}]")
    return x


def validate(parser, args) -> None:
    """Reject invalid flag combinations before any input is read."""
    if getattr(args, "runs", None) is not None and args.runs < 1:
        parser.error("--runs must be >= 1")
    if getattr(args, "bins_ms", None) is not None and args.bins_ms <= 0:
        parser.error("--bins-ms must be positive")
    if getattr(args, "slots", None) is not None and args.slots < 1:
        parser.error("--slots must be >= 1")
    delay = getattr(args, "delay_ms", None)
    if delay is not None and not 0 <= delay <= 2000:
        parser.error("--delay-ms must lie in [0, 2000]")
    cutoff = getattr(args, "cutoff_ms", None)
    if cutoff is not None and not -12000 <= cutoff <= 12000:
        parser.error("--cutoff-ms must lie in [-12000, 12000]")
    if getattr(args, "range_ms", None) is not None:
        lo, sep, hi = args.range_ms.partition(":")
        try:
            if not sep or int(hi) <= int(lo):
                raise ValueError
        except ValueError:
            parser.error("--range-ms must be LO:HI with integer LO < HI")
    if args.command != "simulate":
        return
    needs_traces = args.kind in ("uplift", "burn", "strategies", "annual")
    if needs_traces and args.traces is None:
        parser.error(f"simulate {args.kind} requires --traces")
    if args.traces is None:
        for dest in ("delivered", "format", "supersede", "cutoff_ms", "delay_ms"):
            if getattr(args, dest, None) is not None:
                parser.error(f"--{dest.replace('_', '-')} only applies together with --traces")
    if args.kind == "weekly" and args.traces is not None and args.uplift_ecdf is not None:
        parser.error("--uplift-ecdf and --traces are mutually exclusive: uplift comes from one or the other")
    if args.kind in ("weekly", "annual"):
        _fraction(parser, args.vp, "--vp", 0, 1, None)
        _fraction(parser, args.el_share, "--el-share", 0, 1, None, open_lo=True)
        _fraction(parser, args.base_apr, "--base-apr", 0, 1, None)


def _resolve(args) -> tuple[RunConfig, int]:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    seed = args.seed if args.seed is not None else cfg.seed
    if seed is None:
        seed = secrets.randbits(63)
        print(f"seed: {seed}", file=sys.stderr)
    for dest, attr in (("runs", "runs"), ("delay_ms", "delay_ms"), ("supersede", "supersede")):
        value = getattr(args, dest, None)
        if value is not None:
            setattr(cfg, attr, value)
    cfg.seed = seed
    if not 0 <= cfg.delay_ms <= 2000:
        raise ConfigError("delay_ms must lie in [0, 2000]")
    return cfg, seed


def _trace_format(path: str, fmt: str | None) -> str:
    if fmt is not None:
        return fmt
    return "csv" if Path(path).suffix.lower() == ".csv" else "jsonl"


@dataclass
class Loaded:
    auctions: list[SlotAuction]
    delivered: dict[int, str] | None
    stats: Table


def load_auctions(path, fmt, delivered_path, cfg: RunConfig, seed: int, strict: bool = True) -> Loaded:
    with open(path, "rb") as fh:
        parsed = parse_traces(fh, _trace_format(path, fmt), strict=strict)
    aset = to_auctions(parsed.records, cfg.chain)
    if not aset.auctions:
        raise EmptyInput(f"{path}: no usable bids")
    auctions = []
    for i, a in enumerate(aset.auctions):
        if any(b.eligible_at is None for b in a.bids):
            a = synthesize_eligibility(a, SeededRng(seed, SYNTH_STREAM_BASE + i))
        auctions.append(a)
    delivered = None
    if delivered_path is not None:
        with open(delivered_path, "rb") as fh:
            delivered = {p.slot: p.block_hash for p in parse_delivered(fh)}
    stats = Table(["quantity", "count"])
    stats.rows += [
        ["records", len(parsed.records)],
        ["malformed", len(parsed.errors)],
        ["bids", aset.n_bids],
        ["dropped", aset.dropped],
        ["duplicates", aset.duplicates],
        ["slots", len(aset.auctions)],
    ]
    return Loaded(auctions, delivered, stats)


def _ecdf_or(path, default) -> EmpiricalDistribution:
    return read_ecdf_cache(path) if path is not None else default()


def _baseline(args, loaded: Loaded, cutoff: int) -> EmpiricalDistribution:
    if args.baseline_ecdf is not None:
        return read_ecdf_cache(args.baseline_ecdf)
    return winning_bid_eligibility_ecdf(loaded.auctions, loaded.delivered, cutoff)


def cmd_analyze(args, cfg: RunConfig, seed: int, bundle: ReportBundle) -> list[str]:
    cutoff = DEFAULT_CUTOFF_MS if args.cutoff_ms is None else args.cutoff_ms
    bins = DEFAULT_BIN_WIDTH_MS if args.bins_ms is None else args.bins_ms
    loaded = load_auctions(args.traces, args.format, args.delivered, cfg, seed, strict=not args.lenient)
    auctions = loaded.auctions
    if cfg.supersede:
        auctions = [supersede_by_builder(a) for a in auctions]
    trange = None
    if args.range_ms is not None:
        lo, _, hi = args.range_ms.partition(":")
        trange = (int(lo), int(hi))

    state = cfg.fees
    base_fee = state.base_fee_per_gas

    def burn(bid, auction):
        return Fraction(next_base_fee(state, bid.gas_used), base_fee) - 1

    for name, ordinate, label in (
        ("r_curve", "r_value", "R (bid / best bid by cutoff)"),
        ("gas_curve", "gas_used", "gas used"),
        ("tx_curve", "tx_count", "transactions"),
        ("burn_curve", burn, "next-slot burn increase"),
    ):
        curve = binned_quantile_curve(auctions, ordinate, bins, time_range=trange, cutoff=cutoff)
        bundle.add_curve(name, curve, f"{label} vs eligibility time", label)

    all_elig = build_ecdf((b.eligible_at for a in auctions for b in a.bids), units="ms")
    bundle.add_distribution("bid_eligibility", all_elig, "eligibility time of all bids", "ms")
    winners = winning_bids(auctions, loaded.delivered, cutoff)
    if not winners:
        raise EmptyInput("no slot has a winning bid")
    win_elig = build_ecdf((w.eligible_at for w in winners), units="ms")
    bundle.add_distribution("winner_eligibility", win_elig, "eligibility time of winning bids", "ms")
    win_value = build_ecdf((w.value for w in winners), units="wei")
    bundle.tables["summary"] = summary_table(
        [
            ("winner_eligibility_ms", summarize(win_elig)),
            ("bid_eligibility_ms", summarize(all_elig)),
            ("winning_value_wei", summarize(win_value)),
            ("bids_per_slot", summarize(build_ecdf(len(a) for a in auctions))),
        ]
    )
    bundle.tables["ingest"] = loaded.stats
    s = summarize(win_elig)
    return [f"winner eligibility (ms): q25={s.q25} q50={s.q50} q95={s.q95}"]


def _sim_config(cfg: RunConfig) -> SimConfig:
    return SimConfig(cfg.runs, cfg.delay_ms, cfg.seed, cfg.supersede)


def _reward_model(args, uplift: EmpiricalDistribution) -> RewardModel:
    kw = {}
    if args.el_share is not None:
        kw["el_share"] = Fraction(args.el_share)
    if args.base_apr is not None:
        kw["base_apr"] = Fraction(args.base_apr)
    return RewardModel(_ecdf_or(args.mev_ecdf, mev_distribution), uplift, **kw)


def _period_tables(bundle: ReportBundle, report, name: str, model: RewardModel) -> list[str]:
    bundle.add_distribution(name, report.distribution, f"{report.horizon} reward uplift", "uplift (fraction)")
    bundle.tables["summary"] = summary_table(
        [
            (f"{report.horizon}_uplift", report.summary),
            ("apr_relative_increase", report.apr_delta),
            ("apr_absolute_increase", report.apr_absolute),
            ("new_apr", report.apr_absolute.map(lambda d: float(model.base_apr) + d)),
        ]
    )
    counts = Table(["quantity", "count"])
    counts.rows += [["degenerate_runs", report.degenerate], ["skipped_draws", report.skipped]]
    bundle.tables["counts"] = counts
    new = float(model.base_apr) + float(report.apr_absolute.q50)
    return [
        _headline(f"{report.horizon} uplift", report.summary),
        f"median APR: {_pct(model.base_apr)} -> {_pct(new)} (relative {_pct(report.apr_delta.q50)})",
    ]


def cmd_simulate(args, cfg: RunConfig, seed: int, bundle: ReportBundle) -> list[str]:
    cutoff = DEFAULT_CUTOFF_MS if args.cutoff_ms is None else args.cutoff_ms
    loaded = None
    if args.traces is not None:
        loaded = load_auctions(args.traces, args.format, args.delivered, cfg, seed)
        bundle.tables["ingest"] = loaded.stats
    config = _sim_config(cfg)

    if args.kind == "uplift":
        sim = run_uplift_simulation(loaded.auctions, _baseline(args, loaded, cutoff), config)
        bundle.add_distribution("uplift", sim.distribution, f"per-block uplift at {cfg.delay_ms} ms", "uplift (fraction)")
        bundle.tables["summary"] = summary_table([("uplift", summarize(sim.distribution), sim.skipped)], ["skipped"])
        return [_headline("per-block uplift", summarize(sim.distribution))]

    if args.kind == "burn":
        sim = run_burn_simulation(loaded.auctions, _baseline(args, loaded, cutoff), config, cfg.fees)
        bundle.add_distribution("burn", sim.distribution, f"next-slot burn increase at {cfg.delay_ms} ms", "increase (fraction)")
        bundle.tables["summary"] = summary_table([("burn_increase", summarize(sim.distribution), sim.skipped)], ["skipped"])
        return [_headline("burn increase", summarize(sim.distribution))]

    if args.kind == "weekly":
        if loaded is not None:
            base = winning_bid_eligibility_ecdf(loaded.auctions, loaded.delivered, cutoff)
            uplift = run_uplift_simulation(loaded.auctions, base, config).distribution
        else:
            uplift = _ecdf_or(args.uplift_ecdf, uplift_distribution)
        model = _reward_model(args, uplift)
        report = weekly_report(VotingPower(Fraction(args.vp)), model, cfg.runs, SeededRng(seed, WEEKLY_PERIOD_STREAM))
        return _period_tables(bundle, report, "weekly", model)

    if args.kind == "annual":
        model = _reward_model(args, uplift_distribution())
        pilot = _ecdf_or(args.pilot_ecdf, pilot_eligibility_distribution)
        baseline = read_ecdf_cache(args.baseline_ecdf) if args.baseline_ecdf else None
        if baseline is None:
            baseline = winning_bid_eligibility_ecdf(loaded.auctions, loaded.delivered, cutoff)
        report = annual_pilot_uplift(model, pilot, loaded.auctions, VotingPower(Fraction(args.vp)), config, baseline)
        return _period_tables(bundle, report, "annual", model)

    # strategies
    strategies = cfg.strategies if cfg.strategies is not None else pilot_presets(cfg.delay_ms)
    reports = compare_strategies(loaded.auctions, strategies, cfg.hazard, config)
    t = Table(
        ["strategy", "slots", "missed_rate", "uplift_skipped"]
        + [f"{m}_{q}" for m in ("uplift", "selection_ms", "eligibility_ms", "winning_value_wei") for q in ("q25", "q50", "q95")]
    )
    lines = []
    for name, r in reports.items():
        row = [name, r.n_slots, r.missed_rate, r.uplift_skipped]
        for s in (r.uplift, r.selection, r.eligibility, r.winning_value):
            row += list(s.as_tuple()) if s else [None] * 3
        t.rows.append(row)
        if r.uplift is not None:
            lines.append(_headline(f"{name} uplift", r.uplift) + f" missed={_pct(r.missed_rate)}")
    bundle.tables["strategies"] = t
    return lines


def _run(args, parser) -> int:
    if args.command == "replay":
        return replay(args.manifest, args.out)
    validate(parser, args)
    cfg, seed = _resolve(args)
    manifest = {
        "tool": "timing-games",
        "version": __version__,
        "argv": canonical_argv(args) + ["--seed", str(seed)],
        "seed": seed,
        "inputs": _inputs(args),
    }
    bundle = ReportBundle(manifest=manifest)
    if args.command == "analyze":
        lines = cmd_analyze(args, cfg, seed, bundle)
    elif args.command == "simulate":
        lines = cmd_simulate(args, cfg, seed, bundle)
    else:
        n = 400 if args.slots is None else args.slots
        fmt = args.format or "jsonl"
        corpus = generate_corpus(n, seed)
        bundle.ecdfs.update(
            eligibility=eligibility_distribution(),
            pilot_eligibility=pilot_eligibility_distribution(),
            uplift=uplift_distribution(),
            mev=mev_distribution(),
        )
        bundle.files[f"traces.{fmt}"] = serialize_traces(to_records(corpus.auctions, cfg.chain), fmt)
        bundle.files["delivered.jsonl"] = serialize_delivered(corpus.payloads)
        lines = [f"wrote {n} slots, {sum(len(a) for a in corpus.auctions)} bids"]
    out = bundle.write(args.out)
    for line in lines:
        print(line)
    print(f"report: {out}")
    return 0


def replay(manifest_path, out) -> int:
    with open(manifest_path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    for path, digest in manifest.get("inputs", {}).items():
        if sha256_file(path) != digest:
            raise TimingGameError(f"{path}: contents changed since the manifest was written")
    return main(list(manifest["argv"]) + ["--out", str(out)])


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _run(args, parser)
    except (TimingGameError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
