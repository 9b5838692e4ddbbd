"""Report bundles: CSV tables, SVG plots and a replay manifest.

Tables are the source of truth; each plot is drawn from a table written next
to it. Bundles are staged in a temporary directory and moved into place only
when complete.
"""

from __future__ import annotations

import csv
import io
import json
import shutil
import tempfile
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

from .auction import BinnedCurve
from .distributions import EmpiricalDistribution, QuantileSummary, write_ecdf_cache


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, (Fraction, float)):
        return repr(float(x))
    return str(x)


@dataclass
class Table:
    header: list[str]
    rows: list[list] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for row in self.rows:
            w.writerow([fmt(v) for v in row])
        return buf.getvalue()


@dataclass
class ReportBundle:
    manifest: dict
    tables: dict[str, Table] = field(default_factory=dict)
    plots: dict[str, str] = field(default_factory=dict)
    ecdfs: dict[str, EmpiricalDistribution] = field(default_factory=dict)
    # other payloads written verbatim, keyed by file name
    files: dict[str, str] = field(default_factory=dict)

    def add_curve(self, name: str, curve: BinnedCurve, title: str, ylabel: str) -> None:
        self.tables[name] = curve_table(curve)
        self.plots[name] = svg_curve(curve, title, ylabel)

    def add_distribution(self, name: str, dist: EmpiricalDistribution, title: str, xlabel: str, bins: int = 40) -> None:
        hist = histogram_table(dist, bins)
        self.tables[f"{name}_pdf"] = hist
        self.plots[f"{name}_pdf"] = svg_histogram(hist, title, xlabel)
        cdf = cdf_table(dist)
        self.tables[f"{name}_cdf"] = cdf
        self.plots[f"{name}_cdf"] = svg_cdf(cdf, title, xlabel)
        self.ecdfs[name] = dist

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.parent.mkdir(parents=True, exist_ok=True)
        stage = Path(tempfile.mkdtemp(prefix=f".{out.name}.", dir=out.parent))
        try:
            for name, table in sorted(self.tables.items()):
                (stage / f"{name}.csv").write_text(table.to_csv(), encoding="utf-8")
            for name, svg in sorted(self.plots.items()):
                (stage / f"{name}.svg").write_text(svg, encoding="utf-8")
            for name, dist in sorted(self.ecdfs.items()):
                write_ecdf_cache(dist, stage / f"{name}.ecdf")
            for name, text in sorted(self.files.items()):
                (stage / name).write_text(text, encoding="utf-8")
            (stage / "manifest.json").write_text(
                json.dumps(self.manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
            )
            if out.exists():
                shutil.rmtree(out)
            stage.rename(out)
        except BaseException:
            shutil.rmtree(stage, ignore_errors=True)
            raise
        return out


def summary_table(named: Sequence[tuple[str, QuantileSummary | None]], extra: Sequence[str] = ()) -> Table:
    t = Table(["name", "q25", "q50", "q95", *extra])
    for name, s, *rest in named:
        t.rows.append([name, *(s.as_tuple() if s else (None, None, None)), *rest])
    return t


def curve_table(curve: BinnedCurve) -> Table:
    t = Table(["bin_lo", "bin_hi", "count", "q25", "q50", "q95"])
    t.rows.extend(list(r) for r in curve.rows())
    return t


def histogram_table(dist: EmpiricalDistribution, bins: int = 40) -> Table:
    lo, hi = float(dist.min), float(dist.max)
    if hi == lo:
        hi = lo + 1.0
    width = (hi - lo) / bins
    counts = [0] * bins
    for v in dist.values:
        i = min(int((v - lo) / width), bins - 1)
        counts[i] += 1
    n = len(dist)
    t = Table(["bin_lo", "bin_hi", "count", "density"])
    for i, c in enumerate(counts):
        t.rows.append([lo + i * width, lo + (i + 1) * width, c, c / (n * width)])
    return t


def cdf_table(dist: EmpiricalDistribution) -> Table:
    t = Table(["x", "cdf"])
    seen = set()
    for s in reversed(dist.samples):
        if s in seen:
            continue
        seen.add(s)
        t.rows.append([s, dist.cdf(s)])
    t.rows.reverse()
    return t


W, H, PAD = 640, 400, 56


def _scale(lo: float, hi: float, a: float, b: float):
    if hi == lo:
        hi = lo + 1.0
    return lambda v: a + (float(v) - lo) * (b - a) / (hi - lo)


def _frame(title: str, xlabel: str, ylabel: str, xlo, xhi, ylo, yhi, body: list[str]) -> str:
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{W / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{PAD}" y1="{H - PAD}" x2="{W - PAD}" y2="{H - PAD}" stroke="black"/>',
        f'<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{H - PAD}" stroke="black"/>',
        f'<text x="{W / 2}" y="{H - 12}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
        f'<text x="14" y="{H / 2}" text-anchor="middle" font-size="12" transform="rotate(-90 14 {H / 2})">{escape(ylabel)}</text>',
        f'<text x="{PAD}" y="{H - PAD + 16}" font-size="10">{_tick(xlo)}</text>',
        f'<text x="{W - PAD}" y="{H - PAD + 16}" text-anchor="end" font-size="10">{_tick(xhi)}</text>',
        f'<text x="{PAD - 4}" y="{H - PAD}" text-anchor="end" font-size="10">{_tick(ylo)}</text>',
        f'<text x="{PAD - 4}" y="{PAD + 4}" text-anchor="end" font-size="10">{_tick(yhi)}</text>',
    ]
    parts.extend(body)
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _tick(v) -> str:
    v = float(v)
    if v != 0 and (abs(v) >= 1e6 or abs(v) < 1e-3):
        return f"{v:.3g}"
    return f"{v:.4g}"


def _polyline(points, color: str) -> str:
    coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in points)
    return f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>'


def svg_histogram(table: Table, title: str, xlabel: str) -> str:
    rows = table.rows
    xlo, xhi = rows[0][0], rows[-1][1]
    ymax = max(r[3] for r in rows) or 1.0
    sx = _scale(xlo, xhi, PAD, W - PAD)
    sy = _scale(0.0, ymax, H - PAD, PAD)
    body = []
    for lo, hi, _count, dens in rows:
        x0, x1, y = sx(lo), sx(hi), sy(dens)
        body.append(f'<rect x="{x0:.2f}" y="{y:.2f}" width="{max(x1 - x0, 0.5):.2f}" height="{H - PAD - y:.2f}" fill="steelblue"/>')
    return _frame(title, xlabel, "density", xlo, xhi, 0.0, ymax, body)


def svg_cdf(table: Table, title: str, xlabel: str) -> str:
    xs = [float(r[0]) for r in table.rows]
    xlo, xhi = xs[0], xs[-1]
    sx = _scale(xlo, xhi, PAD, W - PAD)
    sy = _scale(0.0, 1.0, H - PAD, PAD)
    pts, prev = [], 0.0
    for x, c in table.rows:
        pts.append((sx(x), sy(prev)))
        pts.append((sx(x), sy(c)))
        prev = float(c)
    return _frame(title, xlabel, "cumulative probability", xlo, xhi, 0.0, 1.0, [_polyline(pts, "black")])


def svg_curve(curve: BinnedCurve, title: str, ylabel: str) -> str:
    edges = curve.bin_edges
    mids = [(float(a) + float(b)) / 2 for a, b in zip(edges, edges[1:])]
    vals = [float(v) for col in (curve.q25, curve.q50, curve.q95) for v in col if v is not None]
    ylo, yhi = (min(vals), max(vals)) if vals else (0.0, 1.0)
    sx = _scale(edges[0], edges[-1], PAD, W - PAD)
    sy = _scale(ylo, yhi, H - PAD, PAD)
    body = []
    # blue 25%, red median, green 95%
    for col, color in ((curve.q25, "blue"), (curve.q50, "red"), (curve.q95, "green")):
        pts = [(sx(m), sy(v)) for m, v in zip(mids, col) if v is not None]
        if pts:
            body.append(_polyline(pts, color))
    return _frame(title, "time into slot (ms)", ylabel, edges[0], edges[-1], ylo, yhi, body)

