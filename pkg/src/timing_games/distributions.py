"""Empirical distributions: ECDFs, nearest-rank quantiles and inverse-CDF sampling.

Distributions are step functions over the observed samples. Nothing here
interpolates, so every draw and every quantile is a member of the sample set.

Randomness comes from :class:`SeededRng`, a counter-based generator addressed
by ``(seed, stream_id)``. Giving each Monte Carlo run its own stream makes the
merged output independent of execution order.
"""

from __future__ import annotations

import hashlib
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from functools import cached_property
from numbers import Real
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyInput, NonFiniteSample, QuantileOutOfRange

CACHE_MAGIC = "# ecdf-cache v1"
SUMMARY_LEVELS = (Fraction(1, 4), Fraction(1, 2), Fraction(19, 20))


@dataclass(frozen=True)
class SeededRng:
    """Philox stream keyed by ``seed`` (low 64 bits) and ``stream_id`` (high 64 bits)."""

    seed: int
    stream_id: int = 0
    _gen: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if not (0 <= v < 2**64):
                raise ValueError(f"{name} must be a 64-bit unsigned integer, got {v}")
        key = self.seed | (self.stream_id << 64)
        object.__setattr__(self, "_gen", np.random.Generator(np.random.Philox(key=key)))

    def stream(self, stream_id: int) -> SeededRng:
        """A fresh generator on another stream of the same seed."""
        return SeededRng(self.seed, stream_id)

    def fresh(self) -> SeededRng:
        """A copy rewound to the start of this stream."""
        return SeededRng(self.seed, self.stream_id)

    def random(self, size=None):
        return self._gen.random(size)

    def binomial(self, n: int, p: float) -> int:
        return int(self._gen.binomial(n, p))

    def integers(self, low: int, high: int, size=None):
        return self._gen.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)


def _normalize(x) -> Real:
    if isinstance(x, bool) or not isinstance(x, (Real, Decimal)):
        raise TypeError(f"sample must be a real number, got {x!r}")
    if isinstance(x, Decimal):
        if not x.is_finite():
            raise NonFiniteSample(f"non-finite sample {x!r}")
        return Fraction(x)
    if isinstance(x, float) and not math.isfinite(x):
        raise NonFiniteSample(f"non-finite sample {x!r}")
    return x


def _as_fraction(q) -> Fraction:
    if isinstance(q, float):
        # 0.07 must mean 7/100, not the nearest binary double
        return Fraction(repr(q))
    return Fraction(q)


@dataclass(frozen=True)
class EmpiricalDistribution:
    samples: tuple
    weights: tuple | None = None
    units: str = ""

    def __post_init__(self):
        if not self.samples:
            raise EmptyInput("empirical distribution needs at least one sample")
        if any(b < a for a, b in zip(self.samples, self.samples[1:])):
            raise ValueError("samples must be sorted ascending; use build_ecdf")
        if self.weights is not None:
            if len(self.weights) != len(self.samples):
                raise ValueError("weights and samples differ in length")
            for w in self.weights:
                if isinstance(w, float) and not math.isfinite(w):
                    raise NonFiniteSample(f"non-finite weight {w!r}")
                if not w > 0:
                    raise ValueError(f"weights must be strictly positive, got {w!r}")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def min(self):
        return self.samples[0]

    @property
    def max(self):
        return self.samples[-1]

    @cached_property
    def _cum_weights(self) -> list[Fraction]:
        if self.weights is None:
            return list(range(1, len(self.samples) + 1))
        out, acc = [], Fraction(0)
        for w in self.weights:
            acc += _as_fraction(w)
            out.append(acc)
        return out

    @cached_property
    def _cdf_table(self) -> np.ndarray:
        cum = np.array([float(c) for c in self._cum_weights], dtype=np.float64)
        table = cum / cum[-1]
        table[-1] = 1.0
        return table

    @cached_property
    def values(self) -> np.ndarray:
        """Samples as float64, for vectorized Monte Carlo."""
        return np.array([float(s) for s in self.samples], dtype=np.float64)

    def cdf(self, x) -> Fraction:
        """Exact weight fraction of samples <= x."""
        i = bisect_right(self.samples, x)
        if i == 0:
            return Fraction(0)
        return Fraction(self._cum_weights[i - 1]) / Fraction(self._cum_weights[-1])

    def quantile(self, q):
        return quantile(self, q)

    def sha256(self) -> str:
        h = hashlib.sha256()
        for i, s in enumerate(self.samples):
            h.update(_fmt_number(s).encode())
            if self.weights is not None:
                h.update(b"\t" + _fmt_number(self.weights[i]).encode())
            h.update(b"\n")
        return h.hexdigest()


@dataclass(frozen=True, slots=True)
class QuantileSummary:
    q25: Real
    q50: Real
    q95: Real

    def __post_init__(self):
        if not (self.q25 <= self.q50 <= self.q95):
            raise ValueError(f"quantiles out of order: {self.q25}, {self.q50}, {self.q95}")

    def as_tuple(self) -> tuple:
        return (self.q25, self.q50, self.q95)

    def map(self, fn) -> QuantileSummary:
        """Apply a monotone non-decreasing function to all three quantiles."""
        return QuantileSummary(fn(self.q25), fn(self.q50), fn(self.q95))


def build_ecdf(samples: Iterable, weights: Sequence | None = None, units: str = "") -> EmpiricalDistribution:
    values = [_normalize(s) for s in samples]
    if not values:
        raise EmptyInput("cannot build an ECDF from zero samples")
    if weights is None:
        return EmpiricalDistribution(tuple(sorted(values)), None, units)
    weights = list(weights)
    if len(weights) != len(values):
        raise ValueError("weights and samples differ in length")
    order = sorted(range(len(values)), key=values.__getitem__)
    return EmpiricalDistribution(
        tuple(values[i] for i in order), tuple(weights[i] for i in order), units
    )


def nearest_rank(sorted_values: Sequence, q):
    """Nearest-rank quantile of an already sorted, unweighted sequence."""
    n = len(sorted_values)
    if n == 0:
        raise EmptyInput("quantile of an empty sequence")
    qf = _as_fraction(q)
    if not (0 <= qf <= 1):
        raise QuantileOutOfRange(f"q must lie in [0, 1], got {q}")
    rank = max(math.ceil(qf * n), 1)
    return sorted_values[rank - 1]


def quantile(dist: EmpiricalDistribution, q):
    """Smallest sample whose CDF reaches ``q``; ``q = 0`` yields the minimum."""
    if dist.weights is None:
        return nearest_rank(dist.samples, q)
    qf = _as_fraction(q)
    if not (0 <= qf <= 1):
        raise QuantileOutOfRange(f"q must lie in [0, 1], got {q}")
    cum = dist._cum_weights
    target = qf * cum[-1]
    lo, hi = 0, len(cum) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if cum[mid] >= target:
            hi = mid
        else:
            lo = mid + 1
    return dist.samples[lo]


def summarize(dist: EmpiricalDistribution) -> QuantileSummary:
    return QuantileSummary(*(quantile(dist, q) for q in SUMMARY_LEVELS))


def sample_indices(dist: EmpiricalDistribution, rng: SeededRng, size: int) -> np.ndarray:
    u = rng.random(size)
    return np.searchsorted(dist._cdf_table, u, side="left")


def sample(dist: EmpiricalDistribution, rng: SeededRng):
    """One inverse-CDF draw; always returns a member of ``dist.samples``."""
    u = rng.random()
    idx = int(np.searchsorted(dist._cdf_table, u, side="left"))
    return dist.samples[idx]


def sample_many(dist: EmpiricalDistribution, rng: SeededRng, size: int) -> np.ndarray:
    """Vectorized draws returned as float64 values."""
    return dist.values[sample_indices(dist, rng, size)]


def _fmt_number(x) -> str:
    if isinstance(x, int):
        return str(x)
    if isinstance(x, Fraction):
        return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    return repr(float(x))


def _parse_number(s: str):
    if "/" in s:
        return Fraction(s)
    if any(c in s for c in ".eEn"):
        return float(s)
    return int(s)


def write_ecdf_cache(dist: EmpiricalDistribution, path, source_sha256: str | None = None) -> None:
    """Write ``dist`` as a portable text table.

    Layout: a ``# ecdf-cache v1`` line, then ``# count``, ``# units``,
    ``# source_sha256`` and ``# weighted`` header lines, then one sample per
    line (``sample`` or ``sample<TAB>weight``). Numbers are integers, exact
    fractions ``p/q``, or Python float reprs.
    """
    lines = [
        CACHE_MAGIC,
        f"# count: {len(dist)}",
        f"# units: {dist.units}",
        f"# source_sha256: {source_sha256 or dist.sha256()}",
        f"# weighted: {'yes' if dist.weights is not None else 'no'}",
    ]
    for i, s in enumerate(dist.samples):
        if dist.weights is None:
            lines.append(_fmt_number(s))
        else:
            lines.append(f"{_fmt_number(s)}\t{_fmt_number(dist.weights[i])}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_ecdf_cache(path) -> EmpiricalDistribution:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text or text[0].strip() != CACHE_MAGIC:
        raise ValueError(f"{path}: not an ECDF cache file")
    header = {}
    body = []
    for line in text[1:]:
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            header[key.strip()] = value.strip()
        elif line.strip():
            body.append(line)
    samples, weights = [], []
    for line in body:
        parts = line.split("\t")
        samples.append(_parse_number(parts[0]))
        if len(parts) > 1:
            weights.append(_parse_number(parts[1]))
    if int(header.get("count", len(samples))) != len(samples):
        raise ValueError(f"{path}: header count {header['count']} != {len(samples)} rows")
    weighted = header.get("weighted", "no") == "yes"
    return build_ecdf(samples, weights if weighted else None, units=header.get("units", ""))
