"""Distribution summaries for coverage reports: empirical CDFs, distance-binned
boxplot statistics, per-gateway summaries, and threshold-margin rates.

Quantiles use linear interpolation between order statistics at p * (N - 1)
(the "type 7" convention, numpy's default). Distance bins are half-open
[lo, hi), so every sample lands in exactly one bin.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ingest import LinkSample
from .model import DEFAULT_SF_TABLE, SfTable

DEFAULT_BIN_WIDTH_M = 500.0
DEFAULT_SPARSE_MIN_COUNT = 5


@dataclass(frozen=True)
class EmpiricalCdf:
    """Right-continuous step CDF: F(x) = fraction of values <= x."""

    sorted_values: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.sorted_values:
            raise ValueError("empirical CDF needs at least one value")

    def __call__(self, x: float) -> float:
        return bisect_right(self.sorted_values, x) / len(self.sorted_values)

    def steps(self) -> list[tuple[float, float]]:
        """(value, F(value)) at each distinct value, ending at 1.0."""
        n = len(self.sorted_values)
        out = []
        for i, v in enumerate(self.sorted_values):
            if i + 1 == n or self.sorted_values[i + 1] != v:
                out.append((v, (i + 1) / n))
        return out


def cdf(values: Sequence[float]) -> EmpiricalCdf:
    """Empirical CDF of a non-empty collection of finite values."""
    if len(values) == 0:
        raise ValueError("no values")
    if not all(math.isfinite(v) for v in values):
        raise ValueError("values must be finite")
    return EmpiricalCdf(tuple(sorted(values)))


@dataclass(frozen=True)
class BinSummary:
    """Five-number summary plus mean for one (distance bin, SF) group."""

    count: int
    min: float
    q1: float
    median: float
    q3: float
    max: float
    mean: float
    sparse: bool


@dataclass(frozen=True)
class DistanceBins:
    """Per-bin, per-SF summaries over half-open distance bins."""

    edges: tuple[float, ...]
    groups: dict[tuple[int, int], BinSummary]  # keyed by (bin index, sf)
    total_count: int

    def bin_bounds(self, index: int) -> tuple[float, float]:
        return self.edges[index], self.edges[index + 1]


def default_edges(max_distance_m: float, width_m: float = DEFAULT_BIN_WIDTH_M
                  ) -> list[float]:
    """Uniform bin edges from 0 covering max_distance_m (exclusive top edge)."""
    if not (math.isfinite(width_m) and width_m > 0):
        raise ValueError(f"bin width must be positive, got {width_m}")
    if not (math.isfinite(max_distance_m) and max_distance_m >= 0):
        raise ValueError(f"max distance must be >= 0, got {max_distance_m}")
    n = int(max_distance_m // width_m) + 1
    return [i * width_m for i in range(n + 1)]


def _validate_edges(edges: Sequence[float]) -> None:
    if len(edges) < 2:
        raise ValueError("need at least 2 bin edges")
    for lo, hi in zip(edges, edges[1:]):
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise ValueError("bin edges must be finite and strictly increasing")


def _bin_index(d: float, edges: Sequence[float]) -> int:
    i = bisect_right(edges, d) - 1
    if i < 0 or d >= edges[-1]:
        raise ValueError(f"distance {d} outside bin edges "
                         f"[{edges[0]}, {edges[-1]})")
    return i


def boxplot_by_bin(samples: Sequence[LinkSample], edges: Sequence[float],
                   min_count: int = DEFAULT_SPARSE_MIN_COUNT) -> DistanceBins:
    """SNR five-number summaries per (distance bin, SF).

    Groups below min_count are flagged sparse but still reported; empty
    groups are simply absent. Raises if a sample falls outside the edges.
    """
    _validate_edges(edges)
    grouped: dict[tuple[int, int], list[float]] = {}
    for s in samples:
        key = (_bin_index(s.distance_m, edges), s.sf)
        grouped.setdefault(key, []).append(s.snr_db)

    groups: dict[tuple[int, int], BinSummary] = {}
    for key in sorted(grouped):
        values = np.array(grouped[key])
        lo, q1, median, q3, hi = np.quantile(values, [0.0, 0.25, 0.5, 0.75, 1.0])
        groups[key] = BinSummary(
            count=values.size,
            min=float(lo), q1=float(q1), median=float(median),
            q3=float(q3), max=float(hi),
            mean=float(values.mean()),
            sparse=values.size < min_count,
        )
    return DistanceBins(edges=tuple(edges), groups=groups, total_count=len(samples))


@dataclass(frozen=True)
class MarginRate:
    """Fraction of received packets in a group at or above their SF threshold."""

    count: int
    frac_above_threshold: float


def threshold_margin_rate(samples: Sequence[LinkSample], edges: Sequence[float],
                          table: SfTable = DEFAULT_SF_TABLE
                          ) -> dict[tuple[int, int], MarginRate]:
    """Per (distance bin, SF) rate of SNR >= threshold among received packets."""
    _validate_edges(edges)
    counts: dict[tuple[int, int], list[int]] = {}
    for s in samples:
        key = (_bin_index(s.distance_m, edges), s.sf)
        tally = counts.setdefault(key, [0, 0])
        tally[0] += 1
        if s.snr_db >= table.threshold_db(s.sf):
            tally[1] += 1
    return {key: MarginRate(count=n, frac_above_threshold=above / n)
            for key, (n, above) in sorted(counts.items())}


@dataclass(frozen=True)
class GatewaySummary:
    count: int
    rssi_cdf: EmpiricalCdf
    snr_cdf: EmpiricalCdf
    rssi_mean_dbm: float
    rssi_std_db: float
    snr_mean_db: float
    snr_std_db: float


def per_gateway_summary(samples: Sequence[LinkSample]) -> dict[str, GatewaySummary]:
    """Independent RSSI/SNR distribution summaries per gateway.

    Standard deviations are sample statistics (ddof=1), reported as 0.0 for
    single-sample gateways.
    """
    by_gateway: dict[str, list[LinkSample]] = {}
    for s in samples:
        by_gateway.setdefault(s.gateway_id, []).append(s)

    out: dict[str, GatewaySummary] = {}
    for gateway_id in sorted(by_gateway):
        group = by_gateway[gateway_id]
        rssi = np.array([s.rssi_dbm for s in group])
        snr = np.array([s.snr_db for s in group])
        out[gateway_id] = GatewaySummary(
            count=len(group),
            rssi_cdf=cdf(rssi.tolist()),
            snr_cdf=cdf(snr.tolist()),
            rssi_mean_dbm=float(rssi.mean()),
            rssi_std_db=float(rssi.std(ddof=1)) if rssi.size > 1 else 0.0,
            snr_mean_db=float(snr.mean()),
            snr_std_db=float(snr.std(ddof=1)) if snr.size > 1 else 0.0,
        )
    return out
