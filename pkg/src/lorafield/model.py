"""Log-distance path loss modeling, SF demodulation thresholds, and
reception-probability curves.

The deterministic channel is ``PL(d) = A + 10 n log10(d)`` with the
reference distance d0 = 1 m absorbed into the intercept A; shadow fading is
a zero-mean Gaussian of standard deviation sigma around that mean. Fitting
is closed-form ordinary least squares of the response against log10(d),
with sigma estimated from the residuals using the regression degrees of
freedom (N - 2).

Per-SF SNR demodulation thresholds follow the SX1276 transceiver limits;
a packet counts as demodulable when its SNR meets the threshold (closed
inequality). Reception probability at distance d is the Gaussian tail above
the SF threshold around a distance-dependent mean SNR:

    P_recv(d) = 1 - Phi((gamma_sf - mu(d)) / sigma)
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ingest import DataRate, LinkSample


class DegenerateFitError(ValueError):
    """Regression input has fewer than two distinct distances."""


@dataclass(frozen=True)
class PathLossModel:
    """Log-distance channel parameters: intercept A (dB at 1 m), exponent n,
    shadowing sigma (dB)."""

    intercept_a_db: float
    exponent_n: float
    sigma_db: float = 0.0
    reference_d0_m: float = 1.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.intercept_a_db) and math.isfinite(self.exponent_n)):
            raise ValueError("intercept_a_db and exponent_n must be finite")
        if not (math.isfinite(self.sigma_db) and self.sigma_db >= 0):
            raise ValueError(f"sigma_db must be >= 0, got {self.sigma_db}")
        if not (math.isfinite(self.reference_d0_m) and self.reference_d0_m > 0):
            raise ValueError("reference_d0_m must be positive")

    def intercept_at(self, d0_m: float) -> float:
        """Mean path loss at an explicit reference distance d0.

        Re-expresses the model in its two-parameter reference form,
        PL(d) = PL(d0) + 10 n log10(d / d0), without changing the fit.
        """
        if not (math.isfinite(d0_m) and d0_m > 0):
            raise ValueError(f"d0_m must be positive, got {d0_m}")
        return self.intercept_a_db + 10.0 * self.exponent_n * math.log10(d0_m)


@dataclass(frozen=True)
class SnrTrend:
    """Linear trend of SNR against log10(distance), with residual sigma."""

    intercept_db: float
    slope_db_per_decade: float
    sigma_db: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.sigma_db) and self.sigma_db >= 0):
            raise ValueError(f"sigma_db must be >= 0, got {self.sigma_db}")

    def mean_snr_db(self, d_m: float) -> float:
        return self.intercept_db + self.slope_db_per_decade * math.log10(d_m)


@dataclass(frozen=True)
class FitDiagnostics:
    mae_db: float
    rmse_db: float
    residual_mean_db: float
    sample_count: int


@dataclass(frozen=True)
class ReceptionCurve:
    """Sampled reception probability vs distance for one spreading factor."""

    sf: int
    points: tuple[tuple[float, float], ...]  # (distance_m, probability)


@dataclass(frozen=True)
class SfTable:
    """Spreading-factor rows: (sf, chips per symbol, SNR threshold in dB)."""

    rows: tuple[tuple[int, int, float], ...]

    def __post_init__(self) -> None:
        if not self.rows:
            raise ValueError("SfTable needs at least one row")
        prev = None
        for sf, chips, threshold in self.rows:
            if chips != 2 ** sf:
                raise ValueError(f"SF{sf} chips/symbol must be 2^{sf}, got {chips}")
            if prev is not None:
                prev_sf, prev_chips, prev_thr = prev
                if sf != prev_sf + 1 or chips != 2 * prev_chips:
                    raise ValueError("SF rows must be consecutive with doubling chips")
                if threshold >= prev_thr:
                    raise ValueError("SNR thresholds must strictly decrease with SF")
            prev = (sf, chips, threshold)

    def threshold_db(self, sf: int) -> float:
        for row_sf, _, threshold in self.rows:
            if row_sf == sf:
                return threshold
        raise ValueError(f"sf {sf} outside table range "
                         f"[{self.rows[0][0]}, {self.rows[-1][0]}]")

    def chips_per_symbol(self, sf: int) -> int:
        for row_sf, chips, _ in self.rows:
            if row_sf == sf:
                return chips
        raise ValueError(f"sf {sf} outside table range "
                         f"[{self.rows[0][0]}, {self.rows[-1][0]}]")

    @property
    def sfs(self) -> tuple[int, ...]:
        return tuple(sf for sf, _, _ in self.rows)


# SX1276 demodulation limits at 125 kHz.
DEFAULT_SF_TABLE = SfTable(rows=(
    (6, 64, -5.0),
    (7, 128, -7.5),
    (8, 256, -10.0),
    (9, 512, -12.5),
    (10, 1024, -15.0),
    (11, 2048, -17.5),
    (12, 4096, -20.0),
))


def snr_threshold(sf: int, table: SfTable = DEFAULT_SF_TABLE) -> float:
    """Minimum SNR (dB) at which a packet at this SF is demodulable."""
    return table.threshold_db(sf)


def is_demodulable(sf: int, snr_db: float, table: SfTable = DEFAULT_SF_TABLE) -> bool:
    """True when the SNR meets the SF threshold (closed at the boundary)."""
    return snr_db >= table.threshold_db(sf)


def dr_to_sf(dr: DataRate) -> tuple[int, int]:
    """Map a US915 data-rate index to its (spreading factor, bandwidth in Hz)."""
    return dr.sf, dr.bandwidth_hz


def predict_path_loss(model: PathLossModel, d_m: float) -> float:
    """Mean path loss in dB at distance d (shadowing excluded)."""
    if not math.isfinite(d_m) or d_m < model.reference_d0_m:
        raise ValueError(
            f"distance {d_m} below reference distance {model.reference_d0_m}")
    return model.intercept_a_db + 10.0 * model.exponent_n * math.log10(d_m)


def _regression_arrays(samples: Sequence[LinkSample], response: str
                       ) -> tuple[np.ndarray, np.ndarray]:
    if len(samples) < 2:
        raise DegenerateFitError(f"need at least 2 samples, got {len(samples)}")
    d = np.array([s.distance_m for s in samples], dtype=float)
    y = np.array([getattr(s, response) for s in samples], dtype=float)
    if not np.all(np.isfinite(d)) or not np.all(np.isfinite(y)):
        raise ValueError("samples contain non-finite values")
    if np.any(d <= 0):
        raise ValueError("samples contain non-positive distances")
    if d.min() == d.max():
        raise DegenerateFitError("need at least 2 distinct distances")
    return np.log10(d), y


def _ols(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float, np.ndarray]:
    """Closed-form OLS of y on x; returns (intercept, slope, sigma, residuals).

    sigma is the residual standard deviation with N - 2 degrees of freedom
    (0.0 for the exact two-point fit).
    """
    x_mean = x.mean()
    y_mean = y.mean()
    dx = x - x_mean
    slope = float(np.dot(dx, y - y_mean) / np.dot(dx, dx))
    intercept = float(y_mean - slope * x_mean)
    residuals = y - (intercept + slope * x)
    dof = x.size - 2
    sigma = math.sqrt(float(np.dot(residuals, residuals)) / dof) if dof > 0 else 0.0
    return intercept, slope, sigma, residuals


def _diagnostics(residuals: np.ndarray) -> FitDiagnostics:
    return FitDiagnostics(
        mae_db=float(np.mean(np.abs(residuals))),
        rmse_db=float(np.sqrt(np.mean(residuals ** 2))),
        residual_mean_db=float(np.mean(residuals)),
        sample_count=int(residuals.size),
    )


def fit_path_loss(samples: Sequence[LinkSample]) -> tuple[PathLossModel, FitDiagnostics]:
    """Fit the log-distance model to measured path loss by least squares.

    One pooled model over all gateways and SFs: path_loss_db regressed on
    log10(distance_m); the slope divided by 10 is the exponent n and the
    intercept is A (the 1 m reference is absorbed into A).
    """
    x, y = _regression_arrays(samples, "path_loss_db")
    intercept, slope, sigma, residuals = _ols(x, y)
    model = PathLossModel(intercept_a_db=intercept, exponent_n=slope / 10.0,
                          sigma_db=sigma)
    return model, _diagnostics(residuals)


def fit_snr_trend(samples: Sequence[LinkSample]) -> SnrTrend:
    """Fit SNR against log10(distance); pass pre-filtered samples for a
    per-SF trend, or everything for the pooled default."""
    x, y = _regression_arrays(samples, "snr_db")
    intercept, slope, sigma, _ = _ols(x, y)
    return SnrTrend(intercept_db=intercept, slope_db_per_decade=slope,
                    sigma_db=sigma)


def _model_residuals(samples: Sequence[LinkSample], model: PathLossModel) -> np.ndarray:
    if not samples:
        raise ValueError("no samples")
    return np.array([s.path_loss_db - predict_path_loss(model, s.distance_m)
                     for s in samples])


def mae(samples: Sequence[LinkSample], model: PathLossModel) -> float:
    """Mean absolute error (dB) of measured path loss against the model."""
    return float(np.mean(np.abs(_model_residuals(samples, model))))


def rmse(samples: Sequence[LinkSample], model: PathLossModel) -> float:
    """Root-mean-square error (dB) of measured path loss against the model."""
    return float(np.sqrt(np.mean(_model_residuals(samples, model) ** 2)))


def standard_normal_cdf(x: float) -> float:
    """Standard normal CDF via erfc; absolute error well below 1e-7 over
    [-8, 8], saturating to 0/1 beyond the representable tails."""
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def reception_probability(trend: SnrTrend, sf: int, d_m: float,
                          table: SfTable = DEFAULT_SF_TABLE) -> float:
    """Probability that a packet at this SF and distance is demodulable.

    Gaussian tail of the SNR distribution above the SF threshold; with
    sigma = 0 the curve degenerates to a step (1.0 when the mean SNR meets
    the threshold, else 0.0).
    """
    gamma = table.threshold_db(sf)
    if not math.isfinite(d_m) or d_m < 1.0:
        raise ValueError(f"distance must be >= 1 m, got {d_m}")
    mu = trend.mean_snr_db(d_m)
    if trend.sigma_db == 0.0:
        return 1.0 if mu >= gamma else 0.0
    return 1.0 - standard_normal_cdf((gamma - mu) / trend.sigma_db)


def reception_curve(trend: SnrTrend, sf: int, d_min_m: float, d_max_m: float,
                    steps: int, table: SfTable = DEFAULT_SF_TABLE) -> ReceptionCurve:
    """Sample the reception probability on a log-spaced distance grid with
    inclusive endpoints."""
    if steps < 2:
        raise ValueError(f"steps must be >= 2, got {steps}")
    if not (math.isfinite(d_min_m) and math.isfinite(d_max_m)):
        raise ValueError("distance bounds must be finite")
    if d_min_m < 1.0 or d_max_m <= d_min_m:
        raise ValueError(f"need 1 <= d_min < d_max, got [{d_min_m}, {d_max_m}]")
    ratio = d_max_m / d_min_m
    grid = [d_min_m * ratio ** (i / (steps - 1)) for i in range(1, steps - 1)]
    grid = [d_min_m] + grid + [d_max_m]
    points = tuple((d, reception_probability(trend, sf, d, table)) for d in grid)
    return ReceptionCurve(sf=sf, points=points)


MODEL_JSON_KEYS = ("intercept_a_db", "exponent_n", "sigma_db", "reference_d0_m",
                   "sample_count", "mae_db", "rmse_db")


def model_to_dict(model: PathLossModel, diagnostics: FitDiagnostics) -> dict:
    """Serializable record of a fitted model plus its diagnostics."""
    return {
        "intercept_a_db": model.intercept_a_db,
        "exponent_n": model.exponent_n,
        "sigma_db": model.sigma_db,
        "reference_d0_m": model.reference_d0_m,
        "sample_count": diagnostics.sample_count,
        "mae_db": diagnostics.mae_db,
        "rmse_db": diagnostics.rmse_db,
    }


def model_from_dict(record: dict) -> PathLossModel:
    missing = [k for k in ("intercept_a_db", "exponent_n", "sigma_db") if k not in record]
    if missing:
        raise ValueError(f"model record missing keys: {', '.join(missing)}")
    return PathLossModel(
        intercept_a_db=float(record["intercept_a_db"]),
        exponent_n=float(record["exponent_n"]),
        sigma_db=float(record["sigma_db"]),
        reference_d0_m=float(record.get("reference_d0_m", 1.0)),
    )
