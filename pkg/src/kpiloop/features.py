"""Causal 6-dimensional feature extraction for KPI points.

Each point t is represented by five differences against the trailing window
of up to ``w=5`` preceding values (max, min, mean, previous value, and a
least-squares line extrapolated to t) plus the spectral-residual saliency of
the trailing day-length subsequence. Row t never looks at values after t.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .timeseries import TimeSeries

WINDOW_SIZE = 5
SMOOTH_WIDTH = 3  # moving-average width on the log-amplitude spectrum
LOG_GUARD = 1e-8
DEFAULT_SALIENCY_WINDOW = 288  # one day at 5-minute sampling

FEATURE_NAMES = ("max", "min", "mean", "naive", "linear_residual", "saliency_map")


@dataclass(frozen=True)
class FeatureMatrix:
    """Per-point feature rows, aligned with the source series."""

    series_id: str
    rows: np.ndarray  # (n, 6) float64, finite everywhere
    window_size: int = WINDOW_SIZE
    saliency_window: int = DEFAULT_SALIENCY_WINDOW

    def __post_init__(self):
        rows = np.ascontiguousarray(self.rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[1] != len(FEATURE_NAMES):
            raise ValueError(f"rows must be (n, {len(FEATURE_NAMES)})")
        if not np.all(np.isfinite(rows)):
            raise ValueError("feature rows must be finite")
        rows.flags.writeable = False
        object.__setattr__(self, "rows", rows)

    @property
    def n(self) -> int:
        return self.rows.shape[0]


def saliency_window_for(ts: TimeSeries) -> int:
    """Points per day for the series' sampling interval (fallback 288)."""
    if ts.sampling_interval > 0:
        return max(1, 86400 // ts.sampling_interval)
    return DEFAULT_SALIENCY_WINDOW


def window_features(ts: TimeSeries, t: int) -> np.ndarray:
    """The five trailing-window difference features of point t.

    The window is the up-to-``w`` values ending at t-1. Cold start: at t=0
    all features are 0; with a single preceding point the linear residual
    degrades to the previous-value difference.
    """
    x = ts.values
    if not 0 <= t < len(x):
        raise IndexError(f"t={t} outside series of length {len(x)}")
    if t == 0:
        return np.zeros(5)
    lo = max(0, t - WINDOW_SIZE)
    win = x[lo:t]
    cur = x[t]
    naive = cur - x[t - 1]
    if len(win) < 2:
        lin = naive
    else:
        lin = cur - _linfit_next(win)
    return np.array(
        [cur - win.max(), cur - win.min(), cur - win.mean(), naive, lin]
    )


def _linfit_next(win: np.ndarray) -> float:
    """Least-squares line through (0..m-1, win) evaluated at position m."""
    m = len(win)
    pos = np.arange(m, dtype=np.float64)
    pos_mean = pos.mean()
    denom = ((pos - pos_mean) ** 2).sum()
    slope = ((pos - pos_mean) * (win - win.mean())).sum() / denom
    return win.mean() + slope * (m - pos_mean)


def _trailing_mean(arr: np.ndarray, width: int) -> np.ndarray:
    """Mean of the up-to-``width`` entries ending at each index (axis -1)."""
    csum = np.cumsum(arr, axis=-1, dtype=np.float64)
    out = np.empty_like(csum)
    out[..., :width] = csum[..., :width] / np.arange(1, min(width, arr.shape[-1]) + 1)
    if arr.shape[-1] > width:
        out[..., width:] = (csum[..., width:] - csum[..., :-width]) / width
    return out


def _sr_last(windows: np.ndarray) -> np.ndarray:
    """Last saliency-map entry of each window (rows of a 2-D array).

    Amplitude/phase via FFT, log-amplitude guarded by ``LOG_GUARD``, residual
    against a trailing moving average of width ``SMOOTH_WIDTH``, back through
    the inverse transform.
    """
    spectrum = np.fft.fft(windows, axis=-1)
    amplitude = np.abs(spectrum)
    log_amp = np.log(amplitude + LOG_GUARD)
    residual = log_amp - _trailing_mean(log_amp, SMOOTH_WIDTH)
    restored = np.fft.ifft(np.exp(residual + 1j * np.angle(spectrum)), axis=-1)
    return np.abs(restored[..., -1])


def saliency(ts: TimeSeries, t: int, window: int | None = None) -> float:
    """Spectral-residual saliency of the trailing subsequence ending at t.

    The subsequence has length min(window, t+1); at t=0 the saliency is
    defined as 0.
    """
    if not 0 <= t < ts.n:
        raise IndexError(f"t={t} outside series of length {ts.n}")
    if t == 0:
        return 0.0
    window = window or saliency_window_for(ts)
    lo = max(0, t + 1 - window)
    return float(_sr_last(ts.values[np.newaxis, lo : t + 1])[0])


def saliency_series(
    values: np.ndarray, window: int, chunk: int = 1024
) -> np.ndarray:
    """Saliency at every point, batched over sliding windows."""
    n = len(values)
    out = np.zeros(n)
    head = min(window - 1, n)
    for t in range(1, head):
        out[t] = _sr_last(values[np.newaxis, : t + 1])[0]
    if n >= window:
        full = np.lib.stride_tricks.sliding_window_view(values, window)
        for start in range(0, full.shape[0], chunk):
            block = full[start : start + chunk]
            out[window - 1 + start : window - 1 + start + len(block)] = _sr_last(block)
    return out


def _window_feature_columns(values: np.ndarray) -> np.ndarray:
    """Vectorized window features for all points; (n, 5) array."""
    n = len(values)
    cols = np.zeros((n, 5))
    if n < 2:
        return cols
    for t in range(1, min(WINDOW_SIZE, n)):
        cols[t] = window_features_values(values, t)
    if n <= WINDOW_SIZE:
        return cols

    w = WINDOW_SIZE
    wins = np.lib.stride_tricks.sliding_window_view(values[:-1], w)
    cur = values[w:]
    pos = np.arange(w, dtype=np.float64)
    pos_mean = pos.mean()
    denom = ((pos - pos_mean) ** 2).sum()
    win_mean = wins.mean(axis=1)
    slope = ((pos - pos_mean) * (wins - win_mean[:, None])).sum(axis=1) / denom
    predicted = win_mean + slope * (w - pos_mean)

    cols[w:, 0] = cur - wins.max(axis=1)
    cols[w:, 1] = cur - wins.min(axis=1)
    cols[w:, 2] = cur - win_mean
    cols[w:, 3] = cur - values[w - 1 : -1]
    cols[w:, 4] = cur - predicted
    return cols


def window_features_values(values: np.ndarray, t: int) -> np.ndarray:
    """Scalar-path window features over a bare value array (cold-start safe)."""
    if t == 0:
        return np.zeros(5)
    lo = max(0, t - WINDOW_SIZE)
    win = values[lo:t]
    cur = values[t]
    naive = cur - values[t - 1]
    lin = naive if len(win) < 2 else cur - _linfit_next(win)
    return np.array(
        [cur - win.max(), cur - win.min(), cur - win.mean(), naive, lin]
    )


def featurize(ts: TimeSeries, saliency_window: int | None = None) -> FeatureMatrix:
    """Full feature matrix for a series; deterministic given its input."""
    window = saliency_window or saliency_window_for(ts)
    rows = np.empty((ts.n, 6))
    rows[:, :5] = _window_feature_columns(ts.values)
    rows[:, 5] = saliency_series(ts.values, window)
    return FeatureMatrix(
        series_id=ts.id, rows=rows, saliency_window=window
    )
