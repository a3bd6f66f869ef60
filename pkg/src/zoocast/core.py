"""Series containers, instance normalization, trimming, metrics, CSV ingestion.

Everything here is a pure function over numpy arrays. A univariate series
is a 1-D float64 array; a multivariate series is a (T, C) float64 array
wrapped in MultivariateSeries together with optional channel names.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ZERO_STD_THRESHOLD = 1e-8


@dataclass(frozen=True)
class NormStats:
    """Per-window mean/std; std is the value actually used for division."""

    mean: float
    std: float

    def __post_init__(self):
        if not (self.std > 0):
            raise ValueError("std must be positive (fallback applied before storage)")


@dataclass(frozen=True)
class MultivariateSeries:
    """A (T, C) matrix of observations, channels along columns."""

    values: np.ndarray
    channel_names: tuple = ()

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"expected (T, C) with T, C >= 1, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("non-finite input")
        if self.channel_names and len(self.channel_names) != arr.shape[1]:
            raise ValueError("channel_names length does not match channel count")
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "channel_names", tuple(self.channel_names))

    @property
    def length(self) -> int:
        return self.values.shape[0]

    @property
    def num_channels(self) -> int:
        return self.values.shape[1]

    def channel(self, c: int) -> np.ndarray:
        return self.values[:, c]


@dataclass(frozen=True)
class Dataset:
    series: MultivariateSeries
    name: str
    granularity: str = ""


def as_series(x) -> np.ndarray:
    """Validate a univariate series: 1-D, nonempty, finite float64."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"expected 1-D series, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError("empty series")
    if not np.all(np.isfinite(arr)):
        raise ValueError("non-finite input")
    return arr


def normalize(x) -> tuple[np.ndarray, NormStats]:
    """Instance-normalize with population statistics.

    A window with population std below 1e-8 keeps its values centered but
    divides by 1.0, and that fallback std is what gets recorded.
    """
    arr = as_series(x)
    mu = float(arr.mean())
    sigma = float(arr.std())  # population std (ddof=0)
    if sigma < ZERO_STD_THRESHOLD:
        sigma = 1.0
    return (arr - mu) / sigma, NormStats(mean=mu, std=sigma)


def denormalize(x_norm, stats: NormStats) -> np.ndarray:
    arr = np.asarray(x_norm, dtype=np.float64)
    return stats.std * arr + stats.mean


def trim_to_last(x, n: int) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.shape[0] < n:
        raise ValueError(f"insufficient history: have {arr.shape[0]}, need {n}")
    return arr[arr.shape[0] - n:]


def trim_to_first(x, n: int) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.shape[0] < n:
        raise ValueError(f"insufficient history: have {arr.shape[0]}, need {n}")
    return arr[:n]


def _as_matrix_pair(truth, pred) -> tuple[np.ndarray, np.ndarray]:
    t = truth.values if isinstance(truth, MultivariateSeries) else np.asarray(truth, dtype=np.float64)
    p = pred.values if isinstance(pred, MultivariateSeries) else np.asarray(pred, dtype=np.float64)
    if t.ndim == 1:
        t = t[:, None]
    if p.ndim == 1:
        p = p[:, None]
    if t.shape != p.shape:
        raise ValueError(f"shape mismatch: truth {t.shape} vs pred {p.shape}")
    return t, p


def mse(truth, pred) -> float:
    """Mean squared error over all H*C entries."""
    t, p = _as_matrix_pair(truth, pred)
    return float(np.mean((t - p) ** 2))


def smape(truth, pred) -> float:
    """(200/H) * sum |Y - Yhat| / (|Y| + |Yhat|), averaged over channels.

    Terms with a near-zero denominator contribute 0.
    """
    t, p = _as_matrix_pair(truth, pred)
    denom = np.abs(t) + np.abs(p)
    terms = np.where(denom < ZERO_STD_THRESHOLD, 0.0, np.abs(t - p) / np.where(denom < ZERO_STD_THRESHOLD, 1.0, denom))
    h = t.shape[0]
    return float(np.mean(np.sum(terms, axis=0)) * 200.0 / h)


def mape(truth, pred) -> float:
    """(100/H) * sum |Y - Yhat| / |Y| averaged over channels.

    Entries with |Y| below 1e-8 are skipped and the per-channel count
    shrinks accordingly; an all-zero truth is undefined.
    """
    t, p = _as_matrix_pair(truth, pred)
    keep = np.abs(t) >= ZERO_STD_THRESHOLD
    if not keep.any():
        raise ValueError("undefined MAPE: all truth entries are zero")
    per_channel = []
    for c in range(t.shape[1]):
        k = keep[:, c]
        if not k.any():
            continue
        ratio = np.abs(t[k, c] - p[k, c]) / np.abs(t[k, c])
        per_channel.append(100.0 * np.sum(ratio) / k.sum())
    return float(np.mean(per_channel))


def load_csv(path, has_header: bool = True) -> Dataset:
    """Load a benchmark-style CSV: first column is an index, rest numeric.

    Errors name the 1-based row (and column where known).
    """
    p = Path(path)
    with open(p, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{p.name}: empty file")
    start = 0
    names: tuple = ()
    if has_header:
        header = rows[0]
        if len(header) < 2:
            raise ValueError(f"{p.name}: row 1: need at least 2 columns, got {len(header)}")
        names = tuple(h.strip() for h in header[1:])
        start = 1
    data_rows = rows[start:]
    if not data_rows:
        raise ValueError(f"{p.name}: no data rows")
    width = len(data_rows[0])
    if width < 2:
        raise ValueError(f"{p.name}: row {start + 1}: need at least 2 columns, got {width}")
    out = np.empty((len(data_rows), width - 1), dtype=np.float64)
    for i, row in enumerate(data_rows):
        rownum = start + i + 1
        if len(row) != width:
            raise ValueError(f"{p.name}: row {rownum}: expected {width} columns, got {len(row)}")
        for j, cell in enumerate(row[1:], start=2):
            try:
                v = float(cell)
            except ValueError:
                raise ValueError(f"{p.name}: row {rownum}, column {j}: non-numeric cell {cell!r}") from None
            if not np.isfinite(v):
                raise ValueError(f"{p.name}: row {rownum}, column {j}: non-finite cell {cell!r}")
            out[i, j - 2] = v
    return Dataset(series=MultivariateSeries(out, channel_names=names), name=p.stem)
