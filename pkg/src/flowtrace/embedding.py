"""Delay embedding and false-nearest-neighbor dimension estimation.

The embedding of a scalar series s is y_d(n) = [s(n), s(n+T), ..., s(n+(d-1)T)].
A neighbor pair at dimension d is declared false when adding the (d+1)-th
component separates it: either the new-component gap dwarfs the d-dimensional
distance (ratio test) or the (d+1)-dimensional distance is large relative to
the series scale (absolute test). The fraction of false neighbors per d drops
to a floor once d reaches the intrinsic dimension of the underlying dynamics.

All distance comparisons here are carried out on squared distances built by
summing per-component squared differences in component order. Tests verify
the counts against a brute-force reimplementation that materializes full
(d+1)-vectors; identical summation order makes that comparison exact rather
than approximate.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import IO, Sequence

import numpy as np

from .errors import DegenerateSeries, SeriesTooShort
from .parameters import ParameterSeries

_MIN_TESTED = 10  # below this many vectors a fraction is noise, not a statistic
_BLOCK = 256  # row block size for the neighbor search


@dataclass
class EmbeddingConfig:
    """Knobs for the false-nearest-neighbor test."""

    delay_T: int = 1
    max_dim: int = 10
    r_tol: float = 15.0
    a_tol: float = 2.0
    theiler_w: int = 1

    def __post_init__(self) -> None:
        if self.delay_T < 1:
            raise ValueError(f"delay_T must be >= 1, got {self.delay_T}")
        if self.max_dim < 2:
            raise ValueError(f"max_dim must be >= 2, got {self.max_dim}")
        if not self.r_tol > 1:
            raise ValueError(f"r_tol must exceed 1, got {self.r_tol}")
        if not self.a_tol > 0:
            raise ValueError(f"a_tol must be positive, got {self.a_tol}")
        if self.theiler_w < 0:
            raise ValueError(f"theiler_w must be >= 0, got {self.theiler_w}")


@dataclass
class DelayVectorSet:
    """Matrix of delay vectors; row m is y_dim(m)."""

    dim: int
    delay_T: int
    vectors: np.ndarray
    source_len: int

    def __len__(self) -> int:
        return len(self.vectors)


def _series_values(series: ParameterSeries | Sequence[float] | np.ndarray) -> np.ndarray:
    if isinstance(series, ParameterSeries):
        return np.asarray(series.values, dtype=float)
    return np.asarray(series, dtype=float)


def build_delay_vectors(
    series: ParameterSeries | Sequence[float] | np.ndarray, dim: int, delay_T: int
) -> DelayVectorSet:
    """Build the M x dim delay-vector matrix, M = N - (dim-1)*delay_T."""
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    if delay_T < 1:
        raise ValueError(f"delay_T must be >= 1, got {delay_T}")
    values = _series_values(series)
    n = len(values)
    m = n - (dim - 1) * delay_T
    if m < 1:
        raise SeriesTooShort(
            f"need at least {(dim - 1) * delay_T + 1} samples for dim={dim}, "
            f"delay_T={delay_T}; got {n}"
        )
    vectors = np.empty((m, dim), dtype=float)
    for k in range(dim):
        vectors[:, k] = values[k * delay_T : k * delay_T + m]
    return DelayVectorSet(dim=dim, delay_T=delay_T, vectors=vectors, source_len=n)


def _fnn_counts(
    values: np.ndarray, dim: int, delay_T: int, r_tol: float, a_tol: float,
    theiler_w: int, sigma: float,
) -> tuple[int, int]:
    """Count false neighbors at dimension dim among points valid at dim+1.

    Both the tested points and the candidate neighbors are restricted to
    indices whose (dim+1)-th component exists, so the counts agree exactly
    with a recomputation over materialized (dim+1)-vectors.
    """
    n = len(values)
    m1 = n - dim * delay_T
    if m1 < 1:
        raise SeriesTooShort(
            f"need at least {dim * delay_T + 1} samples to test dim={dim} "
            f"with delay_T={delay_T}; got {n}"
        )
    cols = [values[k * delay_T : k * delay_T + m1] for k in range(dim)]
    extra = values[dim * delay_T : dim * delay_T + m1]
    r_sq = r_tol * r_tol
    a_sq = (a_tol * sigma) ** 2
    all_idx = np.arange(m1)
    false_count = 0
    tested_count = 0
    for start in range(0, m1, _BLOCK):
        stop = min(start + _BLOCK, m1)
        acc = np.zeros((stop - start, m1), dtype=float)
        for col in cols:
            diff = col[start:stop, None] - col[None, :]
            acc += diff * diff
        banned = np.abs(all_idx[start:stop, None] - all_idx[None, :]) <= theiler_w
        acc[banned] = np.inf
        nn = np.argmin(acc, axis=1)  # ties resolve to the lowest index
        nn_sq = acc[np.arange(stop - start), nn]
        valid = np.isfinite(nn_sq)
        delta = np.abs(extra[start:stop] - extra[nn])
        delta_sq = delta * delta
        is_false = (delta_sq > r_sq * nn_sq) | (nn_sq + delta_sq > a_sq)
        false_count += int(np.count_nonzero(is_false & valid))
        tested_count += int(np.count_nonzero(valid))
    return false_count, tested_count


def fnn_fraction(
    series: ParameterSeries | Sequence[float] | np.ndarray,
    dim: int,
    config: EmbeddingConfig,
) -> tuple[int, int]:
    """Return (false_count, tested_count) for one dimension.

    Raises SeriesTooShort when no vector has a (dim+1)-th component and
    DegenerateSeries when the series is constant.
    """
    values = _series_values(series)
    sigma = float(np.std(values)) if len(values) else 0.0
    if sigma == 0.0:
        raise DegenerateSeries("series standard deviation is zero")
    return _fnn_counts(
        values, dim, config.delay_T, config.r_tol, config.a_tol, config.theiler_w, sigma
    )


@dataclass
class FnnCurve:
    """False-neighbor fractions for d = 1..max_dim.

    fractions[d-1] is None where fewer than 10 vectors were available;
    counts[d-1] is then (0, 0).
    """

    delay_T: int
    fractions: list[float | None] = field(default_factory=list)
    counts: list[tuple[int, int]] = field(default_factory=list)

    @property
    def max_dim(self) -> int:
        return len(self.fractions)

    def fraction_at(self, dim: int) -> float | None:
        return self.fractions[dim - 1]


def fnn_curve(
    series: ParameterSeries | Sequence[float] | np.ndarray,
    config: EmbeddingConfig,
) -> FnnCurve:
    """Compute false-neighbor fractions for every d up to config.max_dim.

    Dimensions the series cannot support (fewer than 10 testable vectors)
    are recorded as undefined instead of raising, so a short series yields a
    defined prefix plus an undefined tail.
    """
    values = _series_values(series)
    sigma = float(np.std(values)) if len(values) else 0.0
    if sigma == 0.0:
        raise DegenerateSeries("series standard deviation is zero")
    curve = FnnCurve(delay_T=config.delay_T)
    n = len(values)
    for dim in range(1, config.max_dim + 1):
        m1 = n - dim * config.delay_T
        if m1 < _MIN_TESTED:
            curve.fractions.append(None)
            curve.counts.append((0, 0))
            continue
        false_count, tested_count = _fnn_counts(
            values, dim, config.delay_T, config.r_tol, config.a_tol, config.theiler_w, sigma
        )
        if tested_count == 0:
            curve.fractions.append(None)
            curve.counts.append((0, 0))
        else:
            curve.fractions.append(false_count / tested_count)
            curve.counts.append((false_count, tested_count))
    return curve


def estimate_dimension(curve: FnnCurve, threshold: float = 0.02) -> int | None:
    """Smallest d whose defined false fraction is <= threshold, else None."""
    if not 0 < threshold < 1:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    for dim, fraction in enumerate(curve.fractions, start=1):
        if fraction is not None and fraction <= threshold:
            return dim
    return None


def default_delay(series: ParameterSeries | Sequence[float] | np.ndarray) -> int:
    """First lag where autocorrelation falls below 1/e, clamped to [1, N/10]."""
    values = _series_values(series)
    n = len(values)
    max_lag = max(1, n // 10)
    centered = values - values.mean() if n else values
    denom = float(np.dot(centered, centered))
    if denom == 0.0 or n < 2:
        return 1
    for lag in range(1, max_lag + 1):
        r = float(np.dot(centered[:-lag], centered[lag:])) / denom
        if r < 1.0 / math.e:
            return lag
    return max_lag


FNN_CSV_FIELDS = ("d", "fraction", "false_count", "tested_count")


def write_fnn_csv(curve: FnnCurve, fh: IO[str]) -> None:
    writer = csv.writer(fh)
    writer.writerow(FNN_CSV_FIELDS)
    for dim in range(1, curve.max_dim + 1):
        fraction = curve.fractions[dim - 1]
        false_count, tested_count = curve.counts[dim - 1]
        writer.writerow(
            [dim, "" if fraction is None else repr(fraction), false_count, tested_count]
        )
