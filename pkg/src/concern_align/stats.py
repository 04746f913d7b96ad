"""Reliability and uncertainty statistics.

ICC(2,1) treats papers as subjects and runs as raters. Bootstrap intervals
resample papers with a counter-based SplitMix64 stream so that resample ``i``
always consumes draws ``[i*n, (i+1)*n)`` whatever the execution order.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

CI_LEVEL = 0.95
CI_METHOD = "percentile"
STREAM_NAME = "splitmix64-counter"


class StatsError(ValueError):
    pass


@dataclass(frozen=True)
class RunMatrix:
    values: np.ndarray
    paper_ids: tuple[str, ...]
    run_ids: tuple[str, ...]
    dropped: int = 0

    def __post_init__(self) -> None:
        if self.values.shape != (len(self.paper_ids), len(self.run_ids)):
            raise StatsError("matrix shape does not match its row/column ids")
        if not np.all(np.isfinite(self.values)):
            raise StatsError("run matrix cells must be finite")


def run_matrix(per_run: Mapping[str, Mapping[str, float | None]]) -> RunMatrix:
    """Papers x runs grid; papers undefined or missing in any run are dropped and counted."""
    run_ids = tuple(sorted(per_run))
    papers = sorted(set().union(*(set(v) for v in per_run.values()))) if per_run else []
    keep: list[str] = []
    rows: list[list[float]] = []
    for pid in papers:
        row = [per_run[r].get(pid) for r in run_ids]
        if any(v is None for v in row):
            continue
        keep.append(pid)
        rows.append([float(v) for v in row])
    values = np.array(rows, dtype=float).reshape(len(keep), len(run_ids))
    return RunMatrix(values, tuple(keep), run_ids, dropped=len(papers) - len(keep))


def icc_2_1(m: RunMatrix | np.ndarray) -> float | None:
    """Shrout-Fleiss ICC(2,1); None for a degenerate matrix."""
    x = np.asarray(m.values if isinstance(m, RunMatrix) else m, dtype=float)
    if x.ndim != 2:
        raise StatsError("ICC needs a 2-D matrix")
    n, k = x.shape
    if n < 2 or k < 2:
        raise StatsError(f"ICC needs at least 2 papers and 2 runs, got {n}x{k}")
    if np.all(x == x.flat[0]):
        return None
    grand = x.mean()
    ss_total = float(((x - grand) ** 2).sum())
    ss_rows = k * float(((x.mean(axis=1) - grand) ** 2).sum())
    ss_cols = n * float(((x.mean(axis=0) - grand) ** 2).sum())
    ss_err = ss_total - ss_rows - ss_cols
    ms_rows = ss_rows / (n - 1)
    ms_cols = ss_cols / (k - 1)
    ms_err = ss_err / ((n - 1) * (k - 1))
    denom = ms_rows + (k - 1) * ms_err + k * (ms_cols - ms_err) / n
    if denom == 0:
        return None
    return (ms_rows - ms_err) / denom


def raw_agreement(m: RunMatrix | np.ndarray) -> float:
    """Fraction of rows on which every run gives the same value."""
    x = np.asarray(m.values if isinstance(m, RunMatrix) else m)
    if x.shape[0] == 0:
        raise StatsError("empty matrix")
    return float(np.mean(np.all(x == x[:, :1], axis=1)))


def cohen_kappa(table: Sequence[Sequence[float]] | np.ndarray) -> float | None:
    t = np.asarray(table, dtype=float)
    if t.ndim != 2 or t.shape[0] != t.shape[1]:
        raise StatsError(f"contingency table must be square, got shape {t.shape}")
    if t.shape[0] < 2:
        raise StatsError("kappa needs at least 2 categories")
    if np.any(t < 0):
        raise StatsError("contingency counts must be non-negative")
    total = t.sum()
    if total <= 0:
        raise StatsError("contingency table is empty")
    p_o = np.trace(t) / total
    p_e = float(np.dot(t.sum(axis=1), t.sum(axis=0))) / (total * total)
    if p_e == 1:
        return None
    return float((p_o - p_e) / (1 - p_e))


def contingency(pairs: Sequence[tuple[object, object]], categories: Sequence[object]) -> np.ndarray:
    index = {c: i for i, c in enumerate(categories)}
    t = np.zeros((len(categories), len(categories)))
    for a, b in pairs:
        t[index[a], index[b]] += 1
    return t


# -- pseudo-random stream --------------------------------------------------------

def splitmix64(seed: int, start: int, count: int) -> np.ndarray:
    """Draws ``start .. start+count-1`` of the stream for ``seed``.

    Draw ``j`` is the SplitMix64 finaliser applied to ``seed + (j+1)*GAMMA``
    (mod 2**64), so any slice can be produced independently.
    """
    j = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    z = np.uint64(seed & MASK64) + j * np.uint64(GOLDEN_GAMMA)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


def resample_indices(seed: int, n: int, first: int, count: int) -> np.ndarray:
    """Paper indices for resamples ``first .. first+count-1``, shape (count, n)."""
    draws = splitmix64(seed, first * n, count * n)
    return (draws % np.uint64(n)).astype(np.int64).reshape(count, n)


# -- bootstrap -------------------------------------------------------------------

class Statistic(str, Enum):
    MEAN = "mean"
    POOLED_RATIO = "pooled_ratio"


@dataclass(frozen=True)
class ConfidenceInterval:
    point: float
    lower: float
    upper: float
    resamples: int
    seed: int
    level: float = CI_LEVEL
    excluded_resamples: int = 0

    @property
    def width(self) -> float:
        return self.upper - self.lower


_CHUNK = 1 << 20


def bootstrap_ci(
    per_paper_values: Sequence[float] | Sequence[tuple[float, float]],
    statistic: Statistic | str = Statistic.MEAN,
    resamples: int = 10_000,
    seed: int = 0,
) -> ConfidenceInterval | None:
    """Percentile 95% interval from paper-level resampling.

    ``mean`` takes one value per paper; ``pooled_ratio`` takes
    ``(numerator, denominator)`` per paper and reports sum/sum. Resamples whose
    pooled denominator is zero are excluded and counted. Returns None when the
    point estimate itself is undefined or no resample is usable.
    """
    statistic = Statistic(statistic)
    if len(per_paper_values) == 0:
        raise StatsError("bootstrap needs at least one paper")
    if len(per_paper_values) < 2:
        raise StatsError("bootstrap needs at least 2 papers")
    if resamples < 1:
        raise StatsError("resamples must be >= 1")
    if statistic is Statistic.MEAN:
        num = np.asarray(per_paper_values, dtype=float)
        if num.ndim != 1:
            raise StatsError("mean statistic takes one value per paper")
        den = np.ones_like(num)
    else:
        pairs = np.asarray(per_paper_values, dtype=float)
        if pairs.ndim != 2 or pairs.shape[1] != 2:
            raise StatsError("pooled_ratio takes (numerator, denominator) pairs")
        num, den = pairs[:, 0], pairs[:, 1]
    if den.sum() == 0:
        return None
    point = float(num.sum() / den.sum())
    n = len(num)
    dist: list[np.ndarray] = []
    step = max(1, _CHUNK // n)
    with np.errstate(invalid="ignore", divide="ignore"):
        for first in range(0, resamples, step):
            idx = resample_indices(seed, n, first, min(step, resamples - first))
            dist.append(num[idx].sum(axis=1) / den[idx].sum(axis=1))
    values = np.concatenate(dist)
    usable = values[np.isfinite(values)]
    if usable.size == 0:
        return None
    alpha = (1 - CI_LEVEL) / 2
    lower, upper = np.percentile(usable, [100 * alpha, 100 * (1 - alpha)])
    return ConfidenceInterval(
        point=point,
        lower=float(lower),
        upper=float(upper),
        resamples=resamples,
        seed=seed,
        excluded_resamples=int(resamples - usable.size),
    )
