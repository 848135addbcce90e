"""Silverman's kernel-density mode test for an outlying smallest eigenvalue.

The test sample is the part of an epoch's emerging spectrum strictly below
its median. Under the null the Gaussian KDE of that sample is unimodal at
its critical bandwidth; the p-value comes from a smoothed bootstrap.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Iterator

import numba
import numpy as np

from emspec.errors import InputError, NumericalError
from emspec.parallel import date_key, ordered_map, substream

logger = logging.getLogger(__name__)

GRID_POINTS = 512
GRID_PAD = 3.0  # grid spans [min - 3h, max + 3h]
MIN_SAMPLE = 8
DEFAULT_LEVEL = 0.001
DEFAULT_B = 500
REL_TOL = 1e-3


@dataclass
class ModeTestResult:
    end_date: np.datetime64 | None
    p_value: float
    critical_bandwidth: float
    bootstrap_count: int
    reject: bool
    sample_size: int
    level: float = DEFAULT_LEVEL

    @property
    def neg_log10_p(self) -> float:
        """-log10 p with p floored at 1/B."""
        return -math.log10(max(self.p_value, 1.0 / self.bootstrap_count))


@dataclass
class SkippedEpoch:
    end_date: np.datetime64 | None
    sample_size: int
    reason: str


def lower_half(emerging) -> np.ndarray:
    """Eigenvalues strictly below the median of the emerging spectrum."""
    x = np.sort(np.asarray(emerging, dtype=float))
    if x.size == 0:
        return x
    return x[x < np.median(x)]


def count_modes(sample, h: float, grid_points: int = GRID_POINTS) -> int:
    """Strict local maxima of the Gaussian KDE on the evaluation grid."""
    x = np.ascontiguousarray(np.asarray(sample, dtype=float).reshape(1, -1))
    return int(_count_modes_batch(x, float(h), grid_points)[0])


@numba.njit(cache=True, nogil=True)
def _count_modes_batch(samples, h, grid_points=GRID_POINTS):
    b, n = samples.shape
    out = np.zeros(b, dtype=np.int64)
    dens = np.empty(grid_points)
    inv = 1.0 / h
    for r in range(b):
        lo = samples[r, 0]
        hi = samples[r, 0]
        for i in range(1, n):
            lo = min(lo, samples[r, i])
            hi = max(hi, samples[r, i])
        lo -= GRID_PAD * h
        hi += GRID_PAD * h
        step = (hi - lo) / (grid_points - 1)
        for g in range(grid_points):
            x = lo + step * g
            acc = 0.0
            for i in range(n):
                u = (x - samples[r, i]) * inv
                acc += math.exp(-0.5 * u * u)
            dens[g] = acc
        count = 0
        for g in range(1, grid_points - 1):
            if dens[g] > dens[g - 1] and dens[g] > dens[g + 1]:
                count += 1
        out[r] = count
    return out


def critical_bandwidth(sample, k: int = 1, rel_tol: float = REL_TOL) -> float:
    """Smallest Gaussian bandwidth at which the KDE has at most ``k`` modes.

    Bisection on the mode count, stopped once the bracket is narrower than
    ``rel_tol`` of its upper end; the upper end is returned.
    """
    x = np.asarray(sample, dtype=float)
    if k < 1:
        raise InputError("k must be >= 1")
    if x.size < 2:
        raise InputError("need at least 2 observations")
    spread = float(x.max() - x.min())
    if spread <= 0.0:
        raise NumericalError("zero-spread sample has no critical bandwidth")

    hi = spread
    for _ in range(60):
        if count_modes(x, hi) <= k:
            break
        hi *= 2.0
    else:
        raise NumericalError(f"bisection bracket failure: KDE still has > {k} modes at h={hi:.3e}")

    # Below about one grid step the grid cannot resolve separate bumps.
    floor = spread / (4.0 * GRID_POINTS)
    lo = hi
    while count_modes(x, lo) <= k:
        if lo < floor:
            if k >= 2 or np.unique(x).size <= k:
                # at most k distinct locations: every bandwidth works
                return lo
            raise NumericalError(
                f"bisection bracket failure: KDE has <= {k} modes down to h={lo:.3e} "
                f"(n={x.size}, spread={spread:.3e})"
            )
        lo *= 0.5
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if count_modes(x, mid) <= k:
            hi = mid
        else:
            lo = mid
    return hi


def _bootstrap_exceedances(x: np.ndarray, h1: float, b: int, rng: np.random.Generator) -> int:
    """Smoothed-bootstrap replicates whose unimodal critical bandwidth exceeds h1.

    For the Gaussian kernel the mode count is non-increasing in h, so
    ``h_crit(y) > h1`` iff the KDE of ``y`` at ``h1`` has more than one mode.
    """
    n = x.size
    mean = x.mean()
    s2 = x.var(ddof=1)
    shrink = 1.0 / math.sqrt(1.0 + h1 * h1 / s2)
    idx = rng.integers(0, n, size=(b, n))
    noise = rng.standard_normal((b, n))
    y = mean + (x[idx] - mean + h1 * noise) * shrink
    return int((_count_modes_batch(y, float(h1)) > 1).sum())


def silverman_test(
    sample,
    b: int = DEFAULT_B,
    seed: int | np.random.Generator = 0,
    level: float = DEFAULT_LEVEL,
    end_date=None,
) -> ModeTestResult:
    """Test ``H0: the sample density has one mode`` against two or more.

    ``seed`` may be an integer or a ready generator. ``reject`` is exactly
    ``p_value < level``.
    """
    x = np.asarray(sample, dtype=float)
    if x.size < MIN_SAMPLE:
        raise InputError(f"sample size {x.size} < {MIN_SAMPLE}")
    if b < 100:
        raise InputError("need at least 100 bootstrap replicates")
    if not 0.0 < level < 1.0:
        raise InputError("level must lie in (0, 1)")
    if not x.var() > 0.0:
        raise NumericalError("degenerate sample: zero variance")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    h1 = critical_bandwidth(x, 1)
    p = _bootstrap_exceedances(x, h1, b, rng) / b
    return ModeTestResult(
        end_date=end_date,
        p_value=p,
        critical_bandwidth=h1,
        bootstrap_count=b,
        reject=p < level,
        sample_size=int(x.size),
        level=level,
    )


def outlier_series(
    splits: Iterable,
    b: int = DEFAULT_B,
    seed: int = 0,
    level: float = DEFAULT_LEVEL,
    threads: int | None = None,
    skipped: list | None = None,
) -> Iterator[ModeTestResult]:
    """Mode test for every epoch with a large enough lower-half sample.

    ``splits`` yields objects with ``end_date`` and ``emerging`` (e.g.
    :class:`~emspec.spectrum.SpectrumSplit`) or ``(end_date, emerging)``
    pairs. Each epoch draws from its own stream keyed by (seed, end_date).
    Skipped epochs are logged and appended to ``skipped`` when given.
    """

    def unpack(item):
        if isinstance(item, tuple):
            return item
        return item.end_date, item.emerging

    def one(item):
        end_date, emerging = unpack(item)
        emerging = np.asarray(emerging, dtype=float)
        sample = lower_half(emerging)
        if emerging.size < MIN_SAMPLE or sample.size < MIN_SAMPLE:
            return SkippedEpoch(end_date, int(sample.size), f"lower-half sample {sample.size} < {MIN_SAMPLE}")
        rng = substream(seed, "outliers", date_key(end_date)) if end_date is not None else np.random.default_rng(seed)
        try:
            return silverman_test(sample, b=b, seed=rng, level=level, end_date=end_date)
        except (InputError, NumericalError) as exc:
            return SkippedEpoch(end_date, int(sample.size), str(exc))

    for res in ordered_map(one, splits, threads=threads):
        if isinstance(res, SkippedEpoch):
            logger.debug("outlier test skipped for %s: %s", res.end_date, res.reason)
            if skipped is not None:
                skipped.append(res)
            continue
        yield res
