"""Power-map distortion and the emerging part of an epoch spectrum."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from emspec.eigen import eig_symmetric, eigvalsh
from emspec.errors import InputError

__all__ = [
    "PowerMapParams",
    "SpectrumSplit",
    "ShapeStats",
    "MarchenkoPastur",
    "power_map",
    "eig_symmetric",
    "eigvalsh",
    "split_spectrum",
    "spectrum_shape_stats",
    "marchenko_pastur",
]


@dataclass(frozen=True)
class PowerMapParams:
    epsilon: float = 0.01

    def __post_init__(self):
        if not (self.epsilon >= 0.0 and math.isfinite(self.epsilon)):
            raise InputError(f"epsilon must be finite and >= 0, got {self.epsilon}")


@dataclass
class SpectrumSplit:
    end_date: np.datetime64 | None
    all_eigenvalues: np.ndarray
    emerging: np.ndarray
    normal: np.ndarray
    lambda_min_emerging: float | None
    lambda_max: float
    separation_gap: float | None
    flags: list[str] = field(default_factory=list)


def power_map(c, params: PowerMapParams | float = PowerMapParams()) -> np.ndarray:
    """Elementwise ``sign(c) * |c| ** (1 + epsilon)``.

    Accepts an :class:`~emspec.corr.EpochCorrelation` or a bare matrix.
    """
    eps = params.epsilon if isinstance(params, PowerMapParams) else float(params)
    c = np.asarray(getattr(c, "matrix", c), dtype=float)
    if eps == 0.0:
        return c.copy()
    return np.sign(c) * np.abs(c) ** (1.0 + eps)


def split_spectrum(eigs, n: int, m: int, end_date=None) -> SpectrumSplit:
    """Partition a sorted spectrum into the emerging and normal parts.

    For ``n > m`` the emerging part is the ``n - m + 1`` eigenvalues of
    smallest magnitude (the rank deficit of an epoch matrix); for ``m >= n``
    it is empty.
    """
    eigs = np.sort(np.asarray(eigs, dtype=float))
    if eigs.shape != (n,):
        raise InputError(f"expected {n} eigenvalues, got {eigs.shape}")
    flags: list[str] = []
    if n <= m:
        return SpectrumSplit(end_date, eigs, np.empty(0), eigs.copy(), None, float(eigs[-1]), None, flags)
    k = n - m + 1
    by_size = np.argsort(np.abs(eigs), kind="stable")
    mask = np.zeros(n, dtype=bool)
    mask[by_size[:k]] = True
    emerging = eigs[mask]
    normal = eigs[~mask]
    if normal.size:
        gap = float(np.min(np.abs(normal)) - np.max(np.abs(emerging)))
        if gap <= 0.0:
            flags.append("no_separation")
    else:
        gap = None
    return SpectrumSplit(
        end_date=end_date,
        all_eigenvalues=eigs,
        emerging=emerging,
        normal=normal,
        lambda_min_emerging=float(emerging[0]),
        lambda_max=float(eigs[-1]),
        separation_gap=gap,
        flags=flags,
    )


@dataclass
class ShapeStats:
    variance: float | None
    skewness: float | None
    excess_kurtosis: float | None
    counts: np.ndarray
    edges: np.ndarray


def spectrum_shape_stats(split, bins: int = 30) -> ShapeStats:
    """Central moments and a histogram of the emerging eigenvalues.

    Moments are absent (None) for fewer than 4 values or zero variance.
    Large excess kurtosis marks a heavy-tailed, Lorentzian-like spectrum.
    """
    x = np.asarray(getattr(split, "emerging", split), dtype=float)
    if x.size == 0:
        raise InputError("emerging spectrum is empty")
    counts, edges = np.histogram(x, bins=bins)
    if x.size < 4:
        return ShapeStats(None, None, None, counts, edges)
    d = x - x.mean()
    m2 = float(np.mean(d**2))
    if m2 <= (1e-14 * max(1.0, float(np.max(np.abs(x))))) ** 2:
        return ShapeStats(0.0, None, None, counts, edges)
    m3 = float(np.mean(d**3))
    m4 = float(np.mean(d**4))
    return ShapeStats(m2, m3 / m2**1.5, m4 / m2**2 - 3.0, counts, edges)


@dataclass
class MarchenkoPastur:
    q: float
    sigma2: float
    lambda_minus: float
    lambda_plus: float

    def density(self, lam):
        lam = np.asarray(lam, dtype=float)
        out = np.zeros_like(lam)
        inside = (lam > self.lambda_minus) & (lam < self.lambda_plus)
        li = lam[inside]
        out[inside] = (
            self.q
            / (2.0 * math.pi * self.sigma2)
            * np.sqrt((self.lambda_plus - li) * (li - self.lambda_minus))
            / li
        )
        return out

    __call__ = density


def marchenko_pastur(q: float, sigma2: float = 1.0) -> MarchenkoPastur:
    """Marchenko-Pastur law for ``q = T / N`` (only q >= 1 has a proper density)."""
    if not q > 0 or not sigma2 > 0:
        raise InputError("q and sigma2 must be positive")
    if math.isinf(q):
        return MarchenkoPastur(q, sigma2, sigma2, sigma2)
    r = 1.0 / math.sqrt(q)
    return MarchenkoPastur(q, sigma2, sigma2 * (1 - r) ** 2, sigma2 * (1 + r) ** 2)
