"""Equal-time Pearson correlation matrices over rolling epochs."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from emspec.errors import DegenerateEpochError, InputError
from emspec.ingest import ReturnPanel
from emspec.parallel import ordered_map

DEGENERATE_POLICIES = ("error", "drop")


@dataclass(frozen=True)
class EpochSpec:
    epoch_len: int = 20
    shift: int = 1

    def __post_init__(self):
        if int(self.epoch_len) != self.epoch_len or self.epoch_len < 2:
            raise InputError(f"epoch length must be an integer >= 2, got {self.epoch_len}")
        if int(self.shift) != self.shift or self.shift < 1:
            raise InputError(f"epoch shift must be an integer >= 1, got {self.shift}")

    def count(self, n_returns: int) -> int:
        """Number of epochs that fit in ``n_returns`` rows."""
        if n_returns < self.epoch_len:
            return 0
        return (n_returns - self.epoch_len) // self.shift + 1

    def end_indices(self, n_returns: int) -> range:
        return range(self.epoch_len - 1, n_returns, self.shift)


@dataclass
class EpochCorrelation:
    end_date: np.datetime64
    matrix: np.ndarray
    epoch: EpochSpec
    tickers: list[str]
    dropped: tuple[str, ...] = ()

    @property
    def N(self) -> int:
        return self.matrix.shape[0]


def _pairwise_cross(z: np.ndarray) -> np.ndarray:
    # z is (N, M) C-contiguous; reduction over the contiguous last axis uses
    # numpy's pairwise summation, and z_i*z_j == z_j*z_i keeps it exactly symmetric.
    return np.add.reduce(z[:, None, :] * z[None, :, :], axis=-1)


def correlation_matrix(window: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pearson correlation of the columns of an ``M x N`` window.

    Population moments (divide by M). Returns ``(C, sd)``; columns with zero
    standard deviation get NaN rows in ``C``.
    """
    window = np.asarray(window, dtype=float)
    m = window.shape[0]
    z = np.ascontiguousarray(window.T)
    mean = np.add.reduce(z, axis=1) / m
    z = z - mean[:, None]
    cov = _pairwise_cross(z) / m
    var = np.diag(cov).copy()
    scale = np.max(np.abs(window), axis=0)
    degenerate = var <= (1e-13 * scale) ** 2
    sd = np.sqrt(np.where(degenerate, np.nan, var))
    c = cov / np.multiply.outer(sd, sd)
    np.clip(c, -1.0, 1.0, out=c)
    ok = ~degenerate
    c[ok, ok] = 1.0
    sd[degenerate] = 0.0
    return c, sd


def epoch_correlation(
    returns: ReturnPanel, end_index: int, spec: EpochSpec, degenerate: str = "error"
) -> EpochCorrelation:
    """Correlation matrix of the epoch of ``spec.epoch_len`` rows ending at ``end_index``.

    With ``degenerate="drop"`` zero-variance instruments are excised from
    this epoch only and listed in ``dropped``.
    """
    if degenerate not in DEGENERATE_POLICIES:
        raise InputError(f"degenerate policy must be one of {DEGENERATE_POLICIES}")
    m = spec.epoch_len
    if end_index < m - 1 or end_index >= returns.T:
        raise InputError(f"end_index {end_index} outside [{m - 1}, {returns.T - 1}]")
    window = returns.returns[end_index - m + 1 : end_index + 1]
    end_date = returns.dates[end_index]
    c, sd = correlation_matrix(window)
    bad = np.flatnonzero(sd == 0.0)
    tickers = list(returns.tickers)
    dropped: tuple[str, ...] = ()
    if bad.size:
        names = [tickers[i] for i in bad]
        if degenerate == "error":
            raise DegenerateEpochError(
                f"zero variance in epoch ending {end_date}: {', '.join(names)}",
                instruments=names,
                end_date=end_date,
            )
        keep = sd > 0.0
        c = np.ascontiguousarray(c[np.ix_(keep, keep)])
        tickers = [t for t, k in zip(tickers, keep) if k]
        dropped = tuple(names)
    return EpochCorrelation(end_date=end_date, matrix=c, epoch=spec, tickers=tickers, dropped=dropped)


def rolling_correlations(
    returns: ReturnPanel, spec: EpochSpec, degenerate: str = "error", threads: int | None = None
) -> Iterator[EpochCorrelation]:
    """Yield one :class:`EpochCorrelation` per epoch, in end-date order."""
    if returns.T < spec.epoch_len:
        raise InputError(f"need at least {spec.epoch_len} return rows, have {returns.T}")

    def one(end_index: int) -> EpochCorrelation:
        return epoch_correlation(returns, end_index, spec, degenerate)

    yield from ordered_map(one, spec.end_indices(returns.T), threads=threads)


# Binary dump: per epoch, 10 ASCII bytes end_date, uint32 N (little endian),
# then N(N+1)/2 float64 little-endian values of the row-major lower triangle.
_HEADER = struct.Struct("<10sI")


def dump_matrices(epochs, path) -> int:
    count = 0
    with Path(path).open("wb") as fh:
        for ec in epochs:
            n = ec.N
            fh.write(_HEADER.pack(str(ec.end_date).encode("ascii"), n))
            fh.write(ec.matrix[np.tril_indices(n)].astype("<f8").tobytes())
            count += 1
    return count


def load_matrices(path) -> Iterator[tuple[np.datetime64, np.ndarray]]:
    with Path(path).open("rb") as fh:
        while True:
            head = fh.read(_HEADER.size)
            if not head:
                return
            if len(head) != _HEADER.size:
                raise InputError(f"{path}: truncated record header")
            date, n = _HEADER.unpack(head)
            k = n * (n + 1) // 2
            buf = fh.read(8 * k)
            if len(buf) != 8 * k:
                raise InputError(f"{path}: truncated matrix for {date.decode()}")
            m = np.zeros((n, n))
            m[np.tril_indices(n)] = np.frombuffer(buf, dtype="<f8")
            m = m + np.tril(m, -1).T
            yield np.datetime64(date.decode("ascii"), "D"), m
