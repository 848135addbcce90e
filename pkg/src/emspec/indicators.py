"""Per-epoch indicator series: r(t), mu(t), lambda_min(t), lambda_max(t)."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from emspec.corr import EpochCorrelation, EpochSpec, epoch_correlation
from emspec.errors import EmspecError, InputError
from emspec.ingest import PricePanel, ReturnPanel
from emspec.parallel import ordered_map
from emspec.spectrum import PowerMapParams, eigvalsh, power_map, spectrum_shape_stats, split_spectrum

logger = logging.getLogger(__name__)


@dataclass
class IndicatorSeries:
    dates: np.ndarray
    r: np.ndarray
    mu: np.ndarray
    lambda_min: np.ndarray  # NaN where the emerging spectrum is empty
    lambda_max: np.ndarray
    separation_gap: np.ndarray
    emerging_kurtosis: np.ndarray
    flags: list[str]
    emerging: list[np.ndarray] = field(default_factory=list)
    market_source: str = "equal_weight"
    epsilon: float = 0.01
    epoch: EpochSpec = field(default_factory=EpochSpec)

    def __len__(self) -> int:
        return len(self.dates)

    @property
    def has_lambda_min(self) -> bool:
        return bool(np.isfinite(self.lambda_min).any())


def mean_market_correlation(c) -> float:
    """Mean of the N(N-1) off-diagonal entries (signed)."""
    c = np.asarray(getattr(c, "matrix", c), dtype=float)
    n = c.shape[0]
    if n < 2:
        raise InputError("mean correlation needs at least 2 instruments")
    vals = c[np.triu_indices(n, 1)]
    # shifted mean: exact when all entries are equal
    shift = vals[0]
    return float(np.clip(shift + np.mean(vals - shift), -1.0, 1.0))


def market_return(returns: ReturnPanel, index_prices: PricePanel | None = None) -> tuple[np.ndarray, str]:
    """Market log-return on each return date and its source label.

    With ``index_prices`` (first column used) the index log-return between
    consecutive panel price dates; otherwise the equal-weighted mean of the
    constituents.
    """
    if index_prices is None:
        return returns.returns.mean(axis=1), "equal_weight"
    if index_prices.N < 1:
        raise InputError("index price file has no series")
    level = dict(zip(index_prices.dates.tolist(), index_prices.prices[:, 0]))
    wanted = returns.dates if returns.base_date is None else np.concatenate([[returns.base_date], returns.dates])
    gaps = [str(d) for d in wanted.tolist() if d not in level or not np.isfinite(level[d])]
    if gaps:
        shown = ", ".join(gaps[:10]) + (" ..." if len(gaps) > 10 else "")
        raise InputError(f"index prices do not cover {len(gaps)} panel date(s): {shown}")
    logp = np.log(np.array([level[d] for d in wanted.tolist()]))
    if returns.base_date is None:
        # without the base price the first return is unknown
        out = np.empty(len(wanted))
        out[0] = np.nan
        out[1:] = np.diff(logp)
        return out, f"index:{index_prices.tickers[0]}"
    return np.diff(logp), f"index:{index_prices.tickers[0]}"


@dataclass
class _EpochRow:
    end_date: np.datetime64
    mu: float
    lambda_min: float
    lambda_max: float
    gap: float
    kurtosis: float
    emerging: np.ndarray
    flags: list[str]


def analyse_epoch(ec: EpochCorrelation, params: PowerMapParams) -> _EpochRow:
    """mu from the raw matrix; spectrum from the power-mapped one."""
    mu = mean_market_correlation(ec)
    eigs = eigvalsh(power_map(ec, params))
    split = split_spectrum(eigs, ec.N, ec.epoch.epoch_len, ec.end_date)
    flags = list(split.flags)
    if ec.dropped:
        flags.append("dropped:" + "|".join(ec.dropped))
    kurt = np.nan
    if split.emerging.size:
        stats = spectrum_shape_stats(split)
        if stats.excess_kurtosis is not None:
            kurt = stats.excess_kurtosis
        if params.epsilon > 0 and split.lambda_min_emerging > 0:
            flags.append("lambda_min_positive")
    return _EpochRow(
        end_date=ec.end_date,
        mu=mu,
        lambda_min=np.nan if split.lambda_min_emerging is None else split.lambda_min_emerging,
        lambda_max=split.lambda_max,
        gap=np.nan if split.separation_gap is None else split.separation_gap,
        kurtosis=kurt,
        emerging=split.emerging,
        flags=flags,
    )


def build_indicators(
    returns: ReturnPanel,
    spec: EpochSpec = EpochSpec(),
    params: PowerMapParams = PowerMapParams(),
    index_prices: PricePanel | None = None,
    degenerate: str = "error",
    threads: int | None = None,
) -> IndicatorSeries:
    """Run correlation -> power map -> spectrum split for every epoch."""
    if returns.T < spec.epoch_len:
        raise InputError(f"need at least {spec.epoch_len} return rows, have {returns.T}")
    r_all, source = market_return(returns, index_prices)

    def one(end_index: int) -> _EpochRow:
        try:
            ec = epoch_correlation(returns, end_index, spec, degenerate)
            return analyse_epoch(ec, params)
        except EmspecError as exc:
            raise type(exc)(f"epoch ending {returns.dates[end_index]}: {exc}") from exc

    ends = list(spec.end_indices(returns.T))
    rows = list(ordered_map(one, ends, threads=threads))
    if spec.epoch_len >= returns.N:
        logger.info("epoch length %d >= N=%d: emerging spectrum empty, lambda_min absent", spec.epoch_len, returns.N)
    return IndicatorSeries(
        dates=np.array([row.end_date for row in rows], dtype="datetime64[D]"),
        r=r_all[ends],
        mu=np.array([row.mu for row in rows]),
        lambda_min=np.array([row.lambda_min for row in rows]),
        lambda_max=np.array([row.lambda_max for row in rows]),
        separation_gap=np.array([row.gap for row in rows]),
        emerging_kurtosis=np.array([row.kurtosis for row in rows]),
        flags=[";".join(row.flags) for row in rows],
        emerging=[row.emerging for row in rows],
        market_source=source,
        epsilon=params.epsilon,
        epoch=spec,
    )
