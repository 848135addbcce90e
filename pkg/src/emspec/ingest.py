"""Price-file parsing, calendar alignment and log-returns."""

from __future__ import annotations

import csv
import datetime as _dt
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from emspec.errors import InputError

logger = logging.getLogger(__name__)

FORMATS = ("wide_csv", "long_csv")


@dataclass
class PricePanel:
    """Date-aligned adjusted close prices, ``T x N``.

    Cells absent from the source file are NaN until :func:`align` resolves
    them.
    """

    dates: np.ndarray  # datetime64[D], strictly increasing
    tickers: list[str]
    prices: np.ndarray  # float64, shape (T, N)
    sectors: dict[str, str] = field(default_factory=dict)

    @property
    def T(self) -> int:
        return len(self.dates)

    @property
    def N(self) -> int:
        return len(self.tickers)

    def column(self, ticker: str) -> np.ndarray:
        return self.prices[:, self.tickers.index(ticker)]

    def has_missing(self) -> bool:
        return bool(np.isnan(self.prices).any())

    def validate(self) -> None:
        if self.prices.shape != (self.T, self.N):
            raise InputError(
                f"price matrix shape {self.prices.shape} does not match "
                f"{self.T} dates x {self.N} tickers"
            )
        if self.T > 1 and not np.all(np.diff(self.dates) > np.timedelta64(0, "D")):
            raise InputError("dates must be strictly increasing")
        observed = ~np.isnan(self.prices)
        bad = observed & ~(np.isfinite(self.prices) & (self.prices > 0))
        if bad.any():
            t, i = np.argwhere(bad)[0]
            raise InputError(
                f"non-positive or non-finite price {self.prices[t, i]!r} "
                f"at date {self.dates[t]} ticker {self.tickers[i]}"
            )


@dataclass
class ReturnPanel:
    """Log-returns; ``dates[k]`` is the later date of price pair ``(k, k+1)``."""

    dates: np.ndarray
    tickers: list[str]
    returns: np.ndarray  # shape (T-1, N)
    base_date: np.datetime64 | None = None  # first price date

    @property
    def T(self) -> int:
        return len(self.dates)

    @property
    def N(self) -> int:
        return len(self.tickers)


@dataclass
class AlignmentReport:
    dropped_tickers: list[str] = field(default_factory=list)
    filled_cells: int = 0
    dropped_dates: int = 0

    def to_dict(self) -> dict:
        return {
            "dropped_tickers": list(self.dropped_tickers),
            "filled_cells": int(self.filled_cells),
            "dropped_dates": int(self.dropped_dates),
        }


def parse_date(text: str, where: str = "") -> np.datetime64:
    try:
        return np.datetime64(_dt.date.fromisoformat(text.strip()), "D")
    except ValueError:
        raise InputError(f"unparseable date {text!r}{where}; expected YYYY-MM-DD") from None


def _parse_price(text: str, where: str) -> float:
    text = text.strip()
    if text == "" or text.lower() in ("na", "nan", "null"):
        return math.nan
    try:
        value = float(text)
    except ValueError:
        raise InputError(f"non-numeric price {text!r}{where}") from None
    if not math.isfinite(value) or value <= 0.0:
        raise InputError(f"price must be finite and > 0, got {text!r}{where}")
    return value


def load_prices(path, format: str = "wide_csv") -> PricePanel:
    """Read a price CSV.

    ``wide_csv`` has a header ``date,TICKER1,...``; ``long_csv`` has rows
    ``date,ticker,adj_close`` with an optional fourth ``sector`` column.
    Empty cells are kept as NaN for :func:`align`.
    """
    path = Path(path)
    if format not in FORMATS:
        raise InputError(f"unknown price format {format!r}; expected one of {FORMATS}")
    if not path.is_file():
        raise InputError(f"price file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise InputError(f"empty price file: {path}")
    if format == "wide_csv":
        return _load_wide(rows, path)
    return _load_long(rows, path)


def _load_wide(rows: list[list[str]], path: Path) -> PricePanel:
    header = [c.strip() for c in rows[0]]
    if header[0].lower() != "date" or len(header) < 2:
        raise InputError(f"{path}: wide CSV header must be 'date,TICKER1,...'")
    raw_tickers = header[1:]
    # Duplicate ticker columns collapse onto the first occurrence.
    tickers: list[str] = []
    col_of: list[int] = []
    for t in raw_tickers:
        if t in tickers:
            col_of.append(tickers.index(t))
        else:
            tickers.append(t)
            col_of.append(len(tickers) - 1)

    cells: dict[np.datetime64, np.ndarray] = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise InputError(f"{path}: row {lineno} has {len(row)} fields, expected {len(header)}")
        date = parse_date(row[0], f" at row {lineno}")
        if date in cells:
            raise InputError(f"{path}: duplicate date {date} at row {lineno}")
        values = np.full(len(tickers), np.nan)
        for j, text in enumerate(row[1:]):
            value = _parse_price(text, f" at row {lineno}, column {raw_tickers[j]!r}")
            k = col_of[j]
            if not math.isnan(value):
                if not math.isnan(values[k]):
                    raise InputError(
                        f"{path}: duplicate (date, ticker) pair ({date}, {tickers[k]}) at row {lineno}"
                    )
                values[k] = value
        cells[date] = values
    return _assemble(cells, tickers, {})


def _load_long(rows: list[list[str]], path: Path) -> PricePanel:
    start = 0
    first = [c.strip().lower() for c in rows[0]]
    if first and first[0] == "date":
        start = 1
    records: dict[tuple[np.datetime64, str], float] = {}
    tickers: list[str] = []
    sectors: dict[str, str] = {}
    for lineno, row in enumerate(rows[start:], start=start + 1):
        if len(row) not in (3, 4):
            raise InputError(f"{path}: row {lineno} must be 'date,ticker,adj_close[,sector]'")
        date = parse_date(row[0], f" at row {lineno}")
        ticker = row[1].strip()
        if not ticker:
            raise InputError(f"{path}: empty ticker at row {lineno}")
        value = _parse_price(row[2], f" at row {lineno}, column 'adj_close' (ticker {ticker})")
        key = (date, ticker)
        if key in records:
            raise InputError(f"{path}: duplicate (date, ticker) pair ({date}, {ticker}) at row {lineno}")
        records[key] = value
        if ticker not in sectors and len(row) == 4 and row[3].strip():
            sectors[ticker] = row[3].strip()
        if ticker not in tickers:
            tickers.append(ticker)
    index = {t: i for i, t in enumerate(tickers)}
    cells: dict[np.datetime64, np.ndarray] = {}
    for (date, ticker), value in records.items():
        if date not in cells:
            cells[date] = np.full(len(tickers), np.nan)
        cells[date][index[ticker]] = value
    return _assemble(cells, tickers, sectors)


def _assemble(cells, tickers, sectors) -> PricePanel:
    # Both layouts yield columns in sorted ticker order.
    order = sorted(range(len(tickers)), key=lambda i: tickers[i])
    dates = np.array(sorted(cells), dtype="datetime64[D]")
    prices = np.array([cells[d] for d in dates], dtype=float).reshape(len(dates), len(tickers))
    prices = prices[:, order]
    tickers = [tickers[i] for i in order]
    panel = PricePanel(dates=dates, tickers=tickers, prices=prices, sectors=dict(sectors))
    panel.validate()
    return panel


def parse_policy(policy: str) -> tuple[str, int]:
    """``"intersect_dates"`` or ``"forward_fill:<max_gap>"`` -> (name, max_gap)."""
    policy = policy.strip()
    if policy in ("intersect_dates", "intersect"):
        return "intersect_dates", 0
    name, _, arg = policy.partition(":")
    if name in ("forward_fill", "ffill"):
        try:
            gap = int(arg)
        except ValueError:
            raise InputError(f"forward_fill needs an integer max_gap, got {policy!r}") from None
        if gap < 1:
            raise InputError("forward_fill max_gap must be >= 1")
        return "forward_fill", gap
    raise InputError(f"unknown alignment policy {policy!r}")


def align(panel: PricePanel, policy: str = "intersect_dates") -> tuple[PricePanel, AlignmentReport]:
    """Remove every absent cell.

    ``intersect_dates`` drops each date with a missing value.
    ``forward_fill:<k>`` carries the last price across runs of at most ``k``
    missing rows; an instrument with a longer run is dropped. Leading rows
    that cannot be filled are removed as dates.
    """
    name, max_gap = parse_policy(policy)
    report = AlignmentReport()
    prices = panel.prices.copy()
    tickers = list(panel.tickers)
    dates = panel.dates.copy()

    empty = np.all(np.isnan(prices), axis=0)
    for i in np.flatnonzero(empty):
        logger.warning("dropping %s: no valid observations", tickers[i])
        report.dropped_tickers.append(tickers[i])
    keep = ~empty

    if name == "forward_fill":
        for i in np.flatnonzero(keep):
            col = prices[:, i]
            first = int(np.flatnonzero(~np.isnan(col))[0])
            run = 0
            for t in range(first + 1, len(col)):
                if math.isnan(col[t]):
                    run += 1
                    if run > max_gap:
                        break
                else:
                    run = 0
            if run > max_gap:
                logger.warning("dropping %s: gap longer than %d rows", tickers[i], max_gap)
                report.dropped_tickers.append(tickers[i])
                keep[i] = False
        prices = prices[:, keep]
        tickers = [t for t, k in zip(tickers, keep) if k]
        for i in range(prices.shape[1]):
            col = prices[:, i]
            for t in range(1, len(col)):
                if math.isnan(col[t]) and not math.isnan(col[t - 1]):
                    col[t] = col[t - 1]
                    report.filled_cells += 1
    else:
        prices = prices[:, keep]
        tickers = [t for t, k in zip(tickers, keep) if k]

    rows = ~np.isnan(prices).any(axis=1)
    report.dropped_dates = int((~rows).sum())
    dates = dates[rows]
    prices = prices[rows]

    if len(tickers) < 2:
        raise InputError(f"fewer than 2 instruments remain after alignment ({tickers})")
    if len(dates) < 2:
        raise InputError("fewer than 2 dates remain after alignment")
    sectors = {t: s for t, s in panel.sectors.items() if t in tickers}
    return PricePanel(dates=dates, tickers=tickers, prices=prices, sectors=sectors), report


def to_returns(panel: PricePanel) -> ReturnPanel:
    if panel.T < 2:
        raise InputError("need at least 2 price rows to form returns")
    if panel.has_missing():
        raise InputError("price panel has absent cells; run align() first")
    logp = np.log(panel.prices)
    return ReturnPanel(
        dates=panel.dates[1:].copy(),
        tickers=list(panel.tickers),
        returns=np.diff(logp, axis=0),
        base_date=panel.dates[0],
    )


def write_prices(panel: PricePanel, path) -> None:
    """Write a panel as wide CSV (round-trips through :func:`load_prices`)."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", *panel.tickers])
        for d, row in zip(panel.dates, panel.prices):
            w.writerow([str(d), *("" if math.isnan(v) else repr(float(v)) for v in row)])
