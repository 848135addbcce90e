"""Seeded synthetic panels for tests, demos and the bundled fixtures."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from emspec.ingest import PricePanel
from emspec.parallel import substream

DAILY_VOL = 0.01


def business_days(start: str, count: int) -> np.ndarray:
    """``count`` consecutive weekdays from ``start`` (inclusive)."""
    return np.busday_offset(np.datetime64(start, "D"), np.arange(count), roll="forward")


def factor_returns(n_days: int, n_assets: int, rho, rng: np.random.Generator, vol: float = DAILY_VOL) -> np.ndarray:
    """One-factor returns ``sqrt(rho) f + sqrt(1 - rho) e_i`` scaled by ``vol``.

    ``rho`` may be a scalar or a per-day array; the population correlation
    of any two assets on a day is ``rho``.
    """
    rho = np.broadcast_to(np.asarray(rho, dtype=float), (n_days,))
    f = rng.standard_normal(n_days)
    e = rng.standard_normal((n_days, n_assets))
    return vol * (np.sqrt(rho)[:, None] * f[:, None] + np.sqrt(1.0 - rho)[:, None] * e)


def prices_from_returns(returns: np.ndarray, dates, tickers=None, start_price: float = 100.0) -> PricePanel:
    """Price panel whose log-returns are exactly ``returns`` (up to rounding)."""
    returns = np.asarray(returns, dtype=float)
    n = returns.shape[1]
    logp = np.vstack([np.zeros(n), np.cumsum(returns, axis=0)])
    prices = start_price * np.exp(logp)
    if tickers is None:
        tickers = [f"S{i:03d}" for i in range(n)]
    return PricePanel(dates=np.asarray(dates, dtype="datetime64[D]"), tickers=list(tickers), prices=prices)


def factor_panel(n_assets: int, n_days: int, rho: float, seed: int, start: str = "2000-01-03") -> PricePanel:
    """``n_days`` price rows of a constant-correlation one-factor market."""
    rng = substream(seed, "panel")
    r = factor_returns(n_days - 1, n_assets, rho, rng)
    return prices_from_returns(r, business_days(start, n_days))


def two_regime_returns(
    n_assets: int, n_days: int, rho_low: float, rho_high: float, rng: np.random.Generator
) -> np.ndarray:
    """Factor correlation ``rho_low`` for the first half, ``rho_high`` after."""
    rho = np.where(np.arange(n_days) < n_days // 2, rho_low, rho_high)
    return factor_returns(n_days, n_assets, rho, rng)


def two_regime_panel(
    n_assets: int = 10,
    n_days: int = 300,
    rho_low: float = 0.1,
    rho_high: float = 0.7,
    seed: int = 0,
    start: str = "2000-01-03",
) -> PricePanel:
    """Price panel whose return correlation jumps at the midpoint."""
    rng = substream(seed, "panel")
    r = two_regime_returns(n_assets, n_days - 1, rho_low, rho_high, rng)
    return prices_from_returns(r, business_days(start, n_days))


def pentagon_block(n_rows: int, rng: np.random.Generator, a: float = -0.75, b: float = 0.25) -> np.ndarray:
    """``n_rows`` x 5 block whose sample correlation is an exact circulant.

    Neighbours correlate at ``a``, next neighbours at ``b``; with
    ``a + b = -1/2`` the five columns sum to zero, so the block is rank 4.
    Under the power map such a dependency pushes one eigenvalue well below
    the rest of the emerging spectrum.
    """
    if n_rows < 5:
        raise ValueError("need at least 5 rows")
    g = np.array([1.0, a, b, b, a])
    gram = np.array([[g[(j - i) % 5] for j in range(5)] for i in range(5)])
    w, v = np.linalg.eigh(gram)
    if w[0] < -1e-12:
        raise ValueError(f"({a}, {b}) does not give a valid correlation matrix")
    keep = w > 1e-12
    y = v[:, keep] * np.sqrt(w[keep])
    u = rng.standard_normal((n_rows, y.shape[1]))
    u -= u.mean(axis=0)
    u, _ = np.linalg.qr(u)
    return np.sqrt(n_rows) * u @ y.T


@dataclass
class RegimeFixture:
    panel: PricePanel
    injected_end_date: np.datetime64
    epoch_len: int
    shift: int


def regime_fixture(
    n_assets: int = 120,
    n_days: int = 1000,
    rho_low: float = 0.1,
    rho_high: float = 0.7,
    epoch_len: int = 20,
    inject_epoch: int = 36,
    seed: int = 0,
    start: str = "2000-01-03",
) -> RegimeFixture:
    """Two-regime panel with one planted linear dependency.

    Epochs are disjoint (shift = ``epoch_len``); the returns of the first
    five assets inside epoch ``inject_epoch`` are replaced by a
    :func:`pentagon_block` at the same volatility.
    """
    rng = substream(seed, "panel")
    r = two_regime_returns(n_assets, n_days - 1, rho_low, rho_high, rng)
    n_epochs = (r.shape[0] - epoch_len) // epoch_len + 1
    if not 0 <= inject_epoch < n_epochs:
        raise ValueError(f"inject_epoch must lie in [0, {n_epochs})")
    lo = inject_epoch * epoch_len
    r[lo : lo + epoch_len, :5] = DAILY_VOL * pentagon_block(epoch_len, substream(seed, "inject"))
    dates = business_days(start, n_days)
    # return row i ends on price date i + 1
    return RegimeFixture(prices_from_returns(r, dates), dates[lo + epoch_len], epoch_len, epoch_len)


def planted_indicators(
    n: int,
    seed: int,
    beta0: float = 0.5,
    beta1: float = 0.8,
    noise: float = 0.01,
    lambda_mean: float = -0.01,
    lambda_sd: float = 0.05,
) -> tuple[np.ndarray, np.ndarray]:
    """``(mu, lambda_min)`` with ``mu(t) = beta0 + beta1 lambda_min(t-1) + N(0, noise^2)``.

    ``lambda_min`` is i.i.d. Gaussian; ``mu[0]`` has no predecessor and is
    set to ``beta0``.
    """
    rng = substream(seed, "planted")
    lam = lambda_mean + lambda_sd * rng.standard_normal(n)
    mu = np.empty(n)
    mu[0] = beta0
    mu[1:] = beta0 + beta1 * lam[:-1] + noise * rng.standard_normal(n - 1)
    return mu, lam
