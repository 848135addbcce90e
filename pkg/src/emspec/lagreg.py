"""Lagged OLS of mean market correlation on the smallest emerging eigenvalue.

    mu(t) = b0 + b1 lambda_min(t-1) + ... + bp lambda_min(t-p) + e(t)

fitted over rolling windows; the statistic of interest is the t-value of b1.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
import scipy.linalg

from emspec.errors import InputError, RankDeficientError

logger = logging.getLogger(__name__)

DEFAULT_LAGS = 3
DEFAULT_WINDOW = 126
T_THRESHOLD = 2.0
_EPS = np.finfo(float).eps


@dataclass
class RegressionResult:
    beta: np.ndarray
    se: np.ndarray
    t_beta1: float
    r_squared: float
    n_obs: int
    rss: float
    window_end: np.datetime64 | None = None
    flags: list[str] = field(default_factory=list)

    @property
    def significant(self) -> bool:
        return is_significant(self.t_beta1)

    @property
    def t_values(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.beta / self.se


def is_significant(t: float) -> bool:
    """|t| > 2."""
    return bool(abs(t) > T_THRESHOLD)


def ols_fit(y, X, names=None) -> RegressionResult:
    """Least squares via column-pivoted Householder QR.

    ``X`` must already contain the intercept column. Standard errors are
    classical: ``sigma^2 (X'X)^-1`` with ``sigma^2 = RSS / (n - k)``.
    A perfect fit gives ``se = 0`` and ``t_beta1 = +-inf`` (flag
    ``perfect_fit``), or 0 when the coefficient itself is zero.
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise InputError(f"shape mismatch: y {y.shape}, X {X.shape}")
    n, k = X.shape
    if n < k + 1:
        raise InputError(f"need at least {k + 1} observations for {k} coefficients, have {n}")
    names = list(names) if names is not None else [f"x{j}" for j in range(k)]

    Q, R, piv = scipy.linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = max(n, k) * _EPS * diag[0] if k else 0.0
    rank = int(np.sum(diag > tol))
    if rank < k:
        bad = [names[j] for j in piv[rank:]]
        raise RankDeficientError(f"design matrix is rank deficient ({rank} < {k}); collinear column(s): {bad}", bad)

    qty = Q.T @ y
    coef_p = scipy.linalg.solve_triangular(R, qty)
    beta = np.empty(k)
    beta[piv] = coef_p
    resid = y - X @ beta
    rss = float(resid @ resid)
    dof = n - k
    centred = y - y.mean()
    tss = float(centred @ centred)

    rinv = scipy.linalg.solve_triangular(R, np.eye(k))
    unscaled = np.empty(k)
    unscaled[piv] = np.sum(rinv * rinv, axis=1)

    flags: list[str] = []
    yscale = float(np.sqrt(y @ y)) or 1.0
    if math.sqrt(rss) <= 1e3 * _EPS * max(n, 1) * yscale:
        flags.append("perfect_fit")
        rss = 0.0
        se = np.zeros(k)
        r2 = 1.0
        # snap coefficients that are zero up to rounding
        colnorm = np.sqrt(np.sum(X * X, axis=0))
        beta = np.where(np.abs(beta) * colnorm <= 1e3 * _EPS * max(n, 1) * yscale, 0.0, beta)
    else:
        sigma2 = rss / dof
        se = np.sqrt(sigma2 * unscaled)
        r2 = 1.0 - rss / tss if tss > 0 else 0.0

    if k < 2:
        t1 = math.nan
    elif se[1] > 0:
        t1 = float(beta[1] / se[1])
    else:
        t1 = 0.0 if beta[1] == 0.0 else math.copysign(math.inf, beta[1])
    return RegressionResult(beta=beta, se=se, t_beta1=t1, r_squared=r2, n_obs=n, rss=rss, flags=flags)


@dataclass
class LaggedDesign:
    dates: np.ndarray | None
    y: np.ndarray
    X: np.ndarray
    names: list[str]


def lagged_design(mu, lambda_min, p: int = DEFAULT_LAGS, mu_dates=None, lambda_dates=None) -> LaggedDesign:
    """Align ``mu(t)`` with ``1, lambda_min(t-1), ..., lambda_min(t-p)``.

    The first ``p`` rows are dropped, as are rows touching a NaN.
    """
    mu = np.asarray(mu, dtype=float)
    lam = np.asarray(lambda_min, dtype=float)
    if p < 1:
        raise InputError("need at least one lag")
    if mu.shape != lam.shape:
        raise InputError(f"series lengths differ: mu {mu.shape}, lambda_min {lam.shape}")
    if mu_dates is not None and lambda_dates is not None:
        if not np.array_equal(np.asarray(mu_dates), np.asarray(lambda_dates)):
            raise InputError("mu and lambda_min are on different date axes")
    dates = mu_dates if mu_dates is not None else lambda_dates
    n = mu.size
    if n <= p:
        raise InputError(f"series of length {n} too short for {p} lags")
    rows = n - p
    X = np.empty((rows, p + 1))
    X[:, 0] = 1.0
    for lag in range(1, p + 1):
        X[:, lag] = lam[p - lag : n - lag]
    y = mu[p:]
    ok = np.isfinite(y) & np.all(np.isfinite(X), axis=1)
    out_dates = None if dates is None else np.asarray(dates)[p:][ok]
    names = ["const"] + [f"lambda_min(t-{lag})" for lag in range(1, p + 1)]
    return LaggedDesign(out_dates, y[ok], X[ok], names)


def rolling_t_series(
    mu,
    lambda_min,
    p: int = DEFAULT_LAGS,
    window: int = DEFAULT_WINDOW,
    step: int = 1,
    dates=None,
    skipped: list | None = None,
) -> Iterator[RegressionResult]:
    """Fit the lagged model on each window of ``window`` aligned rows.

    Windows advance by ``step`` rows. Rank-deficient windows are skipped,
    logged, and recorded in ``skipped`` as ``(window_end, reason)``.
    """
    if window < p + 10:
        raise InputError(f"window {window} must be at least p + 10 = {p + 10}")
    if step < 1:
        raise InputError("step must be >= 1")
    design = lagged_design(mu, lambda_min, p, mu_dates=dates)
    n = design.y.size
    for end in range(window - 1, n, step):
        lo = end - window + 1
        end_date = None if design.dates is None else design.dates[end]
        try:
            res = ols_fit(design.y[lo : end + 1], design.X[lo : end + 1], design.names)
        except RankDeficientError as exc:
            logger.info("window ending %s skipped: %s", end_date, exc)
            if skipped is not None:
                skipped.append((end_date, str(exc)))
            continue
        res.window_end = end_date
        yield res
