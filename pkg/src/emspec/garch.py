"""GARCH(p, q) filtering and simulation, GARCH(1,1) maximum likelihood.

    sigma2[t] = alpha0 + sum_i alpha[i] x[t-i]^2 + sum_j beta[j] sigma2[t-j]
    x[t] = eta[t] * sqrt(sigma2[t]),  eta ~ N(0, 1)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.optimize import minimize

from emspec.errors import InputError, NumericalError
from emspec.parallel import substream

BURN_IN = 500
BOUNDARY_PERSISTENCE = 0.999
_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class GarchParams:
    alpha0: float
    alpha: tuple[float, ...] = (0.1,)
    beta: tuple[float, ...] = (0.8,)

    def __post_init__(self):
        object.__setattr__(self, "alpha", tuple(float(a) for a in np.atleast_1d(self.alpha)))
        object.__setattr__(self, "beta", tuple(float(b) for b in np.atleast_1d(self.beta)))
        if not self.alpha0 > 0:
            raise InputError(f"alpha0 must be > 0, got {self.alpha0}")
        if any(a < 0 for a in self.alpha) or any(b < 0 for b in self.beta):
            raise InputError("ARCH and GARCH coefficients must be >= 0")
        if self.persistence >= 1.0:
            raise InputError(f"sum(alpha) + sum(beta) = {self.persistence} must be < 1")

    @property
    def p(self) -> int:
        return len(self.beta)

    @property
    def q(self) -> int:
        return len(self.alpha)

    @property
    def persistence(self) -> float:
        return float(sum(self.alpha) + sum(self.beta))

    @property
    def unconditional_variance(self) -> float:
        return self.alpha0 / (1.0 - self.persistence)


@dataclass
class GarchFit:
    params: GarchParams
    sigma2_path: np.ndarray
    log_likelihood: float
    converged: bool
    iterations: int
    start_log_likelihood: float = math.nan
    flags: list[str] = field(default_factory=list)

    @property
    def sigma_path(self) -> np.ndarray:
        return np.sqrt(self.sigma2_path)


@numba.njit(cache=True, nogil=True)
def _filter(x2, alpha0, alpha, beta, init):
    n = x2.shape[0]
    q = alpha.shape[0]
    p = beta.shape[0]
    out = np.empty(n)
    for t in range(n):
        s = alpha0
        for i in range(1, q + 1):
            s += alpha[i - 1] * (x2[t - i] if t - i >= 0 else init)
        for j in range(1, p + 1):
            s += beta[j - 1] * (out[t - j] if t - j >= 0 else init)
        out[t] = s
    return out


def garch_filter(x, params: GarchParams, sigma2_init: float) -> np.ndarray:
    """Conditional variance path; pre-sample ``x^2`` and ``sigma2`` equal ``sigma2_init``."""
    x = np.asarray(x, dtype=float)
    if not sigma2_init > 0:
        raise InputError("sigma2_init must be positive")
    if x.size < max(params.p, params.q) + 1:
        raise InputError("series too short for the model order")
    return _filter(x * x, float(params.alpha0), np.array(params.alpha), np.array(params.beta), float(sigma2_init))


def gaussian_loglik(x, sigma2) -> float:
    """-1/2 sum(ln 2 pi sigma2 + x^2 / sigma2)."""
    x = np.asarray(x, dtype=float)
    return float(-0.5 * np.sum(_LOG_2PI + np.log(sigma2) + x * x / sigma2))


@numba.njit(cache=True, nogil=True)
def _simulate(eta, alpha0, alpha, beta, init):
    n = eta.shape[0]
    q = alpha.shape[0]
    p = beta.shape[0]
    x = np.empty(n)
    s2 = np.empty(n)
    for t in range(n):
        s = alpha0
        for i in range(1, q + 1):
            s += alpha[i - 1] * (x[t - i] * x[t - i] if t - i >= 0 else init)
        for j in range(1, p + 1):
            s += beta[j - 1] * (s2[t - j] if t - j >= 0 else init)
        s2[t] = s
        x[t] = eta[t] * math.sqrt(s)
    return x, s2


def garch_simulate(params: GarchParams, length: int, seed: int, return_sigma2: bool = False):
    """Simulate ``length`` values after discarding a 500-step burn-in.

    The recursion starts from the unconditional variance; innovations come
    from the ``"simulate"`` sub-stream of ``seed``.
    """
    if length < 1:
        raise InputError("length must be >= 1")
    eta = substream(seed, "simulate").standard_normal(length + BURN_IN)
    x, s2 = _simulate(
        eta, float(params.alpha0), np.array(params.alpha), np.array(params.beta), params.unconditional_variance
    )
    if return_sigma2:
        return x[BURN_IN:], s2[BURN_IN:]
    return x[BURN_IN:]


def _logistic(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


def _logit(u: float) -> float:
    return math.log(u / (1.0 - u))


def _unpack(theta, s2: float) -> tuple[float, float, float]:
    # alpha0 = s2 * exp(theta0) keeps the search invariant to the scale of x;
    # persistence and ARCH share each in (0, 1) through the logistic map.
    persistence = _logistic(theta[1])
    share = _logistic(theta[2])
    return s2 * math.exp(theta[0]), persistence * share, persistence * (1.0 - share)


def _pack(alpha0: float, alpha1: float, beta1: float, s2: float) -> np.ndarray:
    persistence = alpha1 + beta1
    return np.array([math.log(alpha0 / s2), _logit(persistence), _logit(alpha1 / persistence)])


def garch11_fit(x, max_iter: int = 2000, tol: float = 1e-8, start=None) -> GarchFit:
    """Gaussian maximum likelihood for GARCH(1,1) by Nelder-Mead.

    The search runs in an unconstrained space (log for alpha0, logistic for
    the stationarity region) from ``(0.1 s2, 0.1, 0.8)`` with ``s2`` the
    sample variance, which also initialises the filter. ``converged`` is
    False if ``max_iter`` is hit; persistence above 0.999 is flagged
    ``boundary``.
    """
    x = np.asarray(x, dtype=float)
    if x.size < 100:
        raise InputError(f"need at least 100 observations, have {x.size}")
    if not np.all(np.isfinite(x)):
        raise InputError("series contains non-finite values")
    s2 = float(np.var(x))
    if not s2 > 0:
        raise InputError("series has zero variance")
    x2 = x * x

    def nll(theta):
        a0, a1, b1 = _unpack(theta, s2)
        sig2 = _filter(x2, a0, np.array([a1]), np.array([b1]), s2)
        value = 0.5 * float(np.sum(_LOG_2PI + np.log(sig2) + x2 / sig2))
        return value if math.isfinite(value) else 1e300

    a0, a1, b1 = start if start is not None else (0.1 * s2, 0.1, 0.8)
    theta0 = _pack(a0, a1, b1, s2)
    simplex = np.vstack([theta0, theta0 + 0.5 * np.eye(3)])
    start_ll = -nll(theta0)
    res = minimize(
        nll,
        theta0,
        method="Nelder-Mead",
        options={"maxiter": max_iter, "maxfev": 4 * max_iter, "xatol": tol, "fatol": tol, "initial_simplex": simplex},
    )
    theta = res.x if -res.fun >= start_ll else theta0
    a0, a1, b1 = _unpack(theta, s2)
    try:
        params = GarchParams(a0, (a1,), (b1,))
    except InputError as exc:
        raise NumericalError(f"optimizer left the admissible region: {exc}") from exc
    path = garch_filter(x, params, s2)
    ll = gaussian_loglik(x, path)
    flags = []
    if params.persistence > BOUNDARY_PERSISTENCE:
        flags.append("boundary")
    converged = bool(res.success)
    if not converged:
        flags.append("not_converged")
    return GarchFit(
        params=params,
        sigma2_path=path,
        log_likelihood=ll,
        converged=converged,
        iterations=int(res.nit),
        start_log_likelihood=start_ll,
        flags=flags,
    )


def prepare_series(series, diff: bool = False) -> np.ndarray:
    """Drop NaNs, optionally first-difference, then demean."""
    s = np.asarray(series, dtype=float)
    s = s[np.isfinite(s)]
    if diff:
        s = np.diff(s)
    if s.size == 0:
        raise InputError("series is empty")
    return s - s.mean()


def fit_indicator_volatility(series, diff: bool = False, **kwargs) -> GarchFit:
    """GARCH(1,1) fit to a demeaned (optionally differenced) indicator series."""
    x = prepare_series(series, diff=diff)
    if not np.var(x) > 0:
        raise InputError("indicator series is constant")
    return garch11_fit(x, **kwargs)
