"""Acceptance suite: one test per criterion, one PASS/FAIL line each.

Lines are collected in ``RESULTS`` and printed at the end of the pytest
session (see conftest.py). Run standalone with
``python tests/test_acceptance.py``.
"""

import math
import os
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from emspec.config import load_config_file, resolve_config  # noqa: E402
from emspec.corr import EpochSpec, correlation_matrix, rolling_correlations  # noqa: E402
from emspec.csvio import column, read_csv  # noqa: E402
from emspec.eigen import eig_symmetric, eigvalsh  # noqa: E402
from emspec.garch import GarchParams, garch11_fit, garch_simulate  # noqa: E402
from emspec.indicators import build_indicators, mean_market_correlation  # noqa: E402
from emspec.ingest import ReturnPanel, align, load_prices, to_returns  # noqa: E402
from emspec.lagreg import ols_fit, rolling_t_series  # noqa: E402
from emspec.modetest import silverman_test  # noqa: E402
from emspec.parallel import substream  # noqa: E402
from emspec.pipeline import Pipeline  # noqa: E402
from emspec.spectrum import PowerMapParams, power_map, split_spectrum  # noqa: E402
from emspec.synthetic import planted_indicators, regime_fixture  # noqa: E402
from oracles import charpoly_eigenvalues, normal_equations  # noqa: E402

DATA = Path(__file__).resolve().parents[1] / "src" / "emspec" / "data"
RESULTS: list[str] = []
PANEL_ENV = "EMSPEC_SP500_PANEL"


def report(number: int, ok: bool, detail: str, status: str | None = None) -> None:
    status = status or ("PASS" if ok else "FAIL")
    line = f"criterion {number:>2}: {status}  {detail}"
    RESULTS.append(line)
    print(line)


def gaussian_panel(n_assets: int, n_returns: int, seed: int) -> ReturnPanel:
    r = substream(seed, "acceptance-panel").standard_normal((n_returns, n_assets))
    dates = np.datetime64("2000-01-03") + np.arange(n_returns)
    return ReturnPanel(dates, [f"A{i:02d}" for i in range(n_assets)], r)


# N = 50, M = 20, shift 1: 1019 return rows give exactly 1000 epochs
_PANEL_CACHE: dict = {}


def _epochs_n50():
    if "eps" not in _PANEL_CACHE:
        t0 = time.perf_counter()
        panel = gaussian_panel(50, 1019, seed=1)
        mats = [ec.matrix for ec in rolling_correlations(panel, EpochSpec(20, 1))]
        _PANEL_CACHE["eps"] = (mats, time.perf_counter() - t0)
    return _PANEL_CACHE["eps"]


def test_criterion_01_rank_law():
    t0 = time.perf_counter()
    mats, build = _epochs_n50()
    counts = [int(np.sum(np.abs(eigvalsh(c)) < 1e-8)) for c in mats]
    elapsed = build + time.perf_counter() - t0
    ok = len(mats) == 1000 and all(k == 31 for k in counts) and elapsed < 10
    report(1, ok, f"{sum(k == 31 for k in counts)}/{len(mats)} epochs with exactly 31 |lambda| < 1e-8, {elapsed:.2f} s")
    assert ok


def test_criterion_02_degeneracy_breaking():
    mats, _ = _epochs_n50()
    distinct = 0
    negative = 0
    for c in mats:
        split = split_spectrum(eigvalsh(power_map(c, 0.01)), 50, 20)
        if np.min(np.diff(split.emerging)) > 0:
            distinct += 1
        if split.emerging[0] < 0:
            negative += 1
    frac = negative / len(mats)
    ok = distinct == len(mats) and frac >= 0.99
    report(
        2,
        ok,
        f"pairwise distinct in {distinct}/{len(mats)} epochs; >= 1 negative in {negative}/{len(mats)} "
        f"({100 * frac:.1f}%, need >= 99%)",
    )
    assert distinct == len(mats), "emerging eigenvalues not pairwise distinct"
    assert frac >= 0.99, f"only {100 * frac:.1f}% of epochs have a negative emerging eigenvalue"


def test_criterion_03_trace_conservation():
    mats, _ = _epochs_n50()
    worst = max(abs(eigvalsh(power_map(c, 0.01)).sum() - 50) for c in mats)
    ok = worst <= 1e-8 * 50
    report(3, ok, f"max |sum(lambda) - N| = {worst:.2e} over {len(mats)} epochs (tol {1e-8 * 50:.0e})")
    assert ok


def test_criterion_04_eigensolver_oracle():
    g = np.random.default_rng(404)
    worst_val = worst_res = 0.0
    for _ in range(500):
        n = int(g.integers(1, 13))
        a = g.standard_normal((n, n))
        a = 0.5 * (a + a.T)
        w, v = eig_symmetric(a)
        worst_val = max(worst_val, float(np.max(np.abs(w - charpoly_eigenvalues(a)))))
        worst_res = max(worst_res, float(np.linalg.norm(v @ np.diag(w) @ v.T - a) / np.linalg.norm(a)))
    ok = worst_val <= 1e-10 and worst_res <= 1e-9
    report(4, ok, f"500 matrices: max eigenvalue error {worst_val:.2e}, max reconstruction residual {worst_res:.2e}")
    assert ok


def test_criterion_05_equicorrelation():
    worst = 0.0
    mu_exact = True
    for rho in (0.1, 0.5, 0.9):
        for n in (4, 50):
            c = np.full((n, n), rho)
            np.fill_diagonal(c, 1.0)
            expected = np.sort(np.array([1 + (n - 1) * rho] + [1 - rho] * (n - 1)))
            worst = max(worst, float(np.max(np.abs(eigvalsh(c) - expected))))
            mu_exact &= mean_market_correlation(c) == rho
    ok = worst <= 1e-10 and mu_exact
    report(5, ok, f"max spectrum error {worst:.2e}; mu == rho exactly: {mu_exact}")
    assert ok


def test_criterion_06_silverman_calibration():
    t0 = time.perf_counter()
    null_rejects = alt_rejects = 0
    for rep in range(50):
        g = substream(rep, "calibration")
        x = g.standard_normal(200)
        null_rejects += silverman_test(x, b=500, seed=rep).reject
        comp = g.random(200) < 0.1
        y = np.where(comp, 8 + 0.1 * g.standard_normal(200), g.standard_normal(200))
        alt_rejects += silverman_test(y, b=500, seed=rep).reject
    elapsed = time.perf_counter() - t0
    ok = null_rejects <= 1 and alt_rejects >= 48 and elapsed < 120
    report(6, ok, f"unimodal rejects {null_rejects}/50 (<= 1), bimodal rejects {alt_rejects}/50 (>= 48), {elapsed:.1f} s")
    assert ok


def test_criterion_07_ols_oracle():
    g = np.random.default_rng(707)
    worst = 0.0
    rule_ok = True
    for _ in range(100):
        n, k = int(g.integers(6, 30)), int(g.integers(1, 5))
        X = np.column_stack([np.ones(n), g.standard_normal((n, k))])
        y = X @ g.standard_normal(k + 1) * g.uniform(0, 0.5) + g.standard_normal(n)
        beta, se = normal_equations(y, X)
        res = ols_fit(y, X)
        worst = max(worst, float(np.max(np.abs(res.beta - beta))), float(np.max(np.abs(res.se - se))))
        rule_ok &= res.significant == (abs(res.t_beta1) > 2)
        rule_ok &= res.significant == (abs(beta[1] / se[1]) > 2)
    ok = worst <= 1e-8 and rule_ok
    report(7, ok, f"max |coef/se error| {worst:.2e}; |t| > 2 marker consistent: {rule_ok}")
    assert ok


def test_criterion_08_planted_signal():
    mu, lam = planted_indicators(5000, seed=8)
    planted = list(rolling_t_series(mu, lam, p=3, window=126))
    all_sig = all(r.significant for r in planted)
    mu0, lam0 = planted_indicators(20000, seed=80)
    lam0 = substream(80, "permute").permutation(lam0)
    null = [r.significant for r in rolling_t_series(mu0, lam0, p=3, window=126)]
    rate = float(np.mean(null))
    ok = all_sig and abs(rate - 0.05) <= 0.03
    min_t = min(abs(r.t_beta1) for r in planted)
    report(8, ok, f"planted: {len(planted)} windows, min |t| = {min_t:.1f}; permuted null rate {100 * rate:.1f}% over {len(null)} windows")
    assert ok


def _independent_loglik(x, a0, a1, b1):
    s2 = float(np.var(x))
    prev_sig, prev_x2 = s2, s2
    total = []
    for xi in x:
        sig = a0 + a1 * prev_x2 + b1 * prev_sig
        total.append(math.log(2 * math.pi * sig) + xi * xi / sig)
        prev_sig, prev_x2 = sig, xi * xi
    return -0.5 * math.fsum(total)


def test_criterion_09_garch_recovery():
    truth = GarchParams(0.1, (0.1,), (0.8,))
    hits = 0
    worst_ll = 0.0
    for seed in range(20):
        x = garch_simulate(truth, 5000, seed=seed)
        fit = garch11_fit(x)
        p = fit.params
        hits += abs(p.alpha0 - 0.1) <= 0.05 and abs(p.alpha[0] - 0.1) <= 0.05 and abs(p.beta[0] - 0.8) <= 0.05
        worst_ll = max(worst_ll, abs(fit.log_likelihood - _independent_loglik(x, p.alpha0, p.alpha[0], p.beta[0])))
    ok = hits >= 18 and worst_ll <= 1e-8
    report(9, ok, f"{hits}/20 fits within +-0.05 on every parameter; max likelihood mismatch {worst_ll:.2e}")
    assert ok


def _run_regime(out: Path, threads: int | None = None) -> Path:
    cfg = resolve_config(
        load_config_file(DATA / "regime_panel.conf"),
        {"prices_path": str(DATA / "regime_panel.csv"), "output_dir": str(out)},
    )
    Pipeline(cfg, threads=threads).run_all()
    return out


def test_criterion_10_regime_sensitivity(tmp_path):
    out = _run_regime(tmp_path / "run")
    h, rows = read_csv(out / "indicators.csv")
    mu = column(h, rows, "mu")
    lmax = column(h, rows, "lambda_max")
    half = len(mu) // 2
    d_mu = mu[half:].mean() - mu[:half].mean()
    d_lmax = lmax[half:].mean() - lmax[:half].mean()
    n = load_prices(out / "prices_aligned.csv").N
    oh, orows = read_csv(out / "outliers.csv")
    dates = column(oh, orows, "end_date", "date")
    p = column(oh, orows, "p_value")
    flagged = [str(d) for d, v in zip(dates, p) if v < 0.001]
    injected = str(regime_fixture(seed=0).injected_end_date)
    # lambda_max ~ 1 + (N - 1) mu: require at least half the implied rise
    ok = d_mu > 0.3 and d_lmax >= 0.5 * (n - 1) * d_mu and flagged == [injected]
    report(
        10,
        ok,
        f"mu rise {d_mu:.3f}; lambda_max {lmax[:half].mean():.1f} -> {lmax[half:].mean():.1f}; "
        f"p < 0.001 at {flagged} (planted {injected}) among {np.isfinite(p).sum()} tested epochs",
    )
    assert ok


def test_criterion_11_determinism(tmp_path, monkeypatch):
    monkeypatch.setenv("EMSPEC_THREADS", "1")
    a = _run_regime(tmp_path / "a")
    monkeypatch.setenv("EMSPEC_THREADS", "4")
    b = _run_regime(tmp_path / "b")
    names = ["indicators.csv", "spectra.csv", "emerging.csv", "outliers.csv", "regression.csv", "garch.csv", "garch_paths.csv"]
    same = [n for n in names if (a / n).read_bytes() == (b / n).read_bytes()]
    ok = len(same) == len(names)
    report(11, ok, f"{len(same)}/{len(names)} CSVs bitwise identical with EMSPEC_THREADS=1 vs 4")
    assert ok


def test_criterion_12_optional_real_panel():
    path = os.environ.get(PANEL_ENV)
    if not path:
        report(12, True, f"optional; set {PANEL_ENV} to a wide CSV of 194 constituents to run", status="SKIP")
        pytest.skip("no user-supplied panel")
    panel, _ = align(load_prices(path))
    returns = to_returns(panel)
    ind = build_indicators(returns, EpochSpec(20, 1), PowerMapParams(0.01))
    target = np.datetime64("2008-09-15")
    near = np.abs((ind.dates - target).astype(int)) <= 5
    if not near.any():
        report(12, False, "panel does not cover 2008-09-15 (informative only)", status="INFO-FAIL")
        return
    lmax = float(np.max(ind.lambda_max[near]))
    lmin = float(np.min(ind.lambda_min[near]))
    ok_max = abs(lmax - 94.49) <= 0.1 * 94.49
    ok_min = lmin < 0 and 0.5 <= lmin / -0.014 <= 2
    ok = panel.N == 194 and ok_max and ok_min
    report(
        12,
        ok,
        f"N={panel.N}; lambda_max {lmax:.2f} (target 94.49 +- 10%); lambda_min {lmin:.4f} (target -0.014, x2) "
        "(informative only)",
        status="PASS" if ok else "INFO-FAIL",
    )


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
