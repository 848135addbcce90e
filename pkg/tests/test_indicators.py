import numpy as np
import pytest

from emspec.corr import EpochSpec
from emspec.errors import DegenerateEpochError, InputError
from emspec.indicators import build_indicators, market_return, mean_market_correlation
from emspec.ingest import PricePanel, ReturnPanel, to_returns
from emspec.spectrum import PowerMapParams, eigvalsh
from emspec.synthetic import business_days, factor_returns, prices_from_returns, two_regime_panel


def equicorrelation(n, rho):
    c = np.full((n, n), rho)
    np.fill_diagonal(c, 1.0)
    return c


def test_mean_identity_and_ones():
    assert mean_market_correlation(np.eye(6)) == 0.0
    assert mean_market_correlation(np.ones((6, 6))) == 1.0


@pytest.mark.parametrize("n", [2, 7, 50])
def test_mean_equicorrelation_and_lambda_max(n):
    c = equicorrelation(n, 0.5)
    assert mean_market_correlation(c) == 0.5
    assert eigvalsh(c)[-1] == pytest.approx(1 + (n - 1) * 0.5, abs=1e-10)


def test_mean_needs_two():
    with pytest.raises(InputError):
        mean_market_correlation(np.ones((1, 1)))


def returns_panel(r):
    r = np.asarray(r, dtype=float)
    dates = np.datetime64("2020-01-02") + np.arange(r.shape[0])
    return ReturnPanel(dates, [f"X{i}" for i in range(r.shape[1])], r, base_date=np.datetime64("2020-01-01"))


def test_market_return_single_instrument():
    r = returns_panel([[0.1], [-0.2], [0.05]])
    values, source = market_return(r)
    np.testing.assert_array_equal(values, [0.1, -0.2, 0.05])
    assert source == "equal_weight"


def test_market_return_cancels():
    x = np.array([0.1, -0.2, 0.05])
    values, _ = market_return(returns_panel(np.column_stack([x, -x])))
    np.testing.assert_array_equal(values, 0.0)


def test_market_return_index_pass_through():
    r = returns_panel(np.zeros((4, 2)))
    dates = np.datetime64("2019-12-31") + np.arange(6)
    index = PricePanel(dates, ["IDX"], np.array([[100.0], [101.0], [99.0], [99.5], [102.0], [103.0]]))
    values, source = market_return(r, index)
    sub = PricePanel(dates[1:], ["IDX"], index.prices[1:])
    np.testing.assert_allclose(values, to_returns(sub).returns[:, 0], atol=1e-15, rtol=0)
    assert source == "index:IDX"


def test_market_return_index_gap_listed():
    r = returns_panel(np.zeros((3, 2)))
    dates = np.array(["2020-01-01", "2020-01-02", "2020-01-04"], dtype="datetime64[D]")
    index = PricePanel(dates, ["IDX"], np.array([[1.0], [2.0], [3.0]]))
    with pytest.raises(InputError, match="2020-01-03"):
        market_return(r, index)


def test_two_regime_mu_rises():
    panel = two_regime_panel(n_assets=10, n_days=300, seed=0)
    ind = build_indicators(to_returns(panel), EpochSpec(20, 1))
    half = len(ind) // 2
    assert ind.mu[half:].mean() - ind.mu[:half].mean() > 0.3
    assert ind.lambda_max[half:].mean() > ind.lambda_max[:half].mean()
    assert np.all(np.abs(ind.mu) <= 1)
    assert np.all(np.diff(ind.dates) > np.timedelta64(0, "D"))


def test_m_at_least_n_has_no_lambda_min():
    ind = build_indicators(to_returns(two_regime_panel(n_assets=5, n_days=60, seed=1)), EpochSpec(20, 1))
    assert not ind.has_lambda_min
    assert np.all(np.isnan(ind.lambda_min))
    assert np.all(np.isfinite(ind.lambda_max))


@pytest.mark.parametrize("m, shift", [(5, 1), (20, 1), (20, 20), (7, 3)])
def test_row_count_matches_epoch_formula(m, shift):
    returns = to_returns(two_regime_panel(n_assets=6, n_days=100, seed=2))
    ind = build_indicators(returns, EpochSpec(m, shift))
    assert len(ind) == (returns.T - m) // shift + 1
    assert ind.dates[0] == returns.dates[m - 1]


def test_lambda_max_tracks_mu_on_factor_panels():
    g = np.random.default_rng(31)
    days = 600
    rho = 0.45 + 0.35 * np.sin(np.linspace(0, 6 * np.pi, days))
    panel = prices_from_returns(factor_returns(days, 40, rho, g), business_days("2001-01-01", days + 1))
    ind = build_indicators(to_returns(panel), EpochSpec(20, 1))
    assert np.corrcoef(ind.lambda_max / 40, ind.mu)[0, 1] > 0.9


def test_epsilon_recorded_and_emerging_kept():
    returns = to_returns(two_regime_panel(n_assets=10, n_days=40, seed=3))
    ind = build_indicators(returns, EpochSpec(5, 1), PowerMapParams(0.02))
    assert ind.epsilon == 0.02
    assert all(e.size == 6 for e in ind.emerging)
    np.testing.assert_array_equal(ind.lambda_min, [e[0] for e in ind.emerging])


def test_degenerate_error_tagged_and_drop_flagged():
    returns = to_returns(two_regime_panel(n_assets=4, n_days=30, seed=4))
    returns.returns[:10, 2] = 0.0
    with pytest.raises(DegenerateEpochError, match="epoch ending"):
        build_indicators(returns, EpochSpec(5, 1))
    ind = build_indicators(returns, EpochSpec(5, 1), degenerate="drop")
    assert ind.flags[0] == "dropped:S002"
    assert "dropped" not in ind.flags[-1]


def test_too_short_panel():
    returns = to_returns(two_regime_panel(n_assets=3, n_days=10, seed=5))
    with pytest.raises(InputError):
        build_indicators(returns, EpochSpec(20, 1))


def test_threads_do_not_change_output():
    returns = to_returns(two_regime_panel(n_assets=12, n_days=80, seed=6))
    a = build_indicators(returns, EpochSpec(10, 1), threads=1)
    b = build_indicators(returns, EpochSpec(10, 1), threads=3)
    for name in ("mu", "lambda_min", "lambda_max", "separation_gap"):
        assert getattr(a, name).tobytes() == getattr(b, name).tobytes()
