import numpy as np
import pytest

from emspec.corr import correlation_matrix
from emspec.ingest import load_prices, to_returns
from emspec.parallel import date_key, ordered_map, substream, worker_count
from emspec.synthetic import (
    business_days,
    factor_panel,
    pentagon_block,
    planted_indicators,
    regime_fixture,
    two_regime_panel,
)


def test_business_days_skip_weekends():
    d = business_days("2024-01-05", 3)  # Friday
    assert [str(x) for x in d] == ["2024-01-05", "2024-01-08", "2024-01-09"]


def test_factor_panel_shape_and_positivity():
    p = factor_panel(5, 50, 0.3, seed=1)
    assert (p.T, p.N) == (50, 5)
    assert np.all(p.prices > 0)


def test_two_regime_correlation_jump():
    p = two_regime_panel(20, 2000, 0.1, 0.7, seed=2)
    r = to_returns(p).returns
    h = r.shape[0] // 2
    low = correlation_matrix(r[:h])[0][np.triu_indices(20, 1)].mean()
    high = correlation_matrix(r[h:])[0][np.triu_indices(20, 1)].mean()
    assert abs(low - 0.1) < 0.05 and abs(high - 0.7) < 0.05


def test_pentagon_block_exact_correlation():
    block = pentagon_block(20, np.random.default_rng(0))
    c, _ = correlation_matrix(block)
    g = [1.0, -0.75, 0.25, 0.25, -0.75]
    expected = np.array([[g[(j - i) % 5] for j in range(5)] for i in range(5)])
    np.testing.assert_allclose(c, expected, atol=1e-12)
    np.testing.assert_allclose(block.sum(axis=1), 0.0, atol=1e-12)


def test_pentagon_block_rejects_invalid_pair():
    with pytest.raises(ValueError):
        pentagon_block(20, np.random.default_rng(0), a=-0.9, b=0.9)


def test_regime_fixture_metadata():
    fx = regime_fixture(n_assets=12, n_days=201, inject_epoch=7, seed=3)
    assert fx.epoch_len == fx.shift == 20
    returns = to_returns(fx.panel)
    end = int(np.flatnonzero(returns.dates == fx.injected_end_date)[0])
    assert end == 7 * 20 + 19
    c, _ = correlation_matrix(returns.returns[end - 19 : end + 1, :5])
    assert c[0, 1] == pytest.approx(-0.75, abs=1e-9)


def test_bundled_regime_panel_matches_generator(data_dir):
    fx = regime_fixture(seed=0)
    bundled = load_prices(data_dir / "regime_panel.csv")
    assert bundled.tickers == fx.panel.tickers
    np.testing.assert_array_equal(bundled.dates, fx.panel.dates)
    np.testing.assert_array_equal(bundled.prices, fx.panel.prices)


def test_bundled_small_fixture_matches_generator(data_dir):
    bundled = load_prices(data_dir / "fixture_10x300.csv")
    np.testing.assert_array_equal(bundled.prices, two_regime_panel(10, 300, seed=0).prices)


def test_planted_indicators_relation():
    mu, lam = planted_indicators(1000, seed=4)
    resid = mu[1:] - 0.5 - 0.8 * lam[:-1]
    assert abs(resid.std() - 0.01) < 0.002


def test_substreams_independent_and_reproducible():
    a = substream(1, "outliers", 5).standard_normal(4)
    assert np.array_equal(a, substream(1, "outliers", 5).standard_normal(4))
    assert not np.array_equal(a, substream(1, "outliers", 6).standard_normal(4))
    assert not np.array_equal(a, substream(1, "simulate", 5).standard_normal(4))
    with pytest.raises(ValueError):
        substream(None, "x")


def test_date_key_before_epoch_is_positive():
    assert date_key("1960-01-01") > 0
    assert date_key("2000-01-02") == date_key("2000-01-01") + 1


def test_ordered_map_keeps_order():
    items = list(range(600))
    assert list(ordered_map(lambda v: v * v, items, threads=4, chunk=7)) == [v * v for v in items]


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("EMSPEC_THREADS", "3")
    assert worker_count() == 3
    assert worker_count(2) == 2
    monkeypatch.setenv("EMSPEC_THREADS", "0")
    assert worker_count() == 1
