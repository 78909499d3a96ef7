import math

import numpy as np
import pytest

from dynbn.backtest import (
    RiskConfig,
    apply_strategy,
    external_forecast_ledger,
    rolling_forecasts,
    run_backtest,
)
from dynbn.errors import ConfigError
from dynbn.mcmc import SamplerConfig
from dynbn.predict import PredictionBundle
from dynbn.simulate import demo_params, simulate_dataset


def toy_bundle(sigma_hats, density=None, clustering=None, n_paths=4, seed=0):
    """Bundle whose per-path covariances all equal the given per-day values."""
    sigma_hats = np.asarray(sigma_hats, dtype=float)
    horizon, n, _ = sigma_hats.shape
    rng = np.random.default_rng(seed)
    sigmas = np.tile(sigma_hats, (n_paths, 1, 1, 1))
    returns = rng.standard_normal((n_paths, horizon, n)) * 0.01
    density = np.zeros((n_paths, horizon)) if density is None else np.tile(density, (n_paths, 1))
    clustering = np.zeros((n_paths, horizon)) if clustering is None else np.tile(clustering, (n_paths, 1))
    return PredictionBundle(returns=returns, sigmas=sigmas, density=density,
                            clustering=clustering, graphs=[], sigma_hat=sigma_hats)


class TestExternalLedger:
    def test_constant_indicator_never_invests_after_warmup(self):
        sig = np.tile(np.eye(2), (30, 1, 1))
        returns = np.full((40, 2), 0.01)
        risk = RiskConfig(indicator="var", alpha=0.025, lookback=5)
        ledger = external_forecast_ledger(sig, returns, first_day=10, strategy=2, risk=risk)
        assert np.all(ledger.invested[:5])
        assert not np.any(ledger.invested[5:])  # strict inequality fails on ties
        assert np.all(ledger.daily_return[5:] == 0.0)
        assert np.all(ledger.cum_value > 0)

    def test_single_asset_tracks_returns(self):
        T = 25
        rng = np.random.default_rng(3)
        returns = rng.standard_normal((T, 1)) * 0.02
        sig = np.full((10, 1, 1), 0.5)
        ledger = external_forecast_ledger(sig, returns, first_day=15, strategy=1)
        assert np.allclose(ledger.weights, 1.0)
        expected = 1000.0 * np.exp(np.cumsum(returns[15:, 0]))
        assert np.allclose(ledger.cum_value, expected, rtol=1e-12)

    def test_network_indicator_rejected(self):
        sig = np.tile(np.eye(2), (5, 1, 1))
        with pytest.raises(ConfigError):
            external_forecast_ledger(sig, np.zeros((10, 2)), 5, strategy=2,
                                     risk=RiskConfig(indicator="density"))


class TestApplyStrategy:
    def _forecasts(self, sigma_hats, first_day, density=None):
        from dynbn.backtest import WindowForecast

        bundle = toy_bundle(sigma_hats, density=density)
        return [WindowForecast(first_day=first_day, horizon=len(sigma_hats),
                               bundle=bundle, fit=None)]

    def test_two_day_hand_ledger(self):
        sigma = np.array([[[0.04, 0.0], [0.0, 0.04]],
                          [[0.09, 0.0], [0.0, 0.01]]])
        returns = np.zeros((12, 2))
        returns[10] = [0.02, -0.01]
        returns[11] = [0.01, 0.03]
        ledger = apply_strategy(self._forecasts(sigma, 10), returns, strategy=1)
        # day 1: equal weights -> 0.005; day 2: weights (0.1, 0.9) -> 0.028
        assert np.allclose(ledger.weights[0], [0.5, 0.5])
        assert np.allclose(ledger.weights[1], [0.1, 0.9])
        assert ledger.daily_return[0] == pytest.approx(0.005, abs=1e-15)
        assert ledger.daily_return[1] == pytest.approx(0.028, abs=1e-15)
        assert ledger.cum_value[1] == pytest.approx(1000.0 * math.exp(0.033), rel=1e-12)

    def test_strategy1_ignores_risk_config(self):
        sigma = np.tile(np.eye(3), (6, 1, 1))
        returns = np.random.default_rng(0).standard_normal((20, 3)) * 0.01
        fc = self._forecasts(sigma, 14)
        l1 = apply_strategy(fc, returns, strategy=1, risk=RiskConfig("var", 0.01, 3))
        l2 = apply_strategy(fc, returns, strategy=1, risk=RiskConfig("clustering", 0.025, 9))
        assert np.array_equal(l1.cum_value, l2.cum_value)
        assert np.array_equal(l1.weights, l2.weights)

    def test_weights_sum_to_one_on_invested_days(self, rng):
        from conftest import random_pd_corr

        sigma = np.stack([random_pd_corr(rng, 3) for _ in range(8)])
        returns = rng.standard_normal((30, 3)) * 0.01
        density = rng.random((1, 8))
        ledger = apply_strategy(self._forecasts(sigma, 20, density=density), returns,
                                strategy=2, risk=RiskConfig("density", 0.025, 3))
        for k in range(len(ledger.days)):
            if ledger.invested[k]:
                assert abs(ledger.weights[k].sum() - 1.0) < 1e-12
            else:
                assert ledger.daily_return[k] == 0.0

    def test_density_indicator_decisions(self):
        sigma = np.tile(np.eye(2), (6, 1, 1))
        density = np.array([[0.5, 0.5, 0.5, 0.1, 0.9, 0.4]])
        returns = np.zeros((20, 2))
        ledger = apply_strategy(self._forecasts(sigma, 10, density=density), returns,
                                strategy=2, risk=RiskConfig("density", 0.025, 3))
        # warm-up: first 3 days invest; day 4: 0.1 < mean(.5,.5,.5) invest;
        # day 5: 0.9 > mean(.5,.5,.1) abstain; day 6: 0.4 < mean(.5,.1,.9) invest
        assert list(ledger.invested) == [True, True, True, True, False, True]


@pytest.fixture(scope="module")
def tiny_series():
    rng = np.random.default_rng(12)
    theta = demo_params(3, rng)
    data, truth = simulate_dataset(theta, 48, rng)
    return data, truth.vol_index


class TestRunBacktest:
    def _cfg(self):
        return dict(window=30, refit_every=6,
                    sampler=SamplerConfig(iterations=8, burn_in=2, thinning=2),
                    n_paths=8, seed=4)

    def test_ledger_covers_remaining_days(self, tiny_series):
        data, vol = tiny_series
        ledger = run_backtest(data, vol, strategy=1, **self._cfg())
        assert list(ledger.days) == list(range(30, 48))
        assert ledger.meta["windows"] == 3

    def test_seed_determinism(self, tiny_series):
        data, vol = tiny_series
        l1 = run_backtest(data, vol, strategy=2, risk=RiskConfig("var", 0.025, 4), **self._cfg())
        l2 = run_backtest(data, vol, strategy=2, risk=RiskConfig("var", 0.025, 4), **self._cfg())
        assert np.array_equal(l1.cum_value, l2.cum_value)
        assert np.array_equal(l1.weights, l2.weights)
        assert np.array_equal(l1.indicator, l2.indicator)

    def test_shared_forecasts_match_end_to_end(self, tiny_series):
        data, vol = tiny_series
        cfg = self._cfg()
        forecasts = rolling_forecasts(data, vol, window=cfg["window"],
                                      refit_every=cfg["refit_every"],
                                      sampler=cfg["sampler"], n_paths=cfg["n_paths"],
                                      seed=cfg["seed"])
        direct = run_backtest(data, vol, strategy=1, **cfg)
        shared = apply_strategy(forecasts, data, strategy=1)
        assert np.array_equal(direct.cum_value, shared.cum_value)

    def test_series_too_short(self):
        with pytest.raises(ConfigError):
            run_backtest(np.zeros((10, 2)), np.zeros(10), strategy=1, window=30)
