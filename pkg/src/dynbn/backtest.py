"""Rolling-window refits and minimum-variance investment strategies.

The harness refits the model every ``refit_every`` trading days on the most
recent ``window`` observations, predicts the covariance path until the next
refit, and trades daily on minimum-variance weights. Strategy 1 invests every
day. Strategy 2 invests only when the one-day-ahead predicted risk indicator
(mean network density, mean clustering coefficient, or VaR) is below its mean
over the previous ``lookback`` predicted days; the first ``lookback``
prediction days always invest. Uninvested days sit in cash; invested days
compound the portfolio log-return. Fits are strategy-independent, so one pass
of :func:`rolling_forecasts` can feed any number of strategy evaluations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .errors import ConfigError
from .mcmc import SampleArchive, SamplerConfig, run_chain
from .predict import FitSummary, PredictionBundle, min_variance_weights, predict_paths, risk_indicators

INDICATOR_KINDS = ("density", "clustering", "var")


@dataclass
class RiskConfig:
    indicator: str = "var"
    alpha: float = 0.025
    lookback: int = 20

    def validate(self) -> None:
        if self.indicator not in INDICATOR_KINDS:
            raise ConfigError(f"indicator must be one of {INDICATOR_KINDS}, got {self.indicator!r}")
        if not 0.0 < self.alpha < 0.5:
            raise ConfigError(f"alpha must be in (0, 0.5), got {self.alpha}")
        if self.lookback < 1:
            raise ConfigError("lookback must be at least 1")


@dataclass
class WindowForecast:
    """One refit: forecasts for the days between this refit and the next."""

    first_day: int  # 0-based row of the first predicted day
    horizon: int
    bundle: PredictionBundle
    fit: FitSummary
    archive: SampleArchive | None = None


@dataclass
class BacktestLedger:
    """Daily accounting: decisions, weights, realized returns, cumulative value."""

    days: np.ndarray
    invested: np.ndarray
    indicator: np.ndarray
    threshold: np.ndarray
    weights: np.ndarray
    daily_return: np.ndarray
    cum_value: np.ndarray
    strategy: int
    risk: RiskConfig | None
    start_value: float = 1000.0
    meta: dict = field(default_factory=dict)


def rolling_forecasts(
    returns: np.ndarray,
    vol_index: np.ndarray,
    *,
    window: int = 250,
    refit_every: int = 20,
    sampler: SamplerConfig | None = None,
    n_paths: int = 100,
    seed: int = 0,
    keep_archives: bool = False,
) -> list[WindowForecast]:
    """Fit on each rolling window and predict to the next refit.

    Window k fits rows [k*refit_every, k*refit_every + window) and predicts
    the following ``refit_every`` rows (fewer at the series end), so every
    prediction uses only data strictly before its first predicted day.
    """
    returns = np.asarray(returns, dtype=float)
    vol_index = np.asarray(vol_index, dtype=float)
    total = len(returns)
    if total < window + 1:
        raise ConfigError(f"need more than window={window} rows, got {total}")
    if sampler is None:
        sampler = SamplerConfig()
    seed_gen = np.random.default_rng(seed)
    forecasts: list[WindowForecast] = []
    fit_end = window
    while fit_end < total:
        horizon = min(refit_every, total - fit_end)
        lo = fit_end - window
        fit_seed = int(seed_gen.integers(0, 2**63 - 1))
        pred_seed = int(seed_gen.integers(0, 2**63 - 1))
        archive = run_chain(sampler, returns[lo:fit_end], vol_index[lo:fit_end], seed=fit_seed)
        fit = FitSummary.from_archive(archive)
        bundle = predict_paths(fit, horizon, n_paths, seed=pred_seed)
        forecasts.append(WindowForecast(
            first_day=fit_end, horizon=horizon, bundle=bundle, fit=fit,
            archive=archive if keep_archives else None,
        ))
        fit_end += refit_every
    return forecasts


def _indicator_values(forecast: WindowForecast, risk: RiskConfig) -> np.ndarray:
    nd_bar, cc_bar, var_alpha = risk_indicators(forecast.bundle, risk.alpha)
    if risk.indicator == "density":
        return nd_bar
    if risk.indicator == "clustering":
        return cc_bar
    return var_alpha


def apply_strategy(
    forecasts: list[WindowForecast],
    returns: np.ndarray,
    *,
    strategy: int,
    risk: RiskConfig | None = None,
    start_value: float = 1000.0,
) -> BacktestLedger:
    """Evaluate one strategy over precomputed forecasts."""
    if strategy not in (1, 2):
        raise ConfigError(f"strategy must be 1 or 2, got {strategy}")
    if strategy == 2:
        if risk is None:
            raise ConfigError("strategy 2 needs a risk configuration")
        risk.validate()

    returns = np.asarray(returns, dtype=float)
    days = []
    sigma_hats = []
    indicator = []
    for fc in forecasts:
        vals = _indicator_values(fc, risk) if strategy == 2 else np.zeros(fc.horizon)
        for h in range(fc.horizon):
            days.append(fc.first_day + h)
            sigma_hats.append(fc.bundle.sigma_hat[h])
            indicator.append(float(vals[h]))
    return _build_ledger(np.array(days, dtype=int), sigma_hats, np.array(indicator),
                         returns, strategy, risk, start_value)


def external_forecast_ledger(
    sigma_hats: np.ndarray,
    returns: np.ndarray,
    first_day: int,
    *,
    strategy: int,
    risk: RiskConfig | None = None,
    start_value: float = 1000.0,
) -> BacktestLedger:
    """Run the same accounting on an externally produced covariance series.

    For strategy 2 only the VaR indicator is available (Gaussian VaR of the
    minimum-variance portfolio implied by each forecast); network indicators
    need model paths.
    """
    sigma_hats = np.asarray(sigma_hats, dtype=float)
    returns = np.asarray(returns, dtype=float)
    if strategy == 2:
        if risk is None:
            raise ConfigError("strategy 2 needs a risk configuration")
        risk.validate()
        if risk.indicator != "var":
            raise ConfigError("external covariance series only supports the var indicator")
    days = np.arange(first_day, first_day + len(sigma_hats))
    indicator = np.zeros(len(sigma_hats))
    if strategy == 2:
        z = float(norm.ppf(risk.alpha))
        for k, sig in enumerate(sigma_hats):
            w = min_variance_weights(sig)
            indicator[k] = -z * math.sqrt(float(w @ sig @ w))
    return _build_ledger(days, list(sigma_hats), indicator, returns, strategy, risk, start_value)


def _build_ledger(days, sigma_hats, indicator, returns, strategy, risk, start_value) -> BacktestLedger:
    n = returns.shape[1]
    count = len(days)
    invested = np.zeros(count, dtype=bool)
    threshold = np.full(count, np.nan)
    weights = np.zeros((count, n))
    daily_ret = np.zeros(count)
    cum_value = np.empty(count)
    lookback = risk.lookback if risk is not None else 0
    log_value = math.log(start_value)
    for k in range(count):
        day = days[k]
        if day >= len(returns):
            raise ConfigError(f"prediction day {day} beyond the return series")
        if strategy == 1:
            go = True
        elif k < lookback:
            go = True
        else:
            thr = float(np.mean(indicator[k - lookback : k]))
            threshold[k] = thr
            go = indicator[k] < thr
        if go:
            w = min_variance_weights(sigma_hats[k])
            weights[k] = w
            daily_ret[k] = float(w @ returns[day])
            log_value += daily_ret[k]
        invested[k] = go
        cum_value[k] = math.exp(log_value)
    return BacktestLedger(
        days=np.asarray(days), invested=invested, indicator=np.asarray(indicator),
        threshold=threshold, weights=weights, daily_return=daily_ret,
        cum_value=cum_value, strategy=strategy, risk=risk, start_value=start_value,
    )


def run_backtest(
    returns: np.ndarray,
    vol_index: np.ndarray,
    *,
    strategy: int,
    risk: RiskConfig | None = None,
    window: int = 250,
    refit_every: int = 20,
    sampler: SamplerConfig | None = None,
    n_paths: int = 100,
    seed: int = 0,
    start_value: float = 1000.0,
) -> BacktestLedger:
    """Fit-predict-trade end to end for a single strategy."""
    forecasts = rolling_forecasts(
        returns, vol_index, window=window, refit_every=refit_every,
        sampler=sampler, n_paths=n_paths, seed=seed,
    )
    ledger = apply_strategy(forecasts, returns, strategy=strategy, risk=risk,
                            start_value=start_value)
    ledger.meta["windows"] = len(forecasts)
    ledger.meta["seed"] = seed
    return ledger
