"""Monte Carlo forward prediction and portfolio quantities.

Prediction restarts the model at the end of the fitting window from posterior
summaries: posterior-mean parameters and terminal states, with the terminal
network (and its count pair) taken from the highest-posterior retained
sample. Each simulated path draws counts, evolves the network, restarts every
conditional correlation at its long-run value on the first step and lets the
DCC recursion take over afterwards, advances GARCH variances on its own
simulated returns, and draws returns from the implied covariance. Averaging
the path covariances gives the covariance forecast; per-path minimum-variance
portfolio returns give the VaR forecast.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .covariance import (
    CorrState,
    DccParams,
    DependenceState,
    GarchParams,
    _finish_state,
    _vol_rank,
    assemble_correlation,
    coord_key,
    derive_coords,
    evolve_dependence,
    garch_step,
)
from .edgedyn import (
    ActivenessParams,
    EdgeDynParams,
    evolve_network,
    step_activeness,
    step_log_means,
)
from .errors import NumericError
from .graphs import Dag, network_stats, topological_order
from .mcmc import SCALAR_PARAMS, SampleArchive
from .posterior import make_rho_bar
from .simulate import _draw_truncated_poisson


@dataclass
class FitSummary:
    """Posterior summaries needed to restart the model at time T."""

    n: int
    edge: EdgeDynParams
    act: ActivenessParams
    garch: GarchParams
    dcc: DccParams
    g_T: Dag
    a_T: int
    d_T: int
    mu_a_T: float
    mu_d_T: float
    w_T: np.ndarray
    sigma2_T: np.ndarray
    sigma_T: np.ndarray
    x_T: np.ndarray
    v_centered: float

    @classmethod
    def from_archive(cls, archive: SampleArchive) -> "FitSummary":
        if not archive.records:
            raise ValueError("archive holds no retained samples")
        n = archive.n
        means = {name: archive.posterior_mean(name) for name in SCALAR_PARAMS}

        def vec_mean(key, field=None):
            if field is None:
                return np.mean([rec["params"][key] for rec in archive.records], axis=0)
            return np.mean([rec[field][key] for rec in archive.records], axis=0)

        w_init = vec_mean("w_init")
        w_init[-1] = 0.5
        r_bar = vec_mean("r_bar")
        np.fill_diagonal(r_bar, 1.0)
        map_rec = archive.map_record()
        term = map_rec["terminal"]
        mu_a_T = float(np.mean([math.exp(min(rec["terminal"]["log_mu_a"], 700.0))
                                for rec in archive.records]))
        mu_d_T = float(np.mean([math.exp(min(rec["terminal"]["log_mu_d"], 700.0))
                                for rec in archive.records]))
        return cls(
            n=n,
            edge=EdgeDynParams(
                mu_bar_a=means["mu_bar_a"], mu_bar_d=means["mu_bar_d"],
                alpha1=means["alpha1"], beta1=means["beta1"],
                alpha2=means["alpha2"], beta2=means["beta2"],
                gamma1=means["gamma1"], gamma2=means["gamma2"],
            ),
            act=ActivenessParams(beta_es=means["beta_es"], w_init=w_init),
            garch=GarchParams(alpha=vec_mean("garch_alpha"), beta=vec_mean("garch_beta"),
                              sigma_bar2=vec_mean("sigma_bar2")),
            dcc=DccParams(a_c=means["a_c"], b_c=means["b_c"], r_bar=r_bar),
            g_T=Dag(n, [tuple(e) for e in term["g_edges"]]),
            a_T=int(term["a"]), d_T=int(term["d"]),
            mu_a_T=mu_a_T, mu_d_T=mu_d_T,
            w_T=vec_mean("w", field="terminal"),
            sigma2_T=vec_mean("sigma2", field="terminal"),
            sigma_T=vec_mean("sigma", field="terminal"),
            x_T=np.asarray(archive.header["data_tail"][-1], dtype=float),
            v_centered=float(archive.header["v_last"] - archive.header["v_bar"]),
        )


@dataclass
class PredictionBundle:
    """Per-path, per-horizon draws plus path-averaged forecasts."""

    returns: np.ndarray      # (L, H, n)
    sigmas: np.ndarray       # (L, H, n, n)
    density: np.ndarray      # (L, H)
    clustering: np.ndarray   # (L, H)
    graphs: list             # list (per path) of lists (per horizon) of Dag
    sigma_hat: np.ndarray    # (H, n, n)

    @property
    def n_paths(self) -> int:
        return self.returns.shape[0]

    @property
    def horizon(self) -> int:
        return self.returns.shape[1]


def _simulate_one_path(fit: FitSummary, horizon: int, rng: np.random.Generator, rho_bar):
    n = fit.n
    g = fit.g_T
    w = np.array(fit.w_T, dtype=float)
    w[-1] = 0.5
    log_mu_a = math.log(fit.mu_a_T)
    log_mu_d = math.log(fit.mu_d_T)
    a_prev, d_prev = fit.a_T, fit.d_T
    sigma2 = np.asarray(fit.sigma2_T, dtype=float)
    x_prev = fit.x_T
    dep: DependenceState | None = None
    prev2_sigma = fit.sigma_T
    x_prev2 = None

    returns = np.empty((horizon, n))
    sigmas = np.empty((horizon, n, n))
    density = np.empty(horizon)
    clustering = np.empty(horizon)
    graphs = []
    for h in range(1, horizon + 1):
        log_mu_a, log_mu_d = step_log_means(log_mu_a, log_mu_d, a_prev, d_prev,
                                            fit.v_centered, fit.edge)
        a_max = n * (n - 1) // 2 - g.edge_count
        d_max = g.edge_count
        a_t = _draw_truncated_poisson(math.exp(min(log_mu_a, 700.0)), a_max, rng)
        d_t = _draw_truncated_poisson(math.exp(min(log_mu_d, 700.0)), d_max, rng)
        w = step_activeness(w, sigma2, fit.act)
        g = evolve_network(g, a_t, d_t, w)
        if h == 1:
            # restart every conditional correlation at its long-run value
            sigma2 = garch_step(x_prev, sigma2, fit.garch)
            order = topological_order(g, sigma2)
            coords = derive_coords(g, order)
            rho = {coord_key(c): rho_bar(c) for c in coords}
            r = assemble_correlation(g, order, rho)
            dep = _finish_state(sigma2, CorrState(g, order, coords, rho, r, _vol_rank(sigma2)), None)
        else:
            dep = evolve_dependence(dep, prev2_sigma, x_prev, x_prev2, g,
                                    fit.garch, fit.dcc, rho_bar)
            prev2_sigma = sigmas[h - 2]
            sigma2 = dep.sigma2
        x_t = dep.chol @ rng.standard_normal(n)
        returns[h - 1] = x_t
        sigmas[h - 1] = dep.sigma
        stats = network_stats(g)
        density[h - 1] = stats.density
        clustering[h - 1] = stats.clustering
        graphs.append(g)
        a_prev, d_prev = a_t, d_t
        x_prev2 = x_prev
        x_prev = x_t
    return returns, sigmas, density, clustering, graphs


def predict_paths(
    fit: FitSummary,
    horizon: int,
    n_paths: int = 100,
    *,
    seed: int | np.random.Generator = 0,
) -> PredictionBundle:
    """Simulate ``n_paths`` forward trajectories and average their covariances.

    Paths get independent substreams derived from the master seed, so results
    are reproducible and paths could be generated concurrently. A path that
    fails numerically is dropped; fewer than half surviving is an error.
    """
    master = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    child_seeds = master.integers(0, 2**63 - 1, size=n_paths)
    rho_bar = make_rho_bar(fit.dcc.r_bar)
    kept = []
    for ell in range(n_paths):
        rng = np.random.default_rng(int(child_seeds[ell]))
        try:
            kept.append(_simulate_one_path(fit, horizon, rng, rho_bar))
        except NumericError:
            continue
    if len(kept) < (n_paths + 1) // 2:
        raise NumericError(f"only {len(kept)}/{n_paths} prediction paths survived")
    returns = np.stack([k[0] for k in kept])
    sigmas = np.stack([k[1] for k in kept])
    density = np.stack([k[2] for k in kept])
    clustering = np.stack([k[3] for k in kept])
    graphs = [k[4] for k in kept]
    return PredictionBundle(
        returns=returns, sigmas=sigmas, density=density, clustering=clustering,
        graphs=graphs, sigma_hat=sigmas.mean(axis=0),
    )


def min_variance_weights(sigma_hat: np.ndarray) -> np.ndarray:
    """Budget-constrained minimum-variance weights Sigma^{-1} 1 / (1' Sigma^{-1} 1)."""
    sigma_hat = np.asarray(sigma_hat, dtype=float)
    try:
        raw = np.linalg.solve(sigma_hat, np.ones(len(sigma_hat)))
    except np.linalg.LinAlgError as exc:
        raise NumericError("covariance forecast is singular") from exc
    return raw / raw.sum()


def risk_indicators(bundle: PredictionBundle, alpha: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-horizon risk summaries: mean density, mean clustering, and VaR.

    VaR at level ``alpha`` is the negative alpha-quantile (linear
    interpolation) of the per-path portfolio returns, each path using the
    minimum-variance weights of its own covariance.
    """
    nd_bar = bundle.density.mean(axis=0)
    cc_bar = bundle.clustering.mean(axis=0)
    horizon = bundle.horizon
    var_alpha = np.empty(horizon)
    for h in range(horizon):
        port = np.array([
            min_variance_weights(bundle.sigmas[ell, h]) @ bundle.returns[ell, h]
            for ell in range(bundle.n_paths)
        ])
        var_alpha[h] = -float(np.quantile(port, alpha))
    return nd_bar, cc_bar, var_alpha
