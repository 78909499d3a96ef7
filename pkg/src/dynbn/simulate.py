"""Generative simulation of returns, networks, and latent truth."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .covariance import DccParams, GarchParams
from .edgedyn import ActivenessParams, EdgeDynParams
from .graphs import Dag
from .posterior import (
    LatentPath,
    ModelParams,
    _attach_loglik,
    _complete_step,
    _initial_step,
    _pre_step,
    make_rho_bar,
)


@dataclass
class SimulationTruth:
    """Generating parameters (with the drawn counts) and the realized latent path."""

    theta: ModelParams
    path: LatentPath
    vol_index: np.ndarray


def default_vol_index(T: int, rng: np.random.Generator, *, level: float = 20.0,
                      phi: float = 0.95, scale: float = 1.0) -> np.ndarray:
    """Stationary AR(1) stand-in for a market volatility index."""
    v = np.empty(T)
    x = rng.standard_normal() * scale / math.sqrt(1.0 - phi * phi)
    for t in range(T):
        v[t] = level + x
        x = phi * x + scale * rng.standard_normal()
    return v


def random_dag(n: int, n_edges: int, rng: np.random.Generator) -> Dag:
    """Uniform-ish DAG: random node order, random forward edges."""
    perm = rng.permutation(n)
    pairs = [(int(perm[i]), int(perm[j])) for i in range(n) for j in range(i + 1, n)]
    if n_edges > len(pairs):
        raise ValueError(f"at most {len(pairs)} edges on {n} nodes")
    idx = rng.choice(len(pairs), size=n_edges, replace=False)
    return Dag(n, [pairs[k] for k in idx], _checked=True)


def random_correlation(n: int, rng: np.random.Generator, *, strength: float = 0.5) -> np.ndarray:
    """Random PD correlation matrix with off-diagonal mass controlled by ``strength``.

    One dominant factor plus two weak ones (an equity-like pattern): with the
    default strength, typical off-diagonals land around 0.2-0.5.
    """
    lam = math.sqrt(strength) * rng.uniform(0.6, 1.0, size=n)
    weak = 0.3 * math.sqrt(strength) * rng.standard_normal((n, 2))
    s = np.outer(lam, lam) + weak @ weak.T
    s += np.diag(np.maximum(1.0 - np.diag(s), 0.05))
    d = np.sqrt(np.diag(s))
    r = s / np.outer(d, d)
    np.fill_diagonal(r, 1.0)
    return r


def demo_params(n: int, rng: np.random.Generator, *, n_edges: int | None = None) -> ModelParams:
    """A feasible generating parameter set in the empirically plausible range."""
    if n_edges is None:
        n_edges = n
    w_init = np.clip(rng.uniform(0.3, 0.7, size=n), 0.05, 0.95)
    w_init[-1] = 0.5
    return ModelParams(
        g1=random_dag(n, n_edges, rng),
        a_counts=None,
        d_counts=None,
        edge=EdgeDynParams(mu_bar_a=0.05, mu_bar_d=0.05, alpha1=0.05, beta1=0.6,
                           alpha2=0.05, beta2=0.6, gamma1=0.05, gamma2=-0.05),
        act=ActivenessParams(beta_es=0.4, w_init=w_init),
        garch=GarchParams(alpha=np.full(n, 0.05), beta=np.full(n, 0.85),
                          sigma_bar2=np.full(n, 1.0)),
        dcc=DccParams(a_c=0.06, b_c=0.87, r_bar=random_correlation(n, rng)),
    )


def _draw_truncated_poisson(mu: float, kmax: int, rng: np.random.Generator) -> int:
    if kmax == 0:
        return 0
    if not math.isfinite(mu) or mu > 1e12:
        return kmax
    return min(int(rng.poisson(mu)), kmax)


def simulate_dataset(
    theta: ModelParams,
    T: int,
    rng: np.random.Generator,
    vol_index: np.ndarray | None = None,
) -> tuple[np.ndarray, SimulationTruth]:
    """Draw a full dataset from the model.

    Counts are drawn from the truncated Poisson laws at the evolving means,
    the network and dependence state advance exactly as in path
    reconstruction, and returns are N(0, Sigma_t). The returned truth carries
    the drawn counts, so reconstructing with ``truth.theta`` reproduces
    ``truth.path`` value for value.
    """
    n = theta.n
    if vol_index is None:
        vol_index = default_vol_index(T, rng)
    vol_index = np.asarray(vol_index, dtype=float)
    if len(vol_index) != T:
        raise ValueError(f"volatility index must have length {T}")
    vol_c = vol_index - vol_index.mean()
    rho_bar = make_rho_bar(theta.dcc.r_bar)

    states = [_initial_step(theta, rho_bar)]
    data = np.empty((T, n))
    data[0] = states[0].dep.chol @ rng.standard_normal(n)
    a_counts = np.zeros(T - 1, dtype=np.int64)
    d_counts = np.zeros(T - 1, dtype=np.int64)
    for t in range(2, T + 1):
        prev = states[t - 2]
        pre = _pre_step(theta, prev, float(vol_c[t - 2]))
        _, log_mu_a, log_mu_d, a_max, d_max = pre
        a_t = _draw_truncated_poisson(math.exp(min(log_mu_a, 700.0)), a_max, rng)
        d_t = _draw_truncated_poisson(math.exp(min(log_mu_d, 700.0)), d_max, rng)
        a_counts[t - 2] = a_t
        d_counts[t - 2] = d_t
        prev2_sigma = states[t - 3].dep.sigma if t >= 3 else None
        x_prev2 = data[t - 3] if t >= 3 else None
        state = _complete_step(theta, prev, prev2_sigma, t, pre, a_t, d_t, False,
                               data[t - 2], x_prev2, rho_bar)
        states.append(state)
        data[t - 1] = state.dep.chol @ rng.standard_normal(n)
    _attach_loglik(states, data, from_t=1)
    theta_full = theta.with_counts(a_counts, d_counts)
    return data, SimulationTruth(theta=theta_full, path=LatentPath(states), vol_index=vol_index)
