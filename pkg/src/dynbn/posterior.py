"""Latent-path reconstruction and the joint log-posterior.

Given the full parameter set (initial graph, edge-change counts, dynamics
coefficients, long-run correlation matrix), the entire latent path --
networks, activeness, Poisson means, variances, conditional correlations,
covariances -- is a deterministic function of the observed returns and the
exogenous volatility index. The log-posterior is then

    log prior + sum_t log N(x_t; 0, Sigma_t)
              + sum_{t>=2} [log P(a_t | mu_t^a, cap) + log P(d_t | mu_t^d, cap)]

with flat priors over the feasible region. Reconstruction supports prefix
reuse: a proposal that only touches counts from time tau onward recomputes
states from tau, sharing the untouched prefix objects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.linalg import solve_triangular

from .covariance import (
    Coord,
    DccParams,
    GarchParams,
    coord_key,
    evolve_dependence,
    initial_dependence,
    long_run_partial,
)
from .edgedyn import (
    ActivenessParams,
    EdgeDynParams,
    evolve_network,
    step_activeness,
    step_log_means,
    truncated_poisson_logpmf,
)
from .errors import NumericError
from .graphs import Dag

_LOG_2PI = math.log(2.0 * math.pi)


def _safe_exp(x: float) -> float:
    return math.exp(x) if x < 700.0 else math.inf


@dataclass
class ModelParams:
    """Everything the sampler moves: structure, counts, and dynamics parameters.

    ``a_counts[k]``/``d_counts[k]`` are the numbers of edges added/deleted at
    time t = k + 2 (there are no changes at t = 1). They may be None for
    purely generative parameter sets fed to the simulator.
    """

    g1: Dag
    a_counts: np.ndarray | None
    d_counts: np.ndarray | None
    edge: EdgeDynParams
    act: ActivenessParams
    garch: GarchParams
    dcc: DccParams

    @property
    def n(self) -> int:
        return self.g1.n

    def with_counts(self, a_counts: np.ndarray, d_counts: np.ndarray) -> "ModelParams":
        return replace(self, a_counts=np.asarray(a_counts, dtype=np.int64),
                       d_counts=np.asarray(d_counts, dtype=np.int64))


class StepState:
    """Latent state at one time step (immutable once the likelihood is attached)."""

    __slots__ = ("t", "g", "log_mu_a", "log_mu_d", "a", "d", "a_max", "d_max",
                 "w", "dep", "count_logp", "cap_violation", "loglik")

    def __init__(self, t, g, log_mu_a, log_mu_d, a, d, a_max, d_max, w, dep,
                 count_logp, cap_violation):
        self.t = t
        self.g = g
        self.log_mu_a = log_mu_a
        self.log_mu_d = log_mu_d
        self.a = a
        self.d = d
        self.a_max = a_max
        self.d_max = d_max
        self.w = w
        self.dep = dep
        self.count_logp = count_logp
        self.cap_violation = cap_violation
        self.loglik = None

    @property
    def mu_a(self) -> float:
        return _safe_exp(self.log_mu_a)

    @property
    def mu_d(self) -> float:
        return _safe_exp(self.log_mu_d)


class LatentPath:
    """Deterministic latent trajectory for one parameter set."""

    def __init__(self, states: list[StepState]):
        self.states = states

    @property
    def T(self) -> int:
        return len(self.states)

    def state(self, t: int) -> StepState:
        return self.states[t - 1]

    @property
    def feasible(self) -> bool:
        return not any(s.cap_violation for s in self.states)

    @property
    def loglik_total(self) -> float:
        return sum(s.loglik for s in self.states)

    @property
    def count_logp_total(self) -> float:
        return sum(s.count_logp for s in self.states)


def make_rho_bar(r_bar: np.ndarray, cache: dict | None = None) -> Callable[[Coord], float]:
    """Memoized lookup of long-run partial correlations for coordinate requests."""
    store = {} if cache is None else cache

    def rho_bar(coord: Coord) -> float:
        key = coord_key(coord)
        val = store.get(key)
        if val is None:
            val = long_run_partial(r_bar, coord[0], coord[1], coord[2])
            store[key] = val
        return val

    return rho_bar


def _initial_step(theta: ModelParams, rho_bar) -> StepState:
    w1 = np.array(theta.act.w_init, dtype=float)
    dep = initial_dependence(theta.g1, theta.garch, theta.dcc, rho_bar)
    return StepState(
        t=1, g=theta.g1,
        log_mu_a=math.log(theta.edge.mu_bar_a), log_mu_d=math.log(theta.edge.mu_bar_d),
        a=0, d=0, a_max=None, d_max=None, w=w1, dep=dep,
        count_logp=0.0, cap_violation=False,
    )


def _pre_step(theta: ModelParams, prev: StepState, v_prev_c: float):
    """Quantities at time t that depend only on the t-1 state: w, log-means, caps."""
    w = step_activeness(prev.w, prev.dep.sigma2, theta.act)
    log_mu_a, log_mu_d = step_log_means(
        prev.log_mu_a, prev.log_mu_d, prev.a, prev.d, v_prev_c, theta.edge
    )
    n = prev.g.n
    a_max = n * (n - 1) // 2 - prev.g.edge_count
    d_max = prev.g.edge_count
    return w, log_mu_a, log_mu_d, a_max, d_max


def _complete_step(theta, prev, prev2_sigma, t, pre, a_t, d_t, cap_violation,
                   x_prev, x_prev2, rho_bar) -> StepState:
    w, log_mu_a, log_mu_d, a_max, d_max = pre
    try:
        g_t = evolve_network(prev.g, a_t, d_t, w)
        dep = evolve_dependence(prev.dep, prev2_sigma, x_prev, x_prev2, g_t,
                                theta.garch, theta.dcc, rho_bar)
    except NumericError as exc:
        raise NumericError(f"t={t}: {exc}") from exc
    count_logp = (
        truncated_poisson_logpmf(a_t, _safe_exp(log_mu_a), a_max)
        + truncated_poisson_logpmf(d_t, _safe_exp(log_mu_d), d_max)
    )
    return StepState(t=t, g=g_t, log_mu_a=log_mu_a, log_mu_d=log_mu_d,
                     a=a_t, d=d_t, a_max=a_max, d_max=d_max, w=w, dep=dep,
                     count_logp=count_logp, cap_violation=cap_violation)


def _gauss_loglik_small(chol: np.ndarray, x: np.ndarray, n: int) -> float:
    # forward substitution beats a LAPACK call below ~10 dimensions
    y = [0.0] * n
    quad = 0.0
    logdet = 0.0
    for a in range(n):
        row = chol[a]
        s = float(x[a])
        for b in range(a):
            s -= float(row[b]) * y[b]
        la = float(row[a])
        ya = s / la
        y[a] = ya
        quad += ya * ya
        logdet += math.log(la)
    return -0.5 * n * _LOG_2PI - logdet - 0.5 * quad


def _attach_loglik(states: list[StepState], data: np.ndarray, from_t: int) -> None:
    """Fill per-step Gaussian log-densities, batching runs that share a Cholesky factor."""
    n = data.shape[1]
    t = from_t
    while t <= len(states):
        chol = states[t - 1].dep.chol
        t_end = t
        while t_end + 1 <= len(states) and states[t_end].dep.chol is chol:
            t_end += 1
        if t_end == t and n <= 10:
            states[t - 1].loglik = _gauss_loglik_small(chol, data[t - 1], n)
        else:
            block = data[t - 1 : t_end]
            y = solve_triangular(chol, block.T, lower=True, check_finite=False)
            quad = np.einsum("ij,ij->j", y, y)
            logdet = float(np.log(np.diag(chol)).sum())
            lls = -0.5 * n * _LOG_2PI - logdet - 0.5 * quad
            for k, tt in enumerate(range(t, t_end + 1)):
                states[tt - 1].loglik = float(lls[k])
        t = t_end + 1


def reconstruct_path(
    theta: ModelParams,
    data: np.ndarray,
    vol_index: np.ndarray,
    *,
    base: LatentPath | None = None,
    from_t: int | None = None,
    rho_bar: Callable[[Coord], float] | None = None,
) -> LatentPath:
    """Deterministically rebuild the latent path for ``theta`` on this data.

    Counts above their structural caps are clamped (the posterior later treats
    the violation as infeasible). With ``base``/``from_t``, states before
    ``from_t`` are shared with ``base`` instead of recomputed; callers are
    responsible for only doing this when the inputs up to ``from_t`` agree.
    """
    data = np.asarray(data, dtype=float)
    T, n = data.shape
    if theta.a_counts is None or theta.d_counts is None:
        raise ValueError("ModelParams.a_counts/d_counts must be set for reconstruction")
    if len(theta.a_counts) != T - 1 or len(theta.d_counts) != T - 1:
        raise ValueError(f"count sequences must have length T-1={T - 1}")
    if theta.n != n:
        raise ValueError(f"graph has {theta.n} nodes but data has {n} columns")
    vol_index = np.asarray(vol_index, dtype=float)
    vol_c = vol_index - vol_index.mean()
    if rho_bar is None:
        rho_bar = make_rho_bar(theta.dcc.r_bar)

    if base is None or from_t is None or from_t <= 1:
        states = [_initial_step(theta, rho_bar)]
        start = 2
        attach_from = 1
    else:
        states = list(base.states[: from_t - 1])
        start = from_t
        attach_from = from_t
    for t in range(start, T + 1):
        prev = states[t - 2]
        pre = _pre_step(theta, prev, float(vol_c[t - 2]))
        a_req = int(theta.a_counts[t - 2])
        d_req = int(theta.d_counts[t - 2])
        a_max, d_max = pre[3], pre[4]
        violation = a_req > a_max or d_req > d_max or a_req < 0 or d_req < 0
        a_t = min(max(a_req, 0), a_max)
        d_t = min(max(d_req, 0), d_max)
        prev2_sigma = states[t - 3].dep.sigma if t >= 3 else None
        x_prev2 = data[t - 3] if t >= 3 else None
        states.append(
            _complete_step(theta, prev, prev2_sigma, t, pre, a_t, d_t, violation,
                           data[t - 2], x_prev2, rho_bar)
        )
    _attach_loglik(states, data, from_t=attach_from)
    return LatentPath(states)


def log_likelihood(data: np.ndarray, path: LatentPath) -> float:
    """Sum of multivariate-normal log densities along a reconstructed path."""
    if len(path.states) != len(data):
        raise ValueError("path length does not match data")
    return path.loglik_total


def log_prior(theta: ModelParams) -> float:
    """Flat prior: 0 inside the feasible region, -inf outside.

    Feasibility covers positivity of the intercepts and long-run variances,
    the stationarity constraints (with beta1, beta2 > 0.5 as used in
    sampling), activeness levels interior to (0,1) with the reference node at
    0.5, a positive-definite unit-diagonal long-run correlation matrix, an
    acyclic initial graph, and non-negative counts.
    """
    if not isinstance(theta.g1, Dag):
        return -math.inf
    if not theta.edge.feasible(strict_beta=True):
        return -math.inf
    if not theta.act.feasible():
        return -math.inf
    if not theta.garch.feasible():
        return -math.inf
    if not theta.dcc.feasible():
        return -math.inf
    for seq in (theta.a_counts, theta.d_counts):
        if seq is not None and np.any(np.asarray(seq) < 0):
            return -math.inf
    return 0.0


def log_posterior(theta: ModelParams, data: np.ndarray, vol_index: np.ndarray) -> float:
    value, _ = log_posterior_with_path(theta, data, vol_index)
    return value


def log_posterior_with_path(
    theta: ModelParams,
    data: np.ndarray,
    vol_index: np.ndarray,
    *,
    base: LatentPath | None = None,
    from_t: int | None = None,
    rho_bar: Callable[[Coord], float] | None = None,
) -> tuple[float, LatentPath | None]:
    lp = log_prior(theta)
    if lp == -math.inf:
        return -math.inf, None
    path = reconstruct_path(theta, data, vol_index, base=base, from_t=from_t, rho_bar=rho_bar)
    if not path.feasible:
        return -math.inf, path
    return lp + path.loglik_total + path.count_logp_total, path


class PosteriorEvaluator:
    """Caches shared work (centered index, long-run partials) across proposals."""

    def __init__(self, data: np.ndarray, vol_index: np.ndarray):
        self.data = np.asarray(data, dtype=float)
        self.vol_index = np.asarray(vol_index, dtype=float)
        if len(self.vol_index) != len(self.data):
            raise ValueError("volatility index length must match the return series")
        self._rbar_ref: np.ndarray | None = None
        self._rbar_partials: dict = {}

    @property
    def T(self) -> int:
        return len(self.data)

    @property
    def n(self) -> int:
        return self.data.shape[1]

    def _rho_bar_for(self, r_bar: np.ndarray):
        if r_bar is not self._rbar_ref:
            self._rbar_ref = r_bar
            self._rbar_partials = {}
        return make_rho_bar(r_bar, self._rbar_partials)

    def evaluate(
        self,
        theta: ModelParams,
        *,
        base: LatentPath | None = None,
        from_t: int | None = None,
    ) -> tuple[float, LatentPath | None]:
        return log_posterior_with_path(
            theta, self.data, self.vol_index,
            base=base, from_t=from_t, rho_bar=self._rho_bar_for(theta.dcc.r_bar),
        )
