"""Posterior sampling for the full model.

One sweep updates, in order: the initial graph (multi-step single-edge
proposal), the count sequences (random-walk block move, then cyclic block
move), the long-run correlation matrix (parameter-extended MH through Wishart
proposals on covariance matrices), and eight blocks of continuous parameters
(robust adaptive Metropolis on transformed coordinates). The chain starts
from a moving-window sequence of score-optimized networks so the count
sequences begin near something data-supported.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.special import expit, multigammaln

from .covariance import DccParams, GarchParams, assemble_covariance
from .edgedyn import ActivenessParams, EdgeDynParams, randomwalk_element_ratio
from .errors import NumericError
from .graphs import Dag
from .posterior import LatentPath, ModelParams, PosteriorEvaluator, reconstruct_path

# ---------------------------------------------------------------------------
# BGe scoring and the moving-window network initializer
# ---------------------------------------------------------------------------


class BgeScorer:
    """Gaussian network score over one data window, with cached local terms.

    Marginal likelihoods of variable subsets come from the conjugate
    normal-Wishart family (prior mean zero, prior scale the identity,
    equivalent sample sizes ``alpha_mu`` for the mean and ``alpha_w = n + 2``
    for the precision). The node score given a parent set is the usual
    subset-marginal difference, so Markov-equivalent graphs score equally.
    """

    def __init__(self, data: np.ndarray, *, alpha_mu: float = 1.0, alpha_w: float | None = None):
        data = np.asarray(data, dtype=float)
        self.m, self.n = data.shape
        if self.m < 10:
            raise ValueError(f"need at least 10 rows to score, got {self.m}")
        self.alpha_mu = alpha_mu
        self.alpha_w = float(self.n + 2) if alpha_w is None else alpha_w
        xbar = data.mean(axis=0)
        centered = data - xbar
        scatter = centered.T @ centered
        shrink = self.m * alpha_mu / (self.m + alpha_mu)
        self._r_mat = np.eye(self.n) + scatter + shrink * np.outer(xbar, xbar)
        self._subset_cache: dict[frozenset, float] = {}
        self._local_cache: dict[tuple[int, frozenset], float] = {}

    def _log_subset_marginal(self, subset: frozenset) -> float:
        if not subset:
            return 0.0
        val = self._subset_cache.get(subset)
        if val is not None:
            return val
        idx = sorted(subset)
        ell = len(idx)
        m, aw, amu = self.m, self.alpha_w, self.alpha_mu
        sign, logdet_r = np.linalg.slogdet(self._r_mat[np.ix_(idx, idx)])
        if sign <= 0:
            raise NumericError(f"singular posterior scatter over columns {idx}")
        half_prior_df = 0.5 * (aw - self.n + ell)
        val = (
            -0.5 * ell * m * math.log(2.0 * math.pi)
            + 0.5 * ell * math.log(amu / (m + amu))
            + multigammaln(half_prior_df + 0.5 * m, ell)
            - multigammaln(half_prior_df, ell)
            - (half_prior_df + 0.5 * m) * logdet_r
        )
        self._subset_cache[subset] = val
        return val

    def local_score(self, node: int, parents: frozenset) -> float:
        key = (node, parents)
        val = self._local_cache.get(key)
        if val is None:
            val = self._log_subset_marginal(parents | {node}) - self._log_subset_marginal(parents)
            self._local_cache[key] = val
        return val

    def score(self, dag: Dag) -> float:
        return sum(self.local_score(v, frozenset(dag.parents(v))) for v in range(self.n))


def bge_score(data_window: np.ndarray, dag: Dag, *, alpha_mu: float = 1.0,
              alpha_w: float | None = None) -> float:
    """Decomposable Gaussian network score of ``dag`` on one data window."""
    return BgeScorer(data_window, alpha_mu=alpha_mu, alpha_w=alpha_w).score(dag)


def _hill_climb(scorer: BgeScorer, start: Dag, anchor: Dag | None, lam: float,
                max_moves: int) -> Dag:
    """First-improvement search over add/delete/reverse moves.

    Objective: BGe score minus ``lam`` times the adjacency distance to
    ``anchor`` (no anchor for the first window).
    """
    g = start
    locals_ = {v: scorer.local_score(v, frozenset(g.parents(v))) for v in range(g.n)}

    def penalty_delta(u, v, adding):
        # lam * (change in adjacency distance to the anchor)
        if anchor is None:
            return 0.0
        in_anchor = anchor.has_edge(u, v)
        if adding:
            return -lam if in_anchor else lam
        return lam if in_anchor else -lam

    for _ in range(max_moves):
        improved = False
        for u in range(g.n):
            for v in range(g.n):
                if u == v:
                    continue
                if g.has_edge(u, v):
                    # delete
                    new_pa = frozenset(g.parents(v)) - {u}
                    gain = scorer.local_score(v, new_pa) - locals_[v] - penalty_delta(u, v, adding=False)
                    if gain > 1e-9:
                        g = g.remove(u, v)
                        locals_[v] = scorer.local_score(v, new_pa)
                        improved = True
                        break
                    # reverse
                    stripped = g.remove(u, v)
                    if not stripped.creates_cycle(v, u):
                        pa_v = frozenset(stripped.parents(v))
                        pa_u = frozenset(stripped.parents(u)) | {v}
                        gain = (
                            scorer.local_score(v, pa_v) + scorer.local_score(u, pa_u)
                            - locals_[v] - locals_[u]
                            - penalty_delta(u, v, adding=False) - penalty_delta(v, u, adding=True)
                        )
                        if gain > 1e-9:
                            g = stripped.add(v, u)
                            locals_[v] = scorer.local_score(v, pa_v)
                            locals_[u] = scorer.local_score(u, pa_u)
                            improved = True
                            break
                elif not g.has_edge(v, u) and not g.creates_cycle(u, v):
                    new_pa = frozenset(g.parents(v)) | {u}
                    gain = scorer.local_score(v, new_pa) - locals_[v] - penalty_delta(u, v, adding=True)
                    if gain > 1e-9:
                        g = g.add(u, v)
                        locals_[v] = scorer.local_score(v, new_pa)
                        improved = True
                        break
            if improved:
                break
        if not improved:
            break
    return g


def initialize_networks(data: np.ndarray, *, window: int = 30, lam: float | None = None,
                        max_moves: int = 500, alpha_mu: float = 1.0) -> list[Dag]:
    """Moving-window sequence of score-optimized DAGs, smoothed by an edge-change penalty.

    Windows trail the current time point and are clamped at the series start,
    so every window holds exactly ``window`` rows. Each search warm-starts at
    the previous window's optimum, which the penalty also anchors.
    """
    data = np.asarray(data, dtype=float)
    T, n = data.shape
    if T < window:
        raise ValueError(f"need at least window={window} rows, got {T}")
    if lam is None:
        lam = 0.15 * n
    dags: list[Dag] = []
    g = Dag(n)
    scorer = None
    lo_prev = -1
    for t in range(1, T + 1):
        lo = max(0, t - window)
        if lo + window > T:
            lo = T - window
        if lo != lo_prev:
            scorer = BgeScorer(data[lo : lo + window], alpha_mu=alpha_mu)
            lo_prev = lo
        g = _hill_climb(scorer, g, dags[-1] if dags else None, lam, max_moves)
        dags.append(g)
    return dags


def counts_from_networks(dags: Sequence[Dag]) -> tuple[np.ndarray, np.ndarray]:
    """Raw added/deleted edge counts between consecutive networks."""
    a = np.zeros(len(dags) - 1, dtype=np.int64)
    d = np.zeros(len(dags) - 1, dtype=np.int64)
    for k in range(1, len(dags)):
        prev, cur = dags[k - 1].edges, dags[k].edges
        a[k - 1] = len(cur - prev)
        d[k - 1] = len(prev - cur)
    return a, d


# ---------------------------------------------------------------------------
# Structure and count proposals
# ---------------------------------------------------------------------------


def _valid_moves(g: Dag) -> list[tuple[str, int, int]]:
    moves = []
    for u in range(g.n):
        for v in range(g.n):
            if u == v:
                continue
            if g.has_edge(u, v):
                moves.append(("del", u, v))
                if not g.remove(u, v).creates_cycle(v, u):
                    moves.append(("rev", u, v))
            elif not g.has_edge(v, u) and not g.creates_cycle(u, v):
                moves.append(("add", u, v))
    return moves


def _apply_move(g: Dag, move: tuple[str, int, int]) -> Dag:
    kind, u, v = move
    if kind == "add":
        return g.add(u, v)
    if kind == "del":
        return g.remove(u, v)
    return g.reverse(u, v)


def multistep_structure_proposal(g: Dag, rng: np.random.Generator,
                                 max_steps: int = 5) -> tuple[Dag, float]:
    """Chain of M uniform single-edge moves, M ~ U{1..max_steps}.

    Returns the proposal and the log transition ratio
    log q(g|g') - log q(g'|g), which telescopes to the product of stepwise
    neighborhood-size ratios.
    """
    steps = int(rng.integers(1, max_steps + 1))
    cur = g
    moves = _valid_moves(cur)
    log_ratio = 0.0
    for _ in range(steps):
        if not moves:
            return g, 0.0
        mv = moves[int(rng.integers(len(moves)))]
        nxt = _apply_move(cur, mv)
        nxt_moves = _valid_moves(nxt)
        log_ratio += math.log(len(moves)) - math.log(len(nxt_moves))
        cur, moves = nxt, nxt_moves
    return cur, log_ratio


def randomwalk_move(a_counts: np.ndarray, d_counts: np.ndarray, rng: np.random.Generator,
                    *, max_block: int = 10) -> tuple[np.ndarray, np.ndarray, float, int]:
    """Local block move on both count sequences.

    Block size B ~ U{1..max_block}; per element, zero proposes from {0, 1}
    and positive values take a uniform {-1, 0, +1} step. Returns proposals,
    the summed log transition ratio, and the first changed array index.
    """
    horizon = len(a_counts)
    b = int(rng.integers(1, min(max_block, horizon) + 1))
    start = int(rng.integers(0, horizon - b + 1))
    a_new = a_counts.copy()
    d_new = d_counts.copy()
    log_ratio = 0.0
    for idx in range(start, start + b):
        for arr in (a_new, d_new):
            old = int(arr[idx])
            if old == 0:
                new = int(rng.integers(0, 2))
            else:
                new = old + int(rng.integers(-1, 2))
            arr[idx] = new
            log_ratio += math.log(randomwalk_element_ratio(old, new))
    return a_new, d_new, log_ratio, start


def cyclic_move(a_counts: np.ndarray, d_counts: np.ndarray, rng: np.random.Generator,
                *, max_block: int = 10) -> tuple[np.ndarray, np.ndarray, float, int]:
    """Joint rotation of a block of both count sequences; transition ratio 1."""
    horizon = len(a_counts)
    if horizon < 2:
        return a_counts.copy(), d_counts.copy(), 0.0, 0
    b = int(rng.integers(2, min(max_block, horizon) + 1))
    start = int(rng.integers(0, horizon - b + 1))
    shift = 1 if rng.random() < 0.5 else -1
    a_new = a_counts.copy()
    d_new = d_counts.copy()
    a_new[start : start + b] = np.roll(a_counts[start : start + b], shift)
    d_new[start : start + b] = np.roll(d_counts[start : start + b], shift)
    return a_new, d_new, 0.0, start


# ---------------------------------------------------------------------------
# PX-MH for the long-run correlation matrix
# ---------------------------------------------------------------------------


def wishart_logpdf(x: np.ndarray, df: float, scale: np.ndarray) -> float:
    """Log density of Wishart(df, scale) at x (hand-rolled closed form)."""
    n = x.shape[0]
    sign_x, logdet_x = np.linalg.slogdet(x)
    sign_v, logdet_v = np.linalg.slogdet(scale)
    if sign_x <= 0 or sign_v <= 0:
        return -math.inf
    trace_term = float(np.trace(np.linalg.solve(scale, x)))
    return (
        0.5 * (df - n - 1.0) * logdet_x
        - 0.5 * trace_term
        - 0.5 * df * n * math.log(2.0)
        - 0.5 * df * logdet_v
        - multigammaln(0.5 * df, n)
    )


def corr_scale_logpdf(r: np.ndarray, scales: np.ndarray, df: float, scale_mat: np.ndarray) -> float:
    """Joint log density of (R, D) induced by Sigma = D^{1/2} R D^{1/2} ~ Wishart.

    The change of variables contributes the Jacobian prod_i d_i^{(n-1)/2}.
    """
    n = len(scales)
    sigma = assemble_covariance(scales, r)
    return wishart_logpdf(sigma, df, scale_mat) + 0.5 * (n - 1) * float(np.log(scales).sum())


def _split_covariance(sigma: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d = np.diag(sigma).copy()
    s = np.sqrt(d)
    r = sigma / np.outer(s, s)
    np.fill_diagonal(r, 1.0)
    r = 0.5 * (r + r.T)
    return r, d


# ---------------------------------------------------------------------------
# Robust adaptive Metropolis
# ---------------------------------------------------------------------------


def ram_adapt(s: np.ndarray, u: np.ndarray, alpha: float, m: int,
              target: float = 0.234) -> np.ndarray:
    """Rank-one update of the proposal factor toward the target acceptance rate.

    Solves S' S'^T = S (I + eta_m (alpha - target) u u^T / |u|^2) S^T by
    Cholesky, with eta_m = m^{-2/3}. A failed factorization leaves S as is.
    """
    nrm = float(u @ u)
    if nrm == 0.0:
        return s
    eta = min(1.0, m ** (-2.0 / 3.0))
    mat = np.eye(len(u)) + (eta * (alpha - target) / nrm) * np.outer(u, u)
    try:
        return np.linalg.cholesky(s @ mat @ s.T)
    except np.linalg.LinAlgError:
        return s


def ram_step(
    log_target: Callable[[np.ndarray], float],
    x: np.ndarray,
    log_target_x: float,
    s: np.ndarray,
    m: int,
    rng: np.random.Generator,
    *,
    target: float = 0.234,
) -> tuple[np.ndarray, float, np.ndarray, float, bool]:
    """One RAM iteration on a generic log target.

    Returns (state, its log target, adapted S, acceptance probability,
    accepted flag). The accept/reject always runs; only the adaptation is
    skipped on factorization failure.
    """
    u = rng.standard_normal(len(x))
    proposal = x + s @ u
    lt_prop = log_target(proposal)
    if lt_prop - log_target_x >= 0:
        alpha = 1.0
    elif lt_prop == -math.inf:
        alpha = 0.0
    else:
        alpha = math.exp(lt_prop - log_target_x)
    accepted = rng.random() < alpha
    s_new = ram_adapt(s, u, alpha, m, target)
    if accepted:
        return proposal, lt_prop, s_new, alpha, True
    return x, log_target_x, s_new, alpha, False


# ---------------------------------------------------------------------------
# Parameter blocks (transformed coordinates + Jacobians)
# ---------------------------------------------------------------------------


def _logit_vec(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return np.log(p / (1.0 - p))


def _logit_log_jac(x: np.ndarray) -> float:
    # d(sigmoid)/dx = sigmoid(x) (1 - sigmoid(x)); stable via softplus
    x = np.asarray(x, dtype=float)
    return float(-(np.logaddexp(0.0, x) + np.logaddexp(0.0, -x)).sum())


@dataclass
class ParamBlock:
    name: str
    extract: Callable[[ModelParams], np.ndarray]
    inject: Callable[[ModelParams, np.ndarray], ModelParams]
    log_jac: Callable[[np.ndarray], float]


def make_blocks(n: int) -> list[ParamBlock]:
    """The eight sampling blocks with their transforms (logit/log/identity)."""

    def b_corr():
        return ParamBlock(
            "corr_loadings",
            lambda th: _logit_vec(np.array([th.dcc.a_c, th.dcc.b_c])),
            lambda th, x: replace(th, dcc=replace(th.dcc, a_c=float(expit(x[0])), b_c=float(expit(x[1])))),
            _logit_log_jac,
        )

    def b_intercepts():
        return ParamBlock(
            "count_intercepts",
            lambda th: np.log([th.edge.mu_bar_a, th.edge.mu_bar_d]),
            lambda th, x: replace(th, edge=replace(th.edge, mu_bar_a=float(np.exp(x[0])), mu_bar_d=float(np.exp(x[1])))),
            lambda x: float(np.sum(x)),
        )

    def b_slopes():
        return ParamBlock(
            "count_slopes",
            lambda th: _logit_vec(np.array([th.edge.alpha1, th.edge.beta1, th.edge.alpha2, th.edge.beta2])),
            lambda th, x: replace(th, edge=replace(
                th.edge,
                alpha1=float(expit(x[0])), beta1=float(expit(x[1])),
                alpha2=float(expit(x[2])), beta2=float(expit(x[3])),
            )),
            _logit_log_jac,
        )

    def b_exog():
        return ParamBlock(
            "count_exogenous",
            lambda th: np.array([th.edge.gamma1, th.edge.gamma2]),
            lambda th, x: replace(th, edge=replace(th.edge, gamma1=float(x[0]), gamma2=float(x[1]))),
            lambda x: 0.0,
        )

    def b_act_weight():
        return ParamBlock(
            "activeness_weight",
            lambda th: _logit_vec(np.array([th.act.beta_es])),
            lambda th, x: replace(th, act=replace(th.act, beta_es=float(expit(x[0])))),
            _logit_log_jac,
        )

    def b_garch_slopes():
        def inject(th, x):
            return replace(th, garch=replace(
                th.garch, alpha=expit(x[:n]).copy(), beta=expit(x[n:]).copy(),
            ))
        return ParamBlock(
            "garch_slopes",
            lambda th: _logit_vec(np.concatenate([th.garch.alpha, th.garch.beta])),
            inject,
            _logit_log_jac,
        )

    def b_garch_levels():
        return ParamBlock(
            "garch_levels",
            lambda th: np.log(th.garch.sigma_bar2),
            lambda th, x: replace(th, garch=replace(th.garch, sigma_bar2=np.exp(x))),
            lambda x: float(np.sum(x)),
        )

    def b_act_init():
        def inject(th, x):
            w = np.empty(n)
            w[: n - 1] = expit(x)
            w[n - 1] = 0.5
            return replace(th, act=replace(th.act, w_init=w))
        return ParamBlock(
            "activeness_init",
            lambda th: _logit_vec(th.act.w_init[: n - 1]),
            inject,
            _logit_log_jac,
        )

    return [b_corr(), b_intercepts(), b_slopes(), b_exog(), b_act_weight(),
            b_garch_slopes(), b_garch_levels(), b_act_init()]


# ---------------------------------------------------------------------------
# Chain orchestration
# ---------------------------------------------------------------------------


@dataclass
class SamplerConfig:
    iterations: int = 2000
    burn_in: int | None = None  # default: iterations // 2
    thinning: int = 10
    target_accept: float = 0.234
    max_block: int = 10
    multistep_max: int = 5
    walk_moves: int = 1    # random-walk count moves per sweep
    cyclic_moves: int = 1  # cyclic count moves per sweep
    init_window: int = 30
    init_lambda: float | None = None  # default: 0.15 * n, inside [n/10, n/5]
    init_max_moves: int = 500
    ram_scale: float = 0.1
    wishart_dof_init: float | None = None  # default: 4 * (n + 2)
    bge_alpha_mu: float = 1.0

    def resolved_burn_in(self) -> int:
        return self.iterations // 2 if self.burn_in is None else self.burn_in

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations, "burn_in": self.resolved_burn_in(),
            "thinning": self.thinning, "target_accept": self.target_accept,
            "max_block": self.max_block, "multistep_max": self.multistep_max,
            "walk_moves": self.walk_moves, "cyclic_moves": self.cyclic_moves,
            "init_window": self.init_window, "init_lambda": self.init_lambda,
            "init_max_moves": self.init_max_moves, "ram_scale": self.ram_scale,
            "wishart_dof_init": self.wishart_dof_init, "bge_alpha_mu": self.bge_alpha_mu,
        }


@dataclass
class RamState:
    s: np.ndarray
    m: int = 1
    proposed: int = 0
    accepted: int = 0


@dataclass
class ChainState:
    theta: ModelParams
    path: LatentPath
    log_post: float
    ram: dict[str, RamState]
    pxmh_scales: np.ndarray
    pxmh_dof: float
    pxmh_m: int = 1
    sweep: int = 0


def _edge_hash(g: Dag) -> int:
    payload = ";".join(f"{u},{v}" for u, v in sorted(g.edges))
    return zlib.crc32(payload.encode())


def _theta_record(theta: ModelParams) -> dict:
    return {
        "a_c": theta.dcc.a_c, "b_c": theta.dcc.b_c,
        "mu_bar_a": theta.edge.mu_bar_a, "mu_bar_d": theta.edge.mu_bar_d,
        "alpha1": theta.edge.alpha1, "beta1": theta.edge.beta1,
        "alpha2": theta.edge.alpha2, "beta2": theta.edge.beta2,
        "gamma1": theta.edge.gamma1, "gamma2": theta.edge.gamma2,
        "beta_es": theta.act.beta_es,
        "w_init": np.asarray(theta.act.w_init, dtype=float).tolist(),
        "garch_alpha": np.asarray(theta.garch.alpha, dtype=float).tolist(),
        "garch_beta": np.asarray(theta.garch.beta, dtype=float).tolist(),
        "sigma_bar2": np.asarray(theta.garch.sigma_bar2, dtype=float).tolist(),
        "r_bar": np.asarray(theta.dcc.r_bar, dtype=float).tolist(),
    }


SCALAR_PARAMS = ("a_c", "b_c", "mu_bar_a", "mu_bar_d", "alpha1", "beta1",
                 "alpha2", "beta2", "gamma1", "gamma2", "beta_es")


@dataclass
class SampleArchive:
    """Retained post-burn-in samples plus everything prediction needs."""

    header: dict
    records: list[dict] = field(default_factory=list)
    edge_freq: np.ndarray | None = None
    accept_stats: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.header["n"]

    @property
    def T(self) -> int:
        return self.header["T"]

    def scalar_samples(self, name: str) -> np.ndarray:
        return np.array([rec["params"][name] for rec in self.records])

    def posterior_mean(self, name: str) -> float:
        return float(self.scalar_samples(name).mean())

    def credible_interval(self, name: str, level: float = 0.95) -> tuple[float, float]:
        samples = self.scalar_samples(name)
        lo = 100.0 * (1.0 - level) / 2.0
        return (float(np.percentile(samples, lo)), float(np.percentile(samples, 100.0 - lo)))

    def map_record(self) -> dict:
        return max(self.records, key=lambda rec: rec["log_post"])


def default_start_params(data: np.ndarray, g1: Dag, a_counts: np.ndarray,
                         d_counts: np.ndarray) -> ModelParams:
    """Feasible, data-informed starting point for the chain."""
    n = data.shape[1]
    sample_corr = np.corrcoef(data, rowvar=False)
    r0 = 0.9 * sample_corr + 0.1 * np.eye(n)
    np.fill_diagonal(r0, 1.0)
    rate_a = max(float(np.mean(a_counts)), 0.02)
    rate_d = max(float(np.mean(d_counts)), 0.02)
    w0 = np.full(n, 0.5)
    return ModelParams(
        g1=g1,
        a_counts=np.asarray(a_counts, dtype=np.int64),
        d_counts=np.asarray(d_counts, dtype=np.int64),
        edge=EdgeDynParams(mu_bar_a=rate_a, mu_bar_d=rate_d, alpha1=0.05, beta1=0.6,
                           alpha2=0.05, beta2=0.6, gamma1=0.0, gamma2=0.0),
        act=ActivenessParams(beta_es=0.3, w_init=w0),
        garch=GarchParams(alpha=np.full(n, 0.05), beta=np.full(n, 0.8),
                          sigma_bar2=data.var(axis=0, ddof=1)),
        dcc=DccParams(a_c=0.05, b_c=0.8, r_bar=r0),
    )


def initial_chain_state(data: np.ndarray, vol_index: np.ndarray, config: SamplerConfig,
                        evaluator: PosteriorEvaluator,
                        theta0: ModelParams | None = None) -> ChainState:
    n = data.shape[1]
    if theta0 is None:
        dags = initialize_networks(
            data, window=config.init_window, lam=config.init_lambda,
            max_moves=config.init_max_moves, alpha_mu=config.bge_alpha_mu,
        )
        a_raw, d_raw = counts_from_networks(dags)
        theta0 = default_start_params(data, dags[0], a_raw, d_raw)
        # clamp the raw counts to the caps realized along the path
        probe = reconstruct_path(theta0, data, vol_index)
        theta0 = theta0.with_counts(
            np.array([s.a for s in probe.states[1:]], dtype=np.int64),
            np.array([s.d for s in probe.states[1:]], dtype=np.int64),
        )
    lp, path = evaluator.evaluate(theta0)
    if not math.isfinite(lp):
        raise NumericError("initial chain state has zero posterior density")
    ram = {blk.name: RamState(s=config.ram_scale * np.eye(len(blk.extract(theta0))))
           for blk in make_blocks(n)}
    dof = config.wishart_dof_init if config.wishart_dof_init is not None else 4.0 * (n + 2)
    return ChainState(theta=theta0, path=path, log_post=lp, ram=ram,
                      pxmh_scales=np.ones(n), pxmh_dof=float(dof))


def _accept(rng: np.random.Generator, log_alpha: float) -> tuple[bool, float]:
    if log_alpha >= 0:
        return True, 1.0
    if log_alpha == -math.inf:
        return False, 0.0
    alpha = math.exp(log_alpha)
    return rng.random() < alpha, alpha


def structure_update(chain: ChainState, evaluator: PosteriorEvaluator,
                     rng: np.random.Generator, *, max_steps: int = 5) -> bool:
    g_prop, log_tr = multistep_structure_proposal(chain.theta.g1, rng, max_steps)
    if g_prop == chain.theta.g1:
        return True
    theta_prop = replace(chain.theta, g1=g_prop)
    lp, path = evaluator.evaluate(theta_prop)
    ok, _ = _accept(rng, lp - chain.log_post + log_tr)
    if ok:
        chain.theta, chain.path, chain.log_post = theta_prop, path, lp
    return ok


def counts_update(chain: ChainState, evaluator: PosteriorEvaluator,
                  rng: np.random.Generator, *, kind: str, max_block: int = 10) -> bool:
    theta = chain.theta
    if kind == "walk":
        a_new, d_new, log_tr, start = randomwalk_move(theta.a_counts, theta.d_counts,
                                                      rng, max_block=max_block)
    else:
        a_new, d_new, log_tr, start = cyclic_move(theta.a_counts, theta.d_counts,
                                                  rng, max_block=max_block)
    theta_prop = theta.with_counts(a_new, d_new)
    lp, path = evaluator.evaluate(theta_prop, base=chain.path, from_t=start + 2)
    ok, _ = _accept(rng, lp - chain.log_post + log_tr)
    if ok:
        chain.theta, chain.path, chain.log_post = theta_prop, path, lp
    return ok


def pxmh_update(chain: ChainState, evaluator: PosteriorEvaluator,
                rng: np.random.Generator, *, target: float = 0.234) -> bool:
    from scipy.stats import wishart

    theta = chain.theta
    n = theta.n
    r_cur = theta.dcc.r_bar
    d_cur = chain.pxmh_scales
    sigma_cur = assemble_covariance(d_cur, r_cur)
    dof = chain.pxmh_dof
    sigma_prop = None
    for _ in range(5):
        draw = wishart.rvs(df=dof, scale=sigma_cur / dof, random_state=rng)
        if np.linalg.slogdet(draw)[0] > 0:
            sigma_prop = draw
            break
    if sigma_prop is None:
        raise NumericError("Wishart proposal degenerate after 5 draws")
    r_prop, d_prop = _split_covariance(sigma_prop)

    theta_prop = replace(theta, dcc=replace(theta.dcc, r_bar=r_prop))
    lp, path = evaluator.evaluate(theta_prop)
    log_fwd = corr_scale_logpdf(r_prop, d_prop, dof, sigma_cur / dof)
    log_bwd = corr_scale_logpdf(r_cur, d_cur, dof, sigma_prop / dof)
    ok, alpha = _accept(rng, (lp - chain.log_post) + (log_bwd - log_fwd))
    if ok:
        chain.theta, chain.path, chain.log_post = theta_prop, path, lp
        chain.pxmh_scales = d_prop
    # drive the proposal spread toward the target acceptance rate: Var ~ 1/dof,
    # so rejection-heavy phases must INCREASE the degrees of freedom
    eta = min(1.0, chain.pxmh_m ** (-2.0 / 3.0))
    new_dof = math.exp(math.log(dof) + eta * (target - alpha))
    chain.pxmh_dof = max(new_dof, n + 2.0 + 1e-6)
    chain.pxmh_m += 1
    return ok


def ram_block_update(chain: ChainState, block: ParamBlock, evaluator: PosteriorEvaluator,
                     rng: np.random.Generator, *, target: float = 0.234) -> bool:
    theta = chain.theta
    state = chain.ram[block.name]
    x = block.extract(theta)
    u = rng.standard_normal(len(x))
    x_prop = x + state.s @ u
    theta_prop = block.inject(theta, x_prop)
    lp, path = evaluator.evaluate(theta_prop)
    log_alpha = (lp + block.log_jac(x_prop)) - (chain.log_post + block.log_jac(x))
    ok, alpha = _accept(rng, log_alpha)
    if ok:
        chain.theta, chain.path, chain.log_post = theta_prop, path, lp
    state.s = ram_adapt(state.s, u, alpha, state.m, target)
    state.m += 1
    state.proposed += 1
    state.accepted += int(ok)
    return ok


def build_archive_header(config: SamplerConfig, data: np.ndarray, vol_index: np.ndarray,
                         seed) -> dict:
    """Everything prediction needs to restart from the archive alone."""
    data = np.asarray(data, dtype=float)
    vol_index = np.asarray(vol_index, dtype=float)
    return {
        "schema": 1,
        "n": data.shape[1],
        "T": len(data),
        "seed": None if isinstance(seed, np.random.Generator) else int(seed),
        "config": config.to_dict(),
        "v_bar": float(vol_index.mean()),
        "v_last": float(vol_index[-1]),
        "data_tail": data[-2:].tolist(),
    }


def run_chain(
    config: SamplerConfig,
    data: np.ndarray,
    vol_index: np.ndarray,
    *,
    theta0: ModelParams | None = None,
    seed: int | np.random.Generator = 0,
    on_record: Callable[[dict], None] | None = None,
) -> SampleArchive:
    """Run the full sampler and return the thinned post-burn-in archive.

    ``on_record`` is called with each retained record as it is produced, so a
    caller can stream records to an append-only file; if the chain aborts on
    a numerical failure, everything recorded so far has already been handed
    over (checkpoint semantics).
    """
    data = np.asarray(data, dtype=float)
    vol_index = np.asarray(vol_index, dtype=float)
    T, n = data.shape
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    evaluator = PosteriorEvaluator(data, vol_index)
    chain = initial_chain_state(data, vol_index, config, evaluator, theta0)
    blocks = make_blocks(n)

    burn_in = config.resolved_burn_in()
    archive = SampleArchive(header=build_archive_header(config, data, vol_index, seed))
    edge_freq = np.zeros((T, n, n))
    counters = {"structure": [0, 0], "walk": [0, 0], "cyclic": [0, 0], "pxmh": [0, 0]}

    def bump(name, ok):
        counters[name][0] += 1
        counters[name][1] += int(ok)

    for sweep in range(1, config.iterations + 1):
        bump("structure", structure_update(chain, evaluator, rng, max_steps=config.multistep_max))
        for _ in range(config.walk_moves):
            bump("walk", counts_update(chain, evaluator, rng, kind="walk", max_block=config.max_block))
        for _ in range(config.cyclic_moves):
            bump("cyclic", counts_update(chain, evaluator, rng, kind="cyclic", max_block=config.max_block))
        bump("pxmh", pxmh_update(chain, evaluator, rng, target=config.target_accept))
        for block in blocks:
            ram_block_update(chain, block, evaluator, rng, target=config.target_accept)
        chain.sweep = sweep
        if sweep > burn_in and (sweep - burn_in) % config.thinning == 0:
            record = _make_record(chain)
            archive.records.append(record)
            if on_record is not None:
                on_record(record)
            for state in chain.path.states:
                for u, v in state.g.edges:
                    edge_freq[state.t - 1, u, v] += 1.0

    n_rec = max(len(archive.records), 1)
    archive.edge_freq = edge_freq / n_rec
    archive.accept_stats = {
        name: {"proposed": c[0], "accepted": c[1]} for name, c in counters.items()
    }
    archive.accept_stats["ram"] = {
        blk.name: {"proposed": chain.ram[blk.name].proposed,
                   "accepted": chain.ram[blk.name].accepted}
        for blk in blocks
    }
    return archive


def _make_record(chain: ChainState) -> dict:
    theta = chain.theta
    last = chain.path.states[-1]
    return {
        "sweep": chain.sweep,
        "log_post": chain.log_post,
        "params": _theta_record(theta),
        "a_counts": theta.a_counts.tolist(),
        "d_counts": theta.d_counts.tolist(),
        "g1_edges": sorted(theta.g1.edges),
        "g_hashes": [_edge_hash(s.g) for s in chain.path.states],
        "terminal": {
            "a": int(last.a), "d": int(last.d),
            "log_mu_a": last.log_mu_a, "log_mu_d": last.log_mu_d,
            "w": last.w.tolist(),
            "sigma2": last.dep.sigma2.tolist(),
            "g_edges": sorted(last.g.edges),
            "sigma": last.dep.sigma.tolist(),
        },
    }
