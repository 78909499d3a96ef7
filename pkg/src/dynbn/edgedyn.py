"""Edge-change dynamics: Poisson counts, node activeness, and edge selection.

The number of edges added (a_t) and deleted (d_t) each day follow conditional
Poisson laws whose log-means run GARCH-like recursions driven by yesterday's
counts and a centered exogenous index:

    log mu_t^a = (1 - a1 - b1) log mu_bar_a + a1 log mu_{t-1}^a + b1 a_{t-1} + g1 (v_{t-1} - v_bar)

(and symmetrically for deletions). Counts are truncated at the structural
caps, with all tail mass collapsed onto the cap. Which edges change is decided
by node activeness w_{i,t} in (0,1), evolved on the logit scale by an EWMA of
relative volatility; pair activeness is the product w_i * w_j. Deletion takes
the d_t existing edges with the smallest pair activeness; addition walks the
remaining candidates by descending pair activeness, skipping any insertion
that would close a directed cycle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammainc

from .errors import NumericError
from .graphs import Dag


@dataclass(frozen=True)
class EdgeDynParams:
    """Parameters of the addition/deletion mean recursions."""

    mu_bar_a: float
    mu_bar_d: float
    alpha1: float
    beta1: float
    alpha2: float
    beta2: float
    gamma1: float
    gamma2: float

    def feasible(self, *, strict_beta: bool = False) -> bool:
        """Stationarity region; ``strict_beta`` adds the sampling restriction beta > 0.5."""
        ok = (
            self.mu_bar_a > 0
            and self.mu_bar_d > 0
            and min(self.alpha1, self.beta1, self.alpha2, self.beta2) >= 0
            and self.alpha1 + self.beta1 < 1
            and self.alpha2 + self.beta2 < 1
        )
        if strict_beta:
            ok = ok and self.beta1 > 0.5 and self.beta2 > 0.5
        return ok


@dataclass(frozen=True)
class ActivenessParams:
    """EWMA weight and initial activeness levels (last node pinned at 0.5)."""

    beta_es: float
    w_init: np.ndarray

    def feasible(self) -> bool:
        w = np.asarray(self.w_init, dtype=float)
        return (
            0.0 <= self.beta_es <= 1.0
            and bool(np.all((w > 0.0) & (w < 1.0)))
            and w[-1] == 0.5
        )


@dataclass
class EdgeChangeState:
    """Mean/count state of the edge-change process at one time step.

    Means are carried in log space: the recursion is linear there, so even
    proposals that push counts very high stay finite.
    """

    log_mu_a: float
    log_mu_d: float
    a: int
    d: int
    t: int

    @property
    def mu_a(self) -> float:
        return math.exp(self.log_mu_a) if self.log_mu_a < 700.0 else math.inf

    @property
    def mu_d(self) -> float:
        return math.exp(self.log_mu_d) if self.log_mu_d < 700.0 else math.inf


def step_log_means(
    log_mu_a_prev: float,
    log_mu_d_prev: float,
    a_prev: int,
    d_prev: int,
    v_prev_centered: float,
    p: EdgeDynParams,
) -> tuple[float, float]:
    """One step of the log-mean recursions (inputs from time t-1)."""
    la = (
        (1.0 - p.alpha1 - p.beta1) * math.log(p.mu_bar_a)
        + p.alpha1 * log_mu_a_prev
        + p.beta1 * a_prev
        + p.gamma1 * v_prev_centered
    )
    ld = (
        (1.0 - p.alpha2 - p.beta2) * math.log(p.mu_bar_d)
        + p.alpha2 * log_mu_d_prev
        + p.beta2 * d_prev
        + p.gamma2 * v_prev_centered
    )
    if math.isnan(la) or math.isnan(ld):
        raise NumericError(f"edge-change mean recursion produced NaN at inputs "
                           f"log_mu=({log_mu_a_prev}, {log_mu_d_prev}), counts=({a_prev}, {d_prev})")
    return la, ld


def step_means(
    prev: EdgeChangeState | None,
    v_prev_centered: float,
    p: EdgeDynParams,
) -> tuple[float, float]:
    """Conditional Poisson means (mu_t^a, mu_t^d); ``prev=None`` gives the t=1 values."""
    if prev is None:
        return p.mu_bar_a, p.mu_bar_d
    la, ld = step_log_means(prev.log_mu_a, prev.log_mu_d, prev.a, prev.d, v_prev_centered, p)
    return math.exp(la), math.exp(ld)


# Log-mean ceiling beyond which exp() would overflow; the truncated pmf then
# takes its exact limit (all mass at the cap).
_LOG_MU_HUGE = 700.0


def _poisson_logpmf(k: int, mu: float) -> float:
    if mu <= 0.0:
        raise ValueError(f"mu must be positive, got {mu}")
    return k * math.log(mu) - mu - math.lgamma(k + 1)


def truncated_poisson_logpmf(k: int, mu: float, kmax: int) -> float:
    """Log pmf of a Poisson(mu) with all mass at >= kmax collapsed onto kmax."""
    if k < 0 or k > kmax:
        raise ValueError(f"k={k} outside support 0..{kmax}")
    if kmax == 0:
        return 0.0
    if mu > 0 and math.log(mu) > _LOG_MU_HUGE:
        # limit of the pmf as mu -> inf: unit mass at the cap
        return 0.0 if k == kmax else -math.inf
    if k < kmax:
        return _poisson_logpmf(k, mu)
    # upper tail P(X >= kmax) = lower regularized gamma P(kmax, mu)
    tail = float(gammainc(kmax, mu))
    if tail > 1e-300:
        return math.log(tail)
    # series fallback when the tail underflows (mu << kmax); terms decay
    # at least geometrically with ratio mu/(kmax+1)
    terms = [_poisson_logpmf(kmax + j, mu) for j in range(80)]
    m = max(terms)
    if m == -math.inf:
        return -math.inf
    return m + math.log(sum(math.exp(x - m) for x in terms))


def _logit(w: np.ndarray) -> np.ndarray:
    return np.log(w / (1.0 - w))


def step_activeness(w_prev: np.ndarray, sigma2_prev: np.ndarray, p: ActivenessParams) -> np.ndarray:
    """EWMA update of node activeness; the last node is the fixed 0.5 reference."""
    w_prev = np.asarray(w_prev, dtype=float)
    if w_prev.min() <= 0.0 or w_prev.max() >= 1.0:
        raise NumericError(f"activeness left (0,1): {w_prev}")
    drive = np.asarray(sigma2_prev, dtype=float) - sigma2_prev[-1]
    x = (1.0 - p.beta_es) * _logit(w_prev) + p.beta_es * drive
    w = 1.0 / (1.0 + np.exp(-x))
    w[-1] = 0.5  # reference node: drive is identically 0 and logit(0.5)=0
    return w


def pair_activeness(w_i: float, w_j: float) -> float:
    return w_i * w_j


def build_deletion_list(g: Dag, w: Sequence[float]) -> list[tuple[int, int, float]]:
    """Existing edges as (u, v, w_uv), ascending by pair activeness."""
    rows = [(u, v, pair_activeness(w[u], w[v])) for u, v in g.edges]
    rows.sort(key=lambda r: (r[2], w[r[0]], r[0], r[1]))
    return rows


def build_addition_list(
    g_after_delete: Dag,
    w: Sequence[float],
    forbidden: Iterable[tuple[int, int]] = (),
) -> list[tuple[int, int, float]]:
    """Candidate directed edges as (u, v, w_uv), descending by pair activeness.

    Both orientations of every unconnected pair are listed, except directed
    edges removed in the same step (``forbidden``): a deleted edge cannot be
    added back, but its reversal stays available. Within a pair, the
    orientation leaving the more active node comes first.
    """
    banned = set(forbidden)
    rows: list[tuple[int, int, float]] = []
    n = g_after_delete.n
    for i in range(n):
        for j in range(i + 1, n):
            if g_after_delete.has_edge(i, j) or g_after_delete.has_edge(j, i):
                continue
            w_ij = pair_activeness(w[i], w[j])
            for u, v in ((i, j), (j, i)):
                if (u, v) not in banned:
                    rows.append((u, v, w_ij))
    rows.sort(key=lambda r: (-r[2], -max(w[r[0]], w[r[1]]), -w[r[0]], r[0], r[1]))
    return rows


def evolution_trace(
    g_prev: Dag, a: int, d: int, w: Sequence[float]
) -> tuple[list[tuple[int, int]], list[tuple[int, int]], Dag]:
    """Run one deletion+addition step, returning (deleted, added, result).

    Deletion happens first: the d edges with the smallest pair activeness go.
    Addition then walks the candidate list in order, skipping edges whose
    insertion would close a cycle (the acyclicity check runs against the
    current graph after every insertion, so the reverse of a just-added edge
    is skipped automatically).
    """
    if d > g_prev.edge_count:
        raise ValueError(f"d={d} exceeds edge count {g_prev.edge_count}")
    deleted = [(u, v) for u, v, _ in build_deletion_list(g_prev, w)[:d]]
    edges = set(g_prev.edges)
    edges.difference_update(deleted)
    g = Dag(g_prev.n, edges, _checked=True) if d else g_prev

    a_cap = g_prev.n * (g_prev.n - 1) // 2 - g_prev.edge_count
    if a > a_cap:
        raise ValueError(f"a={a} exceeds addable pair count {a_cap}")
    added: list[tuple[int, int]] = []
    if a:
        for u, v, _ in build_addition_list(g, w, forbidden=deleted):
            if g.has_edge(u, v) or g.has_edge(v, u) or g.creates_cycle(u, v):
                continue
            g = Dag(g.n, g.edges | {(u, v)}, _checked=True)
            added.append((u, v))
            if len(added) == a:
                break
        if len(added) < a:
            raise NumericError(f"could only add {len(added)} of {a} edges")
    return deleted, added, g


def evolve_network(g_prev: Dag, a: int, d: int, w: Sequence[float]) -> Dag:
    """Evolve a network by deleting d edges and then adding a edges."""
    if a == 0 and d == 0:
        return g_prev
    return evolution_trace(g_prev, a, d, w)[2]


# -- random-walk count kernel (shared with the sampler and its tests) ---------

def randomwalk_proposal_pmf(x: int) -> dict[int, Fraction]:
    """Exact proposal distribution of the single-count random-walk kernel."""
    if x == 0:
        return {0: Fraction(1, 2), 1: Fraction(1, 2)}
    return {x - 1: Fraction(1, 3), x: Fraction(1, 3), x + 1: Fraction(1, 3)}


def randomwalk_element_ratio(old: int, new: int) -> Fraction:
    """Exact transition-probability ratio q(old|new) / q(new|old) for one count."""
    fwd = randomwalk_proposal_pmf(old).get(new, Fraction(0))
    if fwd == 0:
        return Fraction(0)
    bwd = randomwalk_proposal_pmf(new).get(old, Fraction(0))
    return bwd / fwd
