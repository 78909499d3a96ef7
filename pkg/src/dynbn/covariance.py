"""GARCH volatilities, graph-indexed conditional correlations, and assembly.

Marginal variances follow per-stock GARCH(1,1) recursions. The dependence
side is parametrized by one conditional correlation per (node, parent slot)
of the current graph,

    rho_{i, p_k | p_{k-1}, ..., p_1},

with parents ordered by a volatility-resolved topological order. Each such
coordinate follows DCC dynamics toward its long-run value (a partial
correlation extracted from the long-run correlation matrix via precision
submatrices). The full correlation matrix is recovered by the classic
partial-correlation recursion

    rho_{ij|z_-k} = rho_{ij|z} * sqrt[(1 - rho_{i z_k|z_-k}^2)(1 - rho_{j z_k|z_-k}^2)]
                    + rho_{i z_k|z_-k} * rho_{j z_k|z_-k},

using that a node is conditionally uncorrelated with its non-parent
predecessors given its parents. Every matrix assembled this way is positive
definite as long as the stored partials stay strictly inside (-1, 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import NumericError
from .graphs import Dag, topological_order

# Numerical floor keeping partial correlations strictly interior.
PARTIAL_EPS = 1e-8

Coord = tuple[int, int, tuple[int, ...]]  # (node, parent, ordered conditioning set)
CoordKey = tuple[int, int, frozenset]


def coord_key(coord: Coord) -> CoordKey:
    i, j, z = coord
    return (i, j, frozenset(z))


@dataclass(frozen=True)
class GarchParams:
    """Per-stock GARCH(1,1) parameters as aligned vectors."""

    alpha: np.ndarray
    beta: np.ndarray
    sigma_bar2: np.ndarray

    def feasible(self) -> bool:
        a = np.asarray(self.alpha, dtype=float)
        b = np.asarray(self.beta, dtype=float)
        s = np.asarray(self.sigma_bar2, dtype=float)
        return bool(np.all(a >= 0) and np.all(b >= 0) and np.all(a + b < 1) and np.all(s > 0))


@dataclass(frozen=True)
class DccParams:
    """Correlation dynamics: loadings, long-run matrix, resampling window."""

    a_c: float
    b_c: float
    r_bar: np.ndarray
    m_c: int = 2

    def feasible(self) -> bool:
        if not (self.a_c >= 0 and self.b_c >= 0 and self.a_c + self.b_c < 1):
            return False
        r = np.asarray(self.r_bar, dtype=float)
        if not np.allclose(np.diag(r), 1.0) or not np.allclose(r, r.T):
            return False
        try:
            np.linalg.cholesky(r)
        except np.linalg.LinAlgError:
            return False
        return True


def garch_step(x_prev: np.ndarray, sigma2_prev: np.ndarray, p: GarchParams) -> np.ndarray:
    """sigma2_t = (1 - a - b) sigma_bar2 + a x_{t-1}^2 + b sigma2_{t-1}."""
    return (1.0 - p.alpha - p.beta) * p.sigma_bar2 + p.alpha * np.square(x_prev) + p.beta * sigma2_prev


def _clamp(rho: float) -> float:
    hi = 1.0 - PARTIAL_EPS
    return hi if rho > hi else (-hi if rho < -hi else rho)


def long_run_partial(r_bar: np.ndarray, i: int, j: int, z: Sequence[int]) -> float:
    """Partial correlation of (i, j) given z, from the precision of the submatrix."""
    if i == j:
        raise ValueError("i and j must differ")
    if i in z or j in z:
        raise ValueError("conditioning set must exclude i and j")
    if not z:
        return _clamp(float(r_bar[i, j]))
    idx = [i, j, *z]
    sub = np.asarray(r_bar, dtype=float)[np.ix_(idx, idx)]
    try:
        prec = np.linalg.inv(sub)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"singular correlation submatrix over {idx}") from exc
    return _clamp(float(-prec[0, 1] / math.sqrt(prec[0, 0] * prec[1, 1])))


def condition_partial(rho_ij: float, rho_ik: float, rho_jk: float) -> float:
    """Add one conditioning variable k: rho_{ij|k} from pairwise (partial) correlations."""
    den = math.sqrt((1.0 - rho_ik * rho_ik) * (1.0 - rho_jk * rho_jk))
    return (rho_ij - rho_ik * rho_jk) / den


def decondition_partial(rho_ij_k: float, rho_ik: float, rho_jk: float) -> float:
    """Remove the conditioning variable k (inverse of :func:`condition_partial`)."""
    return rho_ij_k * math.sqrt((1.0 - rho_ik * rho_ik) * (1.0 - rho_jk * rho_jk)) + rho_ik * rho_jk


def partial_corr_recursive(r: np.ndarray, i: int, j: int, z: Sequence[int]) -> float:
    """Partial correlation via the recursion only (independent of the precision route)."""
    if not z:
        return float(r[i, j])
    z = list(z)
    k = z[-1]
    rest = z[:-1]
    return condition_partial(
        partial_corr_recursive(r, i, j, rest),
        partial_corr_recursive(r, i, k, rest),
        partial_corr_recursive(r, j, k, rest),
    )


def sample_partial_corr(
    returns: np.ndarray,
    covs: Sequence[np.ndarray],
    i: int,
    j: int,
    z: Sequence[int],
) -> float:
    """Uncentered sample correlation of regression residuals over an m_c-day window.

    ``returns[tau]`` is the return row at day t-1-tau and ``covs[tau]`` the
    model covariance at the same day, from which the regression coefficients
    of i (and j) on the conditioning set are taken. A zero residual norm is
    degenerate and yields 0. Conditioning sets of size 1 and 2 use closed-form
    regression coefficients (this runs once per coordinate per time step).
    """
    z = tuple(z)
    kz = len(z)
    num = 0.0
    ss_i = 0.0
    ss_j = 0.0
    for row, sig in zip(returns, covs):
        xi = float(row[i])
        xj = float(row[j])
        if kz == 0:
            ri, rj = xi, xj
        elif kz == 1:
            z0 = z[0]
            inv = 1.0 / float(sig[z0, z0])
            xz = float(row[z0])
            ri = xi - float(sig[z0, i]) * inv * xz
            rj = xj - float(sig[z0, j]) * inv * xz
        elif kz == 2:
            za, zb = z
            saa = float(sig[za, za])
            sbb = float(sig[zb, zb])
            sab = float(sig[za, zb])
            det = saa * sbb - sab * sab
            xa = float(row[za])
            xb = float(row[zb])
            sai, sbi = float(sig[za, i]), float(sig[zb, i])
            saj, sbj = float(sig[za, j]), float(sig[zb, j])
            ri = xi - ((sbb * sai - sab * sbi) * xa + (saa * sbi - sab * sai) * xb) / det
            rj = xj - ((sbb * saj - sab * sbj) * xa + (saa * sbj - sab * saj) * xb) / det
        else:
            zl = list(z)
            beta = np.linalg.solve(sig[np.ix_(zl, zl)], sig[np.ix_(zl, [i, j])])
            xz = row[zl]
            ri = xi - float(beta[:, 0] @ xz)
            rj = xj - float(beta[:, 1] @ xz)
        num += ri * rj
        ss_i += ri * ri
        ss_j += rj * rj
    den = math.sqrt(ss_i * ss_j)
    if den == 0.0:
        return 0.0
    return max(-1.0, min(1.0, num / den))


def dcc_step(rho_prev: float, xi: float, rho_bar: float, p: DccParams) -> float:
    """rho_t = (1 - a - b) rho_bar + a xi_{t-1} + b rho_{t-1}."""
    return (1.0 - p.a_c - p.b_c) * rho_bar + p.a_c * xi + p.b_c * rho_prev


def derive_coords(dag: Dag, order: Sequence[int]) -> tuple[Coord, ...]:
    """Conditional-correlation coordinates required by a graph under an ordering."""
    pos = {v: k for k, v in enumerate(order)}
    coords: list[Coord] = []
    for v in order:
        parents = sorted(dag.parents(v), key=pos.__getitem__)
        for k, pk in enumerate(parents):
            coords.append((v, pk, tuple(parents[:k])))
    return tuple(coords)


def assemble_correlation(
    dag: Dag,
    order: Sequence[int],
    partials: dict[CoordKey, float],
) -> np.ndarray:
    """Full correlation matrix from per-(node, parent-slot) conditional correlations.

    Nodes are processed along ``order``. For each node, the nested partials
    with its parents are deconditioned down to plain correlations; every
    correlation with an earlier non-parent then follows from the regression
    on the parents alone (zero partial given the parents).
    """
    n = dag.n
    pos = {v: k for k, v in enumerate(order)}
    r = np.eye(n)
    for m, v in enumerate(order):
        parents = sorted(dag.parents(v), key=pos.__getitem__)
        kk = len(parents)
        if kk == 0:
            continue
        c = []
        for k, pk in enumerate(parents):
            val = float(partials[(v, pk, frozenset(parents[:k]))])
            if not -1.0 < val < 1.0:
                raise NumericError(f"conditional correlation {val} outside (-1,1) at node {v}")
            c.append(_clamp(val))
        # partial correlations among the parents, conditioned level by level
        base = [[float(r[pa, pb]) for pb in parents] for pa in parents]
        levels = [base]
        for jj in range(1, kk):
            prev = levels[-1]
            cur = [row[:] for row in prev]
            for a in range(jj, kk):
                pa_j = prev[a][jj - 1]
                for b in range(jj, kk):
                    if a != b:
                        cur[a][b] = condition_partial(prev[a][b], pa_j, prev[b][jj - 1])
            levels.append(cur)
        # decondition the nested column down to unconditional correlations
        uncond = [0.0] * kk
        for k in range(kk):
            val = c[k]
            for jj in range(k - 1, -1, -1):
                val = decondition_partial(val, c[jj], levels[jj][k][jj])
            uncond[k] = val
        for k, pk in enumerate(parents):
            r[v, pk] = r[pk, v] = uncond[k]
        # correlations with earlier non-parents via the parent regression
        others = [q for q in order[:m] if q not in dag.parents(v)]
        if others:
            if kk == 1:
                beta = np.array([uncond[0]])
            elif kk == 2:
                r01 = base[0][1]
                det = 1.0 - r01 * r01
                beta = np.array([(uncond[0] - r01 * uncond[1]) / det,
                                 (uncond[1] - r01 * uncond[0]) / det])
            else:
                beta = np.linalg.solve(np.asarray(base), np.asarray(uncond))
            vals = beta @ r[np.ix_(parents, others)]
            r[v, others] = vals
            r[others, v] = vals
    return r


def assemble_covariance(sigma2: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Sigma = D^{1/2} R D^{1/2} with D = diag(sigma2)."""
    s = np.sqrt(np.asarray(sigma2, dtype=float))
    return r * np.outer(s, s)


# -- one dependence step (GARCH + DCC + assembly) -----------------------------

class CorrState:
    """Correlation side of the state at one time step."""

    __slots__ = ("graph", "order", "coords", "rho", "r", "vol_rank")

    def __init__(self, graph: Dag, order: tuple[int, ...], coords: tuple[Coord, ...],
                 rho: dict[CoordKey, float], r: np.ndarray, vol_rank: tuple[int, ...]):
        self.graph = graph
        self.order = order
        self.coords = coords
        self.rho = rho
        self.r = r
        self.vol_rank = vol_rank


def _vol_rank(sigma2: np.ndarray) -> tuple[int, ...]:
    # node indices by descending volatility, index-ascending on ties; the
    # topological order is a deterministic function of (graph, this ranking)
    return tuple(np.argsort(-sigma2, kind="stable").tolist())


class DependenceState:
    """Variances, conditional correlations, covariance and its Cholesky factor."""

    __slots__ = ("sigma2", "corr", "sigma", "chol")

    def __init__(self, sigma2: np.ndarray, corr: CorrState, sigma: np.ndarray, chol: np.ndarray):
        self.sigma2 = sigma2
        self.corr = corr
        self.sigma = sigma
        self.chol = chol


def _finish_state(sigma2: np.ndarray, corr: CorrState, prev: DependenceState | None) -> DependenceState:
    if prev is not None and corr.r is prev.corr.r and np.array_equal(sigma2, prev.sigma2):
        return DependenceState(sigma2, corr, prev.sigma, prev.chol)
    sigma = assemble_covariance(sigma2, corr.r)
    try:
        chol = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as exc:
        raise NumericError("covariance matrix not positive definite") from exc
    return DependenceState(sigma2, corr, sigma, chol)


def initial_dependence(
    g1: Dag,
    garch_p: GarchParams,
    dcc_p: DccParams,
    rho_bar: Callable[[Coord], float],
) -> DependenceState:
    """State at t=1: long-run variances and long-run conditional correlations."""
    sigma2 = np.array(garch_p.sigma_bar2, dtype=float)
    order = topological_order(g1, sigma2)
    coords = derive_coords(g1, order)
    rho = {coord_key(c): rho_bar(c) for c in coords}
    r = assemble_correlation(g1, order, rho)
    return _finish_state(sigma2, CorrState(g1, order, coords, rho, r, _vol_rank(sigma2)), None)


def evolve_dependence(
    prev: DependenceState,
    prev2_sigma: np.ndarray | None,
    x_prev: np.ndarray,
    x_prev2: np.ndarray | None,
    g_t: Dag,
    garch_p: GarchParams,
    dcc_p: DccParams,
    rho_bar: Callable[[Coord], float],
) -> DependenceState:
    """Advance variances and correlations one step under the new graph.

    ``x_prev2``/``prev2_sigma`` are None at t=2, where the sample conditional
    correlation is replaced by its long-run initialization. Coordinates whose
    (node, parent, conditioning-set) identity existed at t-1 carry their value
    over; newborn coordinates start at the long-run value.
    """
    sigma2 = garch_step(x_prev, prev.sigma2, garch_p)
    rank = _vol_rank(sigma2)
    if g_t is prev.corr.graph and rank == prev.corr.vol_rank:
        order = prev.corr.order
        coords = prev.corr.coords
    else:
        order = topological_order(g_t, sigma2)
        coords = derive_coords(g_t, order)

    a_c = dcc_p.a_c
    prev_rho = prev.corr.rho
    rho: dict[CoordKey, float] = {}
    window = covs = None
    if a_c != 0.0 and x_prev2 is not None and coords:
        window = (x_prev, x_prev2)
        covs = (prev.sigma, prev2_sigma)
    for c in coords:
        key = coord_key(c)
        bar = rho_bar(c)
        r_prev = prev_rho.get(key, bar)
        if a_c == 0.0:
            xi = 0.0
        elif window is None:
            xi = bar
        else:
            xi = sample_partial_corr(window, covs, c[0], c[1], c[2])
        rho[key] = _clamp(dcc_step(r_prev, xi, bar, dcc_p))

    if coords is prev.corr.coords and rho == prev_rho:
        corr = CorrState(g_t, order, coords, rho, prev.corr.r, rank)
    else:
        corr = CorrState(g_t, order, coords, rho, assemble_correlation(g_t, order, rho), rank)
    return _finish_state(sigma2, corr, prev)
