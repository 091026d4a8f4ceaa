"""Distances between matrices, block models, and degree distributions.

Exact modes enumerate (subsets for the cut norm, permutations for the
relabeling distances) under hard size gates; above the gates the heuristics
return explicitly one-sided bounds, and every public result says which side
it is on.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .common import (
    DegenerateError,
    Estimate,
    ParameterError,
    SearchBudget,
    SizeError,
    substream,
)
from .graphon import BlockModel, Graphon, StepGraphon
from .sampling import as_matrix

CUT_EXACT_MAX_N = 24
PERM_EXACT_MAX_N = 9
_CHUNK = 1 << 16


def matrix_lp(A, p: float) -> float:
    """Normalized matrix L^p norm: (n^-2 sum |a_ij|^p)^(1/p)."""
    if p < 1:
        raise ParameterError("p must be >= 1")
    m = as_matrix(A)
    return float((np.abs(m) ** p).mean() ** (1.0 / p))


# ---------------------------------------------------------------------------
# cut norm
# ---------------------------------------------------------------------------


def _best_t_for_colsums(c: np.ndarray) -> tuple[float, np.ndarray]:
    """Greedy inner maximization: best |sum over S x T| for fixed column sums c."""
    pos = c[c > 0].sum()
    neg = -c[c < 0].sum()
    if pos >= neg:
        return float(pos), np.flatnonzero(c > 0)
    return float(neg), np.flatnonzero(c < 0)


def cut_norm_exact(A, exact_threshold: int = CUT_EXACT_MAX_N):
    """Exact cut norm max_{S,T} n^-2 |sum_{S x T} A_ij| with a maximizing pair.

    Enumerates all 2^n row subsets S; for fixed S, the maximizing T is read off
    the signs of the column sums, so the inner loop is linear.
    """
    m = as_matrix(A)
    n = m.shape[0]
    if n > exact_threshold:
        raise SizeError(
            f"exact cut norm is gated at n <= {exact_threshold} (got {n}); "
            "use cut_norm_lower")
    best = 0.0
    best_s = np.array([], dtype=int)
    best_t = np.array([], dtype=int)
    bits = np.arange(n, dtype=np.uint64)
    for start in range(0, 1 << n, _CHUNK):
        masks = np.arange(start, min(start + _CHUNK, 1 << n), dtype=np.uint64)
        ind = ((masks[:, None] >> bits[None, :]) & 1).astype(float)
        colsums = ind @ m
        pos = np.where(colsums > 0, colsums, 0.0).sum(axis=1)
        neg = -np.where(colsums < 0, colsums, 0.0).sum(axis=1)
        vals = np.maximum(pos, neg)
        i = int(np.argmax(vals))
        if vals[i] > best + 1e-15:
            best = float(vals[i])
            _, t = _best_t_for_colsums(colsums[i])
            best_s = np.flatnonzero(ind[i])
            best_t = t
    return best / n**2, best_s, best_t


def cut_norm_lower(A, budget: SearchBudget = SearchBudget(), seed: int = 0):
    """Heuristic feasible lower bound on the cut norm via alternating greedy ascent."""
    m = as_matrix(A)
    n = m.shape[0]
    rng = substream(seed, "cut_lower")
    best = 0.0
    best_s = np.array([], dtype=int)
    best_t = np.array([], dtype=int)

    def ascend(s: np.ndarray):
        nonlocal best, best_s, best_t
        s = s.astype(bool)
        val = -1.0
        for _ in range(budget.iterations):
            c = s @ m
            new_val, t_idx = _best_t_for_colsums(c)
            t = np.zeros(n, dtype=bool)
            t[t_idx] = True
            r = m @ t
            sign = 1.0 if (c[t] if t.any() else c).sum() >= 0 else -1.0
            s_new = (sign * r) > 0
            cand = abs(float(s_new @ m @ t))
            if cand <= val + 1e-15:
                break
            s, val = s_new, cand
        if val > best + 1e-15:
            best = val
            best_s = np.flatnonzero(s)
            c = s @ m
            _, best_t = _best_t_for_colsums(c)

    ascend(np.ones(n, dtype=bool))
    rowsum = m.sum(axis=1)
    ascend(rowsum > 0)
    ascend(rowsum < 0)
    for _ in range(budget.restarts):
        ascend(rng.random(n) < 0.5)
    return best / n**2, best_s, best_t


def cut_norm(A, budget: SearchBudget = SearchBudget(), seed: int = 0,
             exact_threshold: int = CUT_EXACT_MAX_N) -> float:
    """Exact cut norm when the size gate allows it, heuristic lower bound otherwise."""
    m = as_matrix(A)
    if m.shape[0] <= exact_threshold:
        return cut_norm_exact(A, exact_threshold)[0]
    return cut_norm_lower(A, budget, seed)[0]


# ---------------------------------------------------------------------------
# permutation-invariant distances between matrices
# ---------------------------------------------------------------------------


def _apply_perm(m: np.ndarray, s: np.ndarray) -> np.ndarray:
    return m[np.ix_(s, s)]


def _degree_sorted_alignment(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Permutation mapping degree-ranked vertices of A onto those of B."""
    n = a.shape[0]
    order_a = np.lexsort((np.arange(n), a.sum(axis=1)))
    order_b = np.lexsort((np.arange(n), b.sum(axis=1)))
    s = np.empty(n, dtype=int)
    s[order_b] = order_a
    return s


def _perm_search(objective, n: int, mode: str, budget: SearchBudget, seed: int,
                 init: np.ndarray):
    """Minimize objective(sigma) over permutations: exhaustive or swap local search."""
    if mode == "exact":
        if n > PERM_EXACT_MAX_N:
            raise SizeError(
                f"exact permutation search is gated at n <= {PERM_EXACT_MAX_N} (got {n})")
        best_v = math.inf
        best_s = None
        for perm in itertools.permutations(range(n)):
            v = objective(np.asarray(perm))
            if v < best_v - 1e-15:
                best_v = v
                best_s = np.asarray(perm)
        return best_v, best_s
    if mode != "heuristic":
        raise ParameterError("mode must be 'exact' or 'heuristic'")
    rng = substream(seed, "perm_search")
    best_v = math.inf
    best_s = None

    def local_search(s: np.ndarray):
        nonlocal best_v, best_s
        s = s.copy()
        v = objective(s)
        for _ in range(budget.iterations):
            improved = False
            for i in range(n - 1):
                for j in range(i + 1, n):
                    s[i], s[j] = s[j], s[i]
                    v2 = objective(s)
                    if v2 < v - 1e-15:
                        v = v2
                        improved = True
                    else:
                        s[i], s[j] = s[j], s[i]
            if not improved:
                break
        if v < best_v - 1e-15:
            best_v = v
            best_s = s.copy()

    local_search(init)
    for _ in range(budget.restarts - 1):
        local_search(rng.permutation(n))
    return best_v, best_s


def hat_delta_p(A, B, p: float, mode: str = "exact",
                budget: SearchBudget = SearchBudget(), seed: int = 0):
    """Relabeling distance min_sigma ||A^sigma - B||_p.

    Exact mode enumerates permutations (n <= 9); heuristic mode is an upper
    bound from degree-sorted alignment plus pairwise-swap local search.
    """
    a, b = as_matrix(A), as_matrix(B)
    if a.shape != b.shape:
        raise ParameterError("matrices must have the same size")
    n = a.shape[0]

    def objective(s):
        return matrix_lp(_apply_perm(a, s) - b, p)

    return _perm_search(objective, n, mode, budget, seed,
                        init=_degree_sorted_alignment(a, b))


def hat_delta_cut(A, B, mode: str = "exact",
                  budget: SearchBudget = SearchBudget(), seed: int = 0):
    """Relabeling cut distance min_sigma ||A^sigma - B||_cut.

    In heuristic mode each inner cut norm is itself a lower bound, so the
    result is an upper bound on the permutation minimum of a lower bound.
    """
    a, b = as_matrix(A), as_matrix(B)
    if a.shape != b.shape:
        raise ParameterError("matrices must have the same size")
    n = a.shape[0]
    inner_budget = SearchBudget(restarts=max(2, budget.restarts // 4),
                                iterations=budget.iterations)

    if mode == "exact":
        objective = lambda s: cut_norm_exact(_apply_perm(a, s) - b)[0]
    else:
        objective = lambda s: cut_norm(_apply_perm(a, s) - b, inner_budget, seed)

    return _perm_search(objective, n, mode, budget, seed,
                        init=_degree_sorted_alignment(a, b))


def _cell_integral_tables(W: Graphon, n: int, p: float, values: np.ndarray,
                          gauss_order: int = 8) -> dict[float, np.ndarray]:
    """For each candidate matrix value v, the n x n table of cell integrals
    of |v - W|^p over the 1/n-grid cells (already carrying the 1/n^2 weight)."""
    tables: dict[float, np.ndarray] = {}
    if isinstance(W, StepGraphon):
        cuts = np.unique(np.concatenate([np.linspace(0, 1, n + 1), W._t]))
        seg_len = np.diff(cuts)
        mids = (cuts[:-1] + cuts[1:]) / 2
        cell = np.minimum((mids * n).astype(int), n - 1)
        wvals = W.pair_eval(mids, mids)
        area = np.outer(seg_len, seg_len)
        ci = cell[:, None].repeat(mids.size, 1)
        cj = cell[None, :].repeat(mids.size, 0)
        for v in values:
            tab = np.zeros((n, n))
            np.add.at(tab, (ci, cj), np.abs(v - wvals) ** p * area)
            tables[float(v)] = tab
        return tables
    nodes, wts = np.polynomial.legendre.leggauss(gauss_order)
    # per-cell Gauss nodes on the whole grid at once
    offs = (nodes + 1) / (2 * n)
    xs = (np.arange(n)[:, None] / n + offs[None, :]).ravel()  # n*g points
    wv = W.pair_eval(xs, xs)
    for v in values:
        g = gauss_order
        cellvals = np.abs(v - wv).reshape(n, g, n, g) ** p
        tab = np.einsum("agbh,g,h->ab", cellvals, wts / 2, wts / 2) / n**2
        tables[float(v)] = tab
    return tables


def hat_delta_p_vs_graphon(A, W: Graphon, p: float, mode: str = "exact",
                           budget: SearchBudget = SearchBudget(), seed: int = 0):
    """min_sigma || step-embedding of A^sigma - W ||_p for a graphon over [0,1]."""
    if W.latent_space != "unit_interval":
        raise ParameterError("needs a graphon over [0,1]")
    a = as_matrix(A)
    n = a.shape[0]
    values = np.unique(a)
    tables = _cell_integral_tables(W, n, p, values)
    stacked = np.stack([tables[float(v)] for v in values])
    index_of = {float(v): i for i, v in enumerate(values)}
    a_idx = np.vectorize(lambda v: index_of[float(v)])(a).astype(int)

    def objective(s):
        sel = a_idx[np.ix_(s, s)]
        total = stacked[sel, np.arange(n)[:, None], np.arange(n)[None, :]].sum()
        return float(total) ** (1.0 / p)

    # degree-sorted init: align A's degree order with the graphon's degree order
    dW = np.array([float(W.pair_eval([x], np.linspace(0, 1, 129)).mean())
                   for x in (np.arange(n) + 0.5) / n])
    order_a = np.lexsort((np.arange(n), a.sum(axis=1)))
    order_w = np.lexsort((np.arange(n), dW))
    init = np.empty(n, dtype=int)
    init[order_w] = order_a
    return _perm_search(objective, n, mode, budget, seed, init=init)


# ---------------------------------------------------------------------------
# coupling distance between block models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Coupling:
    """Joint mass matrix with prescribed marginals (a transport plan)."""

    nu: np.ndarray
    row_masses: np.ndarray
    col_masses: np.ndarray

    def __post_init__(self) -> None:
        nu = np.asarray(self.nu, dtype=float)
        p = np.asarray(self.row_masses, dtype=float)
        q = np.asarray(self.col_masses, dtype=float)
        if np.any(nu < -1e-12):
            raise ParameterError("coupling entries must be nonnegative")
        if np.max(np.abs(nu.sum(axis=1) - p)) > 1e-10:
            raise ParameterError("row marginals violated")
        if np.max(np.abs(nu.sum(axis=0) - q)) > 1e-10:
            raise ParameterError("column marginals violated")
        object.__setattr__(self, "nu", np.maximum(nu, 0.0))
        object.__setattr__(self, "row_masses", p)
        object.__setattr__(self, "col_masses", q)


def _coupling_objective(nu: np.ndarray, B1: np.ndarray, B2: np.ndarray, p: float) -> float:
    diff = np.abs(B1[:, None, :, None] - B2[None, :, None, :]) ** p
    return float(np.einsum("ik,jl,ikjl->", nu, nu, diff))


def _greedy_plan(p: np.ndarray, q: np.ndarray, order_p, order_q) -> np.ndarray:
    """Northwest-corner transport plan along the given block orders; exactly feasible."""
    nu = np.zeros((p.size, q.size))
    rem_p = p.copy()
    rem_q = q.copy()
    i = j = 0
    op, oq = list(order_p), list(order_q)
    while i < len(op) and j < len(oq):
        a, b = op[i], oq[j]
        m = min(rem_p[a], rem_q[b])
        nu[a, b] += m
        rem_p[a] -= m
        rem_q[b] -= m
        if rem_p[a] <= rem_q[b]:
            rem_p[a] = 0.0
            i += 1
        else:
            rem_q[b] = 0.0
            j += 1
    return nu


def _repair_marginals(nu: np.ndarray, p: np.ndarray, q: np.ndarray,
                      iters: int = 500) -> np.ndarray | None:
    """Clip to the orthant and IPF-scale back to the prescribed marginals."""
    x = np.maximum(nu, 0.0) + 1e-12 * np.outer(p, q)
    for _ in range(iters):
        x *= (p / np.maximum(x.sum(axis=1), 1e-300))[:, None]
        x *= (q / np.maximum(x.sum(axis=0), 1e-300))[None, :]
    if np.max(np.abs(x.sum(axis=1) - p)) > 1e-10 or np.max(np.abs(x.sum(axis=0) - q)) > 1e-10:
        return None
    return x


def delta_p_step(W1: BlockModel, W2: BlockModel, p: float,
                 budget: SearchBudget = SearchBudget(), seed: int = 0):
    """Upper bound on the coupling distance between two step graphons.

    Minimizes E|B - B'|^p over transport plans of the block masses by a
    deterministic greedy-matching pass, an exhaustive permutation pass when
    both models have equal uniform masses (k <= 6), and seeded SLSQP descents
    from random transport-polytope vertices. Nonconvex, so the result is an
    upper bound; the achieving coupling is returned as the certificate.
    """
    p1, B1 = W1.p, W1.B
    p2, B2 = W2.p, W2.B
    k1, k2 = p1.size, p2.size
    candidates: list[np.ndarray] = [np.outer(p1, p2)]

    d1 = B1 @ p1
    d2 = B2 @ p2
    for key1, key2 in ((d1, d2), (-d1, -d2)):
        candidates.append(_greedy_plan(p1, p2, np.argsort(key1, kind="stable"),
                                       np.argsort(key2, kind="stable")))
    if k1 == k2 and np.allclose(p1, 1.0 / k1) and np.allclose(p2, 1.0 / k2) and k1 <= 6:
        for perm in itertools.permutations(range(k1)):
            nu = np.zeros((k1, k1))
            nu[np.arange(k1), list(perm)] = 1.0 / k1
            candidates.append(nu)

    rng = substream(seed, "delta_p_step")
    for _ in range(budget.restarts):
        order_p = rng.permutation(k1)
        order_q = rng.permutation(k2)
        candidates.append(_greedy_plan(p1, p2, order_p, order_q))

    diff = np.abs(B1[:, None, :, None] - B2[None, :, None, :]) ** p
    M = diff.reshape(k1 * k2, k1 * k2)

    def f(x):
        return float(x @ M @ x)

    def grad(x):
        return 2.0 * (M @ x)

    cons = []
    for i in range(k1):
        row = np.zeros(k1 * k2)
        row[i * k2:(i + 1) * k2] = 1.0
        cons.append((row, p1[i]))
    for j in range(k2 - 1):
        col = np.zeros(k1 * k2)
        col[j::k2] = 1.0
        cons.append((col, p2[j]))
    A_eq = np.array([c[0] for c in cons])
    b_eq = np.array([c[1] for c in cons])

    polished: list[np.ndarray] = []
    for start in candidates[: budget.restarts + 8]:
        res = optimize.minimize(
            f, start.ravel(), jac=grad, method="SLSQP",
            bounds=[(0.0, 1.0)] * (k1 * k2),
            constraints={"type": "eq", "fun": lambda x: A_eq @ x - b_eq,
                         "jac": lambda x: A_eq},
            options={"maxiter": budget.iterations, "ftol": 1e-14})
        fixed = _repair_marginals(res.x.reshape(k1, k2), p1, p2)
        if fixed is not None:
            polished.append(fixed)

    best_val = math.inf
    best_nu = None
    for nu in candidates + polished:
        v = float(np.einsum("ik,jl,ikjl->", nu, nu, diff))
        if v < best_val - 1e-15:
            best_val = v
            best_nu = nu
    return best_val ** (1.0 / p), Coupling(best_nu, p1, p2)


# ---------------------------------------------------------------------------
# degree distributions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Cdf:
    """Right-continuous step CDF: value values[i] on [points[i], points[i+1])."""

    points: np.ndarray
    values: np.ndarray
    provenance: str = "empirical"

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if pts.size != vals.size or pts.size == 0:
            raise ParameterError("points and values must be nonempty and matched")
        if np.any(np.diff(pts) <= 0):
            raise ParameterError("support points must be strictly increasing")
        if np.any(np.diff(vals) < 0) or abs(vals[-1] - 1.0) > 1e-12:
            raise ParameterError("values must be nondecreasing with final value 1")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "values", vals)

    def __call__(self, lam) -> np.ndarray | float:
        idx = np.searchsorted(self.points, lam, side="right") - 1
        out = np.where(idx >= 0, self.values[np.maximum(idx, 0)], 0.0)
        return float(out) if np.isscalar(lam) else out

    @classmethod
    def from_samples(cls, xs, provenance: str = "empirical") -> "Cdf":
        xs = np.sort(np.asarray(xs, dtype=float))
        pts, counts = np.unique(xs, return_counts=True)
        vals = np.cumsum(counts) / xs.size
        vals[-1] = 1.0
        return cls(pts, vals, provenance)

    @classmethod
    def from_function(cls, D, lo: float, hi: float, m: int = 4000,
                      provenance: str = "analytic") -> "Cdf":
        """Step discretization of an analytic CDF, accurate to ~1/m in value.

        Starts from a uniform grid and bisects every interval across which D
        moves by more than 1/m, so steep regions get dense support points;
        genuine jumps stop refining once the interval width is negligible.
        """
        pts = np.linspace(lo, hi, m)
        vals = np.clip(np.asarray([float(D(t)) for t in pts]), 0.0, 1.0)
        tol = 1.0 / m
        for _ in range(60):
            gaps = np.diff(vals)
            widths = np.diff(pts)
            idx = np.flatnonzero((gaps > tol) & (widths > 1e-12 * max(1.0, hi)))
            if idx.size == 0:
                break
            mids = (pts[idx] + pts[idx + 1]) / 2.0
            mv = np.clip(np.asarray([float(D(t)) for t in mids]), 0.0, 1.0)
            pts = np.concatenate([pts, mids])
            vals = np.concatenate([vals, mv])
            order = np.argsort(pts)
            pts, vals = pts[order], vals[order]
        vals = np.maximum.accumulate(vals)
        vals[-1] = 1.0
        keep = np.concatenate(([True], np.diff(vals) > 0))
        return cls(pts[keep], vals[keep], provenance)


def degree_cdf_of_matrix(A) -> Cdf:
    """Empirical CDF of normalized degrees d_i / dbar."""
    m = as_matrix(A)
    deg = m.sum(axis=1)
    dbar = deg.mean()
    if dbar <= 0:
        raise DegenerateError("empty graph has no normalized degree distribution")
    return Cdf.from_samples(deg / dbar, provenance="empirical")


def levy_prokhorov(D: Cdf, Dp: Cdf, depth: int = 40) -> float:
    """Levy-Prokhorov distance between step CDFs, exact via bisection.

    Feasibility of a candidate eps is checked at the finite set of breakpoints
    where either side of the two-sided inequality can jump.
    """

    def left_limit(cdf: Cdf, x: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(cdf.points, x, side="left") - 1
        return np.where(idx >= 0, cdf.values[np.maximum(idx, 0)], 0.0)

    def slack(eps: float) -> float:
        """max over lambda of the worse inequality violation at this eps.

        Both sides of the two-sided inequality are piecewise constant in
        lambda, so the supremum is attained either at a breakpoint (the
        left-hand CDF has just jumped) or as a left limit approaching one
        (the shifted right-hand CDF is about to jump). Checking both kinds
        of point makes the sup exact.
        """
        # sup_lam D(lam) - Dp(lam + eps): up-jumps at D.points, down-jumps
        # at Dp.points - eps (approached from the left)
        a1 = np.max(D(D.points) - Dp(D.points + eps))
        a2 = np.max(left_limit(D, Dp.points - eps) - left_limit(Dp, Dp.points))
        # sup_lam Dp(lam - eps) - D(lam): up-jumps at Dp.points + eps,
        # down-jumps at D.points (approached from the left)
        b1 = np.max(Dp(Dp.points) - D(Dp.points + eps))
        b2 = np.max(left_limit(Dp, D.points - eps) - left_limit(D, D.points))
        return float(max(a1, a2, b1, b2))

    lo, hi = 0.0, 1.0
    if slack(0.0) <= 0.0:
        return 0.0
    for _ in range(depth):
        mid = (lo + hi) / 2
        if slack(mid) <= mid + 1e-15:
            hi = mid
        else:
            lo = mid
    return hi
