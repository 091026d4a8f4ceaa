"""The three block-model estimators: least squares, least cut norm, degree sorting.

Least squares and least cut take the block-floor parameter kappa (classes of
size at least floor(kappa*n), at most ceil(n / floor(kappa*n)) of them);
degree sorting takes the class count k directly. Exact modes enumerate
partitions under hard size gates; search modes are seeded local searches that
can only overshoot the optimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .common import DegenerateError, ParameterError, SearchBudget, SizeError, substream
from .graphon import BlockModel
from .metrics import cut_norm, cut_norm_exact, matrix_lp
from .sampling import as_matrix, density

LS_EXACT_MAX_N = 13
CUT_EXACT_MAX_N = 10
_FULL_SWAP_MAX_N = 32


@dataclass(frozen=True)
class Partition:
    """Assignment of [n] vertices to classes 0..k-1."""

    assign: np.ndarray
    k: int

    def __post_init__(self) -> None:
        a = np.asarray(self.assign, dtype=int)
        if a.ndim != 1 or a.size == 0:
            raise ParameterError("assignment must be a nonempty vector")
        if a.min() < 0 or a.max() >= self.k:
            raise ParameterError("class labels out of range")
        object.__setattr__(self, "assign", a)

    @property
    def n(self) -> int:
        return self.assign.size

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assign, minlength=self.k)

    def canonical(self) -> "Partition":
        """Relabel classes in order of first appearance (restricted growth form)."""
        seen: dict[int, int] = {}
        out = np.empty(self.n, dtype=int)
        for i, a in enumerate(self.assign):
            if a not in seen:
                seen[a] = len(seen)
            out[i] = seen[a]
        return Partition(out, max(len(seen), 1))


@dataclass(frozen=True)
class EstimationResult:
    what: BlockModel          # relative class sizes and block averages
    partition: Partition
    objective: float          # residual in the algorithm's own norm
    normalized: BlockModel | None  # block averages divided by the graph density
    mode: str                 # "exact" | "search"
    diagnostics: dict = field(default_factory=dict)


def kappa_class_bounds(n: int, kappa: float) -> tuple[int, int]:
    """(min class size, max class count) for the kappa rule."""
    if kappa * n < 1.0:
        raise ParameterError("need kappa * n >= 1")
    if kappa > 1.0:
        raise ParameterError("kappa must lie in (0,1]")
    m = math.floor(kappa * n)
    k = math.ceil(n / m)
    return m, k


def block_average(A, pi: Partition) -> tuple[np.ndarray, np.ndarray]:
    """Block-average matrix A/pi and its lift back to n x n.

    Diagonal cells average over the full block including the zero diagonal;
    blocks with an empty side average to 0.
    """
    a = as_matrix(A)
    k = pi.k
    Z = np.zeros((a.shape[0], k))
    Z[np.arange(a.shape[0]), pi.assign] = 1.0
    sums = Z.T @ a @ Z
    sizes = pi.sizes().astype(float)
    denom = np.outer(sizes, sizes)
    with np.errstate(invalid="ignore", divide="ignore"):
        B = np.where(denom > 0, sums / denom, 0.0)
    lifted = B[np.ix_(pi.assign, pi.assign)]
    return B, lifted


def _result_from_partition(A, pi: Partition, objective: float, mode: str,
                           diagnostics: dict | None = None) -> EstimationResult:
    """Package a partition: drop empty classes, build (p, B), attach density scaling."""
    a = as_matrix(A)
    pi = pi.canonical()
    sizes = pi.sizes()
    nonempty = sizes > 0
    dropped = int((~nonempty).sum())
    B, _ = block_average(a, pi)
    p_hat = sizes[nonempty] / pi.n
    B_hat = B[np.ix_(nonempty, nonempty)]
    model = BlockModel(p_hat, B_hat)
    rho = density(a)
    normalized = BlockModel(p_hat, B_hat / rho) if rho > 0 else None
    diag = dict(diagnostics or {})
    diag["empty_classes_dropped"] = dropped
    return EstimationResult(model, pi, objective, normalized, mode, diag)


# ---------------------------------------------------------------------------
# partition enumeration (exact modes)
# ---------------------------------------------------------------------------


def _feasible_partitions(n: int, min_size: int, max_k: int):
    """All set partitions of [n] in restricted-growth order with every class
    of size >= min_size and at most max_k classes."""
    assign = np.zeros(n, dtype=int)
    sizes = [0] * max_k

    def rec(i: int, used: int):
        if i == n:
            if all(s == 0 or s >= min_size for s in sizes):
                yield assign.copy()
            return
        remaining = n - i
        # prune: every started-but-short class still needs filling
        deficit = sum(max(min_size - s, 0) for s in sizes[:used])
        if deficit > remaining:
            return
        for c in range(min(used + 1, max_k)):
            assign[i] = c
            sizes[c] += 1
            yield from rec(i + 1, max(used, c + 1))
            sizes[c] -= 1

    yield from rec(0, 0)


def least_squares_exact(A, kappa: float) -> EstimationResult:
    """Global minimizer of ||A - B^pi||_2 over kappa-feasible partitions.

    The optimal B for a fixed partition is the block average, so only
    partitions are enumerated. Ties break to the lexicographically smallest
    restricted-growth assignment.
    """
    a = as_matrix(A)
    n = a.shape[0]
    if n > LS_EXACT_MAX_N:
        raise SizeError(
            f"exact least squares is gated at n <= {LS_EXACT_MAX_N} (got {n}); "
            "use least_squares_search")
    min_size, max_k = kappa_class_bounds(n, kappa)
    best_obj = math.inf
    best_assign = None
    for assign in _feasible_partitions(n, min_size, max_k):
        pi = Partition(assign, int(assign.max()) + 1)
        _, lifted = block_average(a, pi)
        obj = matrix_lp(a - lifted, 2)
        if obj < best_obj - 1e-15:
            best_obj = obj
            best_assign = assign
    pi = Partition(best_assign, int(best_assign.max()) + 1)
    return _result_from_partition(a, pi, best_obj, "exact")


def least_cut_exact(A, kappa: float) -> EstimationResult:
    """Global minimizer of ||A - A_pi||_cut over kappa-feasible partitions."""
    a = as_matrix(A)
    n = a.shape[0]
    if n > CUT_EXACT_MAX_N:
        raise SizeError(
            f"exact least cut is gated at n <= {CUT_EXACT_MAX_N} (got {n}); "
            "use least_cut_search")
    min_size, max_k = kappa_class_bounds(n, kappa)
    best_obj = math.inf
    best_assign = None
    for assign in _feasible_partitions(n, min_size, max_k):
        pi = Partition(assign, int(assign.max()) + 1)
        _, lifted = block_average(a, pi)
        obj = cut_norm_exact(a - lifted)[0]
        if obj < best_obj - 1e-15:
            best_obj = obj
            best_assign = assign
    pi = Partition(best_assign, int(best_assign.max()) + 1)
    return _result_from_partition(a, pi, best_obj, "exact")


# ---------------------------------------------------------------------------
# search modes
# ---------------------------------------------------------------------------


def _repair_min_sizes(a: np.ndarray, assign: np.ndarray, min_size: int, k: int) -> np.ndarray:
    """Restore the class-size floor: move lowest-cost vertices into short
    classes while donors exist, otherwise dissolve the smallest short class.
    Gives up (accepting the best feasible point) after 2n moves."""
    n = a.shape[0]
    assign = assign.copy()
    for _ in range(2 * n):
        sizes = np.bincount(assign, minlength=k)
        short = [c for c in range(k) if 0 < sizes[c] < min_size]
        if not short:
            break
        target = min(short, key=lambda c: sizes[c])
        donors = np.flatnonzero(sizes > min_size)
        pi = Partition(assign, k)
        B, lifted = block_average(a, pi)
        if donors.size == 0:
            # no class can give a vertex away: dissolve the smallest short
            # class, sending each member to its best-fitting other class
            ok = np.flatnonzero((sizes >= min_size) & (np.arange(k) != target))
            if ok.size == 0:
                ok = np.flatnonzero((sizes > 0) & (np.arange(k) != target))
            if ok.size == 0:
                break
            for v in np.flatnonzero(assign == target):
                costs = [float(((a[v] - B[c, assign]) ** 2).sum()) for c in ok]
                assign[v] = int(ok[int(np.argmin(costs))])
            continue
        # cost of moving v to the short class: squared-residual increase of row v
        best_v, best_cost = -1, math.inf
        for v in range(n):
            if assign[v] not in donors:
                continue
            cur = float(((a[v] - lifted[v]) ** 2).sum())
            new = float(((a[v] - B[target, assign]) ** 2).sum())
            cost = new - cur
            if cost < best_cost - 1e-15:
                best_cost, best_v = cost, v
        if best_v < 0:
            break
        assign[best_v] = target
    return assign


def _ls_objective(a: np.ndarray, assign: np.ndarray, k: int) -> float:
    _, lifted = block_average(a, Partition(assign, k))
    return matrix_lp(a - lifted, 2)


class _BlockSums:
    """Incremental bookkeeping for the least-squares objective.

    Minimizing ||A - A_pi||_2 over partitions is the same as maximizing
    sum_{cells} S_ij^2 / (n_i n_j) where S is the matrix of block sums
    (sum A^2 is fixed), so single-vertex moves and cross-class swaps can be
    scored in O(k^2) without touching A.
    """

    def __init__(self, a: np.ndarray, assign: np.ndarray, k: int):
        n = a.shape[0]
        self.a, self.k = a, k
        self.assign = assign.copy()
        Z = np.zeros((n, k))
        Z[np.arange(n), assign] = 1.0
        self.C = a @ Z                       # C[v, c] = sum of A[v, u] over u in class c
        self.S = Z.T @ a @ Z
        self.sizes = np.bincount(assign, minlength=k).astype(float)
        self.score = self._score(self.S, self.sizes)

    @staticmethod
    def _score(S: np.ndarray, sizes: np.ndarray) -> float:
        denom = np.outer(sizes, sizes)
        with np.errstate(divide="ignore", invalid="ignore"):
            return float(np.where(denom > 0, S * S / denom, 0.0).sum())

    @staticmethod
    def _moved(S: np.ndarray, row: np.ndarray, c: int, d: int) -> np.ndarray:
        S2 = S.copy()
        S2[c, :] -= row
        S2[:, c] -= row
        S2[d, :] += row
        S2[:, d] += row
        return S2

    def move_score(self, v: int, d: int) -> float:
        c = self.assign[v]
        S2 = self._moved(self.S, self.C[v], c, d)
        sz2 = self.sizes.copy()
        sz2[c] -= 1
        sz2[d] += 1
        return self._score(S2, sz2)

    def swap_score(self, v: int, u: int) -> float:
        """Score after exchanging the classes of v and u (sizes unchanged)."""
        a_cls, b_cls = self.assign[v], self.assign[u]
        S2 = self._moved(self.S, self.C[v], a_cls, b_cls)
        row_u = self.C[u].copy()
        e = self.a[u, v]
        row_u[a_cls] -= e                    # v already left a_cls
        row_u[b_cls] += e
        S3 = self._moved(S2, row_u, b_cls, a_cls)
        return self._score(S3, self.sizes)

    def apply_move(self, v: int, d: int) -> None:
        c = self.assign[v]
        self.S = self._moved(self.S, self.C[v], c, d)
        self.sizes[c] -= 1
        self.sizes[d] += 1
        self.assign[v] = d
        self.C[:, c] -= self.a[:, v]
        self.C[:, d] += self.a[:, v]
        self.score = self._score(self.S, self.sizes)

    def apply_swap(self, v: int, u: int) -> None:
        a_cls, b_cls = self.assign[v], self.assign[u]
        self.apply_move(v, b_cls)
        self.apply_move(u, a_cls)


def _polish(a: np.ndarray, assign: np.ndarray, k: int, min_size: int,
            rng: np.random.Generator, max_sweeps: int = 60,
            swap_candidates: int | None = None) -> np.ndarray:
    """Greedy exact-objective descent: single moves (size-floor preserving)
    plus cross-class swaps, until a local optimum under both move sets.

    Swap sweeps scan the full neighborhood at small n and a seeded random
    subset above _FULL_SWAP_MAX_N (cost grows quadratically)."""
    st = _BlockSums(a, assign, k)
    n = a.shape[0]
    if swap_candidates is None:
        swap_candidates = n if n <= _FULL_SWAP_MAX_N else 24
    for _ in range(max_sweeps):
        improved = False
        for v in rng.permutation(n):
            c = st.assign[v]
            if not (st.sizes[c] - 1 >= min_size or st.sizes[c] == 1):
                continue
            best_d, best_score = -1, st.score
            for d in range(k):
                if d == c or st.sizes[d] + 1 < min_size:
                    continue
                sc = st.move_score(v, d)
                if sc > best_score + 1e-10:
                    best_d, best_score = d, sc
            if best_d >= 0:
                st.apply_move(v, best_d)
                improved = True
        for v in rng.permutation(n):
            if swap_candidates >= n:
                cands = np.arange(n)
            else:
                cands = rng.permutation(n)[:swap_candidates]
            for u in cands:
                if st.assign[u] == st.assign[v]:
                    continue
                if st.swap_score(v, u) > st.score + 1e-10:
                    st.apply_swap(v, u)
                    improved = True
        if not improved:
            break
    return st.assign


def _hierarchical_init(a: np.ndarray, k_eff: int, rng: np.random.Generator) -> np.ndarray:
    """Coarse-to-fine start: optimize a 2-class split first, then divide each
    coarse class evenly. Lands refinement-shaped optima that flat random
    starts tend to miss."""
    n = a.shape[0]
    coarse = rng.permutation(np.arange(n) * 2 // n)
    coarse = _polish(a, coarse, 2, max(1, n // 4), rng)
    assign = np.empty(n, dtype=int)
    for c in range(2):
        idx = np.flatnonzero(coarse == c)
        parts = max(1, k_eff // 2 + (k_eff % 2 if c == 0 else 0))
        sub = rng.permutation(np.arange(idx.size) * parts // max(idx.size, 1))
        assign[idx] = (0 if c == 0 else (k_eff - k_eff // 2)) + sub
    return assign % max(k_eff, 1)


def least_squares_search(A, kappa: float, restarts: int = 50, seed: int = 0) -> EstimationResult:
    """Alternating-minimization upper bound for the least squares objective.

    Each restart alternates (1) block averaging and (2) sequential vertex
    reassignment against the fixed averages - both monotone in the objective -
    then repairs class-size violations and re-iterates to a fixed point, after
    which an exact-objective move/swap descent polishes the result. Restarts
    mix a degree-sorted start, coarse-to-fine starts, and uniform random ones.
    """
    a = as_matrix(A)
    n = a.shape[0]
    min_size, k = kappa_class_bounds(n, kappa)
    # at most this many classes can meet the floor simultaneously
    k_eff = min(k, max(1, n // min_size))
    best_obj = math.inf
    best_assign = None
    trace_len = 0
    for r in range(restarts):
        rng = substream(seed, "ls_restart", r)
        if r == 0:
            # degree-sorted contiguous start
            order = np.lexsort((np.arange(n), -a.sum(axis=1)))
            assign = np.empty(n, dtype=int)
            assign[order] = np.minimum(np.arange(n) * k_eff // n, k_eff - 1)
        elif r % 2 == 1 and k_eff >= 2:
            assign = _repair_min_sizes(a, _hierarchical_init(a, k_eff, rng),
                                       min_size, k)
        else:
            assign = _repair_min_sizes(a, rng.integers(k_eff, size=n),
                                       min_size, k)
        prev = math.inf
        for _ in range(100):
            pi = Partition(assign, k)
            B, lifted = block_average(a, pi)
            obj_before = matrix_lp(a - lifted, 2)
            assert obj_before <= prev + 1e-12, "averaging step increased the objective"
            # sequential reassignment, monotone for fixed B: moving v changes
            # row v and (by symmetry) column v, plus the diagonal cell once
            for v in range(n):
                base = ((a[v][None, :] - B[:, assign]) ** 2).sum(axis=1)
                row_off = base - (a[v, v] - B[:, assign[v]]) ** 2
                resid = 2.0 * row_off + (a[v, v] - B.diagonal()) ** 2
                assign[v] = int(np.argmin(resid))
            obj_after = _ls_objective(a, assign, k)
            assert obj_after <= obj_before + 1e-12, "reassignment increased the objective"
            assign = _repair_min_sizes(a, assign, min_size, k)
            obj = _ls_objective(a, assign, k)
            trace_len += 1
            if obj >= prev - 1e-12:
                break
            prev = obj
        sizes = np.bincount(assign, minlength=k)
        if np.any((sizes > 0) & (sizes < min_size)):
            continue
        # exact-objective descent (moves + swaps) from the alternating fixed
        # point; can only improve the upper bound
        assign = _polish(a, assign, k, min_size, rng)
        obj = _ls_objective(a, assign, k)
        sizes = np.bincount(assign, minlength=k)
        if np.all((sizes == 0) | (sizes >= min_size)) and obj < best_obj - 1e-15:
            best_obj = obj
            best_assign = assign.copy()
    if best_assign is None:
        raise DegenerateError("search found no feasible partition")
    pi = Partition(best_assign, k)
    return _result_from_partition(a, pi, best_obj, "search",
                                  {"restarts": restarts, "trace_length": trace_len})


def least_cut_search(A, kappa: float, restarts: int = 20, seed: int = 0,
                     budget: SearchBudget = SearchBudget(restarts=4, iterations=50)
                     ) -> EstimationResult:
    """Vertex-move local search for the least cut objective.

    Candidate objectives use the heuristic cut-norm lower bound, so the
    reported objective is an estimate of an upper bound (caveat recorded in
    the diagnostics).
    """
    a = as_matrix(A)
    n = a.shape[0]
    min_size, k = kappa_class_bounds(n, kappa)

    def objective(assign) -> float:
        _, lifted = block_average(a, Partition(assign, k))
        return cut_norm(a - lifted, budget, seed)

    best_obj = math.inf
    best_assign = None
    for r in range(restarts):
        rng = substream(seed, "cut_restart", r)
        if r == 0:
            order = np.lexsort((np.arange(n), -a.sum(axis=1)))
            assign = np.empty(n, dtype=int)
            assign[order] = np.minimum(np.arange(n) * k // n, k - 1)
        else:
            assign = rng.integers(k, size=n)
        assign = _repair_min_sizes(a, assign, min_size, k)
        obj = objective(assign)
        for _ in range(budget.iterations):
            improved = False
            for v in rng.permutation(n):
                cur = assign[v]
                sizes = np.bincount(assign, minlength=k)
                if sizes[cur] <= min_size:
                    continue
                for c in range(k):
                    if c == cur:
                        continue
                    if sizes[c] == 0 and min_size > 1:
                        continue  # a move into an empty class lands below the size floor
                    assign[v] = c
                    cand = objective(assign)
                    if cand < obj - 1e-12:
                        obj = cand
                        cur = c
                        improved = True
                    else:
                        assign[v] = cur
            if not improved:
                break
        sizes = np.bincount(assign, minlength=k)
        if np.all((sizes == 0) | (sizes >= min_size)) and obj < best_obj - 1e-15:
            best_obj = obj
            best_assign = assign.copy()
    if best_assign is None:
        raise DegenerateError("search found no feasible partition")
    pi = Partition(best_assign, k)
    return _result_from_partition(a, pi, best_obj, "search",
                                  {"restarts": restarts,
                                   "objective_is_heuristic": True})


def degree_sorting(A, k: int) -> EstimationResult:
    """Sort vertices by degree (descending, ties by index) and cut into k
    nearly equal classes with boundaries round(i*n/k)."""
    a = as_matrix(A)
    n = a.shape[0]
    if k < 1:
        raise ParameterError("need k >= 1")
    if a.sum() <= 0:
        raise DegenerateError("degree sorting needs at least one edge")
    deg = a.sum(axis=1)
    order = np.lexsort((np.arange(n), -deg))  # degree desc, index asc
    bounds = [int(math.floor(i * n / k + 0.5)) for i in range(k + 1)]  # half away from zero
    bounds[0], bounds[-1] = 0, n
    assign = np.empty(n, dtype=int)
    for c in range(k):
        assign[order[bounds[c]:bounds[c + 1]]] = c
    pi = Partition(assign, k)
    _, lifted = block_average(a, pi)
    obj = matrix_lp(a - lifted, 1)
    return _result_from_partition(a, pi, obj, "exact", {"boundaries": bounds})
