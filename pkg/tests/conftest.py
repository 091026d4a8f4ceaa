"""Shared helpers: random instance generators and brute-force oracles.

The oracles here are written independently of the library code paths they
check (full enumerations, dense-grid scans), so a test failure localizes to
the library and not to a shared bug.
"""

import itertools

import numpy as np


def sym_matrix(rng: np.random.Generator, n: int, kind: str = "uniform") -> np.ndarray:
    """Random symmetric matrix with zero diagonal."""
    if kind == "uniform":
        m = rng.random((n, n))
    elif kind == "signed":
        m = rng.integers(-1, 2, size=(n, n)).astype(float)
    elif kind == "pm1":
        m = rng.choice([-1.0, 1.0], size=(n, n))
    elif kind == "adjacency":
        m = (rng.random((n, n)) < 0.5).astype(float)
    else:
        raise ValueError(kind)
    m = np.triu(m, 1)
    return m + m.T


def cut_norm_brute(a: np.ndarray) -> float:
    """Cut norm by full enumeration of all 4^n (S, T) pairs (n <= ~10)."""
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    masks = np.arange(1 << n, dtype=np.uint64)
    z = ((masks[:, None] >> np.arange(n, dtype=np.uint64)[None, :]) & 1).astype(float)
    vals = z @ a @ z.T  # entry (s, t) = sum over S x T
    return float(np.abs(vals).max()) / n**2


def hat_delta_p_brute(a: np.ndarray, b: np.ndarray, p: float) -> float:
    """min over all vertex relabelings of the normalized L^p residual."""
    n = a.shape[0]
    best = np.inf
    for perm in itertools.permutations(range(n)):
        s = np.asarray(perm)
        val = (np.abs(a[np.ix_(s, s)] - b) ** p).mean() ** (1.0 / p)
        best = min(best, val)
    return best


def hat_delta_cut_brute(a: np.ndarray, b: np.ndarray) -> float:
    """min over relabelings of the exact cut norm of the residual."""
    n = a.shape[0]
    best = np.inf
    for perm in itertools.permutations(range(n)):
        s = np.asarray(perm)
        best = min(best, cut_norm_brute(a[np.ix_(s, s)] - b))
    return best


def block_average_brute(a: np.ndarray, assign: np.ndarray, k: int) -> np.ndarray:
    """Block means including the zero diagonal; 0 for cells with an empty side."""
    b = np.zeros((k, k))
    for i in range(k):
        for j in range(k):
            rows = np.flatnonzero(assign == i)
            cols = np.flatnonzero(assign == j)
            if rows.size and cols.size:
                b[i, j] = a[np.ix_(rows, cols)].mean()
    return b


def ls_objective_brute(a: np.ndarray, assign: np.ndarray, k: int) -> float:
    """Normalized L^2 residual ||A - A_pi||_2 via explicit lift."""
    b = block_average_brute(a, assign, k)
    lifted = b[np.ix_(assign, assign)]
    return float(((a - lifted) ** 2).mean() ** 0.5)


def feasible_assignments(n: int, min_size: int, max_k: int):
    """All canonical (restricted-growth) assignments with class sizes >= min_size."""
    def rec(i, assign, k):
        if i == n:
            sizes = np.bincount(assign, minlength=k)
            if np.all(sizes[:k] >= min_size):
                yield np.asarray(assign)
            return
        for c in range(min(k + 1, max_k)):
            assign.append(c)
            yield from rec(i + 1, assign, max(k, c + 1))
            assign.pop()

    yield from rec(0, [], 0)
