"""Empirical Kendall's tau-b.

Two routes share the final tie correction: an O(m^2) pair enumeration used
as the reference, and an O(m log m) merge count of inversions. Both produce
the same integer concordance statistic, so they agree bit for bit.
"""

import math

import numpy as np

from .exceptions import ArgumentError, UndefinedTauError

__all__ = ["empirical_kendall_tau", "kendall_tau_bruteforce", "kendall_tau_fast", "tau_null_stderr"]


def _check_pair(x, y):
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size:
        raise ArgumentError(f"series lengths differ: {x.size} vs {y.size}")
    if x.size < 2:
        raise ArgumentError("need at least two observations")
    if np.isnan(x).any() or np.isnan(y).any():
        raise ArgumentError("series contain NaN")
    return x, y


def _tied_pairs(*cols) -> int:
    """Number of pairs tied in every given column."""
    if len(cols) == 1:
        _, counts = np.unique(cols[0], return_counts=True)
    else:
        _, counts = np.unique(np.column_stack(cols), axis=0, return_counts=True)
    counts = counts.astype(np.int64)
    return int(np.sum(counts * (counts - 1) // 2))


def _tau_from_counts(s: int, n0: int, n1: int, n2: int) -> float:
    if n0 == n1 or n0 == n2:
        raise UndefinedTauError("Kendall's tau is undefined for a constant series")
    return s / math.sqrt((n0 - n1) * (n0 - n2))


def kendall_tau_bruteforce(x, y, chunk: int = 2048) -> float:
    """Reference tau-b by direct enumeration of all pairs."""
    x, y = _check_pair(x, y)
    m = x.size
    s = n1 = n2 = 0
    for start in range(0, m, chunk):
        xi = x[start:start + chunk, None]
        yi = y[start:start + chunk, None]
        dx = np.sign(xi - x[None, :]).astype(np.int64)
        dy = np.sign(yi - y[None, :]).astype(np.int64)
        rows = np.arange(start, min(start + chunk, m))[:, None]
        upper = np.arange(m)[None, :] > rows
        s += int(np.sum(dx * dy * upper))
        n1 += int(np.sum((dx == 0) & upper))
        n2 += int(np.sum((dy == 0) & upper))
    n0 = m * (m - 1) // 2
    return _tau_from_counts(s, n0, n1, n2)


def _count_inversions(values: np.ndarray) -> int:
    """Pairs ``i < j`` with ``values[i] > values[j]`` via bottom-up merging."""
    _, r = np.unique(values, return_inverse=True)
    r = r.astype(np.int64).ravel()
    n = r.size
    k = int(r.max()) + 1 if n else 1
    idx = np.arange(n, dtype=np.int64)
    total = 0
    width = 1
    while width < n:
        pair = idx // (2 * width)
        is_left = (idx // width) % 2 == 0
        keys = pair * k + r
        left_keys = keys[is_left]
        right = ~is_left
        if right.any():
            rp = pair[right]
            end = np.searchsorted(left_keys, rp * k + k, side="left")
            le = np.searchsorted(left_keys, keys[right], side="right")
            total += int(np.sum(end - le))
        r = np.sort(keys) - pair * k
        width *= 2
    return total


def kendall_tau_fast(x, y) -> float:
    """Tau-b in O(m log m): sort by (x, y) and count inversions of y."""
    x, y = _check_pair(x, y)
    m = x.size
    order = np.lexsort((y, x))
    discordant = _count_inversions(y[order])
    n0 = m * (m - 1) // 2
    n1 = _tied_pairs(x)
    n2 = _tied_pairs(y)
    n3 = _tied_pairs(x, y)
    s = n0 - n1 - n2 + n3 - 2 * discordant
    return _tau_from_counts(s, n0, n1, n2)


def empirical_kendall_tau(x, y, method: str = "fast") -> float:
    """Kendall's tau-b of two equal-length series.

    Parameters
    ----------
    x, y : array_like
        Series of length ``m >= 2``.
    method : {"fast", "brute"}
        Merge-count path or the O(m^2) reference.
    """
    if method == "fast":
        return kendall_tau_fast(x, y)
    if method == "brute":
        return kendall_tau_bruteforce(x, y)
    raise ArgumentError(f"unknown method {method!r}")


def tau_null_stderr(m: int) -> float:
    """Standard deviation of tau under independence for sample size m."""
    return math.sqrt(2.0 * (2 * m + 5) / (9.0 * m * (m - 1)))
