"""Shift-aware cosine similarity and the permutation-matched recovery score."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

__all__ = ["ShiftSimilarity", "cos_shift", "shift_leq", "perm_score"]

# Above this size the exhaustive permutation search gives way to optimal
# assignment on the cosine matrix.
_BRUTE_FORCE_LIMIT = 8


@dataclass(frozen=True)
class ShiftSimilarity:
    """Result of a windowed-shift cosine comparison.

    ``value`` is the best cosine over all compared alignments; ``best_lag``
    is positive when the second vector is best explained as a right-shift of
    the first, negative for the opposite direction, 0 for no shift.
    """

    value: float
    best_lag: int


def _cos(a: np.ndarray, b: np.ndarray) -> float:
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        # A zero vector carries no direction; any positive value here would
        # manufacture spurious cluster links.
        return 0.0
    return float(a @ b) / (na * nb)


def _cos_shifted(a: np.ndarray, b: np.ndarray, lag: int) -> float:
    """cos(right-shift of ``a`` by ``lag``, ``b``) without materializing the shift."""
    n = a.shape[0]
    if lag >= n:
        return 0.0
    return _cos(a[: n - lag], b[lag:]) if lag else _cos(a, b)


def cos_shift(gi, gj, window: int) -> ShiftSimilarity:
    """Maximum cosine between two vectors over all relative shifts below ``window``.

    Both shift directions are compared at every lag, so the measure is
    symmetric in its arguments and equals 1 exactly when one vector is a
    positive scaling of a shift of the other.
    """
    gi = np.asarray(gi, dtype=float)
    gj = np.asarray(gj, dtype=float)
    if gi.shape != gj.shape:
        raise ValueError("vectors must have equal length")
    if window < 1:
        raise ValueError("window must be at least 1")
    best = -np.inf
    best_lag = 0
    for lag in range(window):
        c = _cos_shifted(gi, gj, lag)
        if c > best:
            best, best_lag = c, lag
        c = _cos_shifted(gj, gi, lag)
        if c > best:
            best, best_lag = c, -lag
    return ShiftSimilarity(float(best), best_lag)


def _mu(gi: np.ndarray, gj: np.ndarray, window: int) -> float:
    """max over lags of cos(right-shifted ``gi``, ``gj``) — one direction only."""
    return max(_cos_shifted(gi, gj, lag) for lag in range(window))


def shift_leq(i: int, j: int, g, window: int) -> bool:
    """Comparison operator ordering rows of ``g`` by shift direction.

    True when row ``j`` is at least as well expressed as a right-shift of
    row ``i`` than the other way around; reflexive by construction.
    """
    g = np.asarray(g, dtype=float)
    return _mu(g[i], g[j], window) >= _mu(g[j], g[i], window)


def perm_score(h, h_est) -> tuple[float, tuple[int, ...]]:
    """Best-assignment mean row cosine between two factor matrices.

    Rows of ``h_est`` are matched one-to-one to rows of ``h`` so as to
    maximize the average cosine. Returns the score and the matching, where
    entry ``k`` is the row of ``h_est`` paired with row ``k`` of ``h``.
    Invariant to positive row scaling and to permuting both inputs alike.
    """
    h = np.atleast_2d(np.asarray(h, dtype=float))
    h_est = np.atleast_2d(np.asarray(h_est, dtype=float))
    if h.shape != h_est.shape:
        raise ValueError("factor matrices must have equal shapes")
    k = h.shape[0]
    cosines = np.zeros((k, k))
    for a in range(k):
        for b in range(k):
            cosines[a, b] = _cos(h[a], h_est[b])
    if k <= _BRUTE_FORCE_LIMIT:
        best_perm = None
        best = -np.inf
        for perm in itertools.permutations(range(k)):
            total = sum(cosines[a, perm[a]] for a in range(k))
            if total > best:
                best, best_perm = total, perm
        return best / k, tuple(best_perm)
    rows, cols = linear_sum_assignment(-cosines)
    perm = tuple(int(cols[np.flatnonzero(rows == a)[0]]) for a in range(k))
    return float(cosines[rows, cols].sum() / k), perm
