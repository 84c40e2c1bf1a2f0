"""Nonnegative least squares by block principal pivoting.

Solves ``min_{G >= 0} ||A G - B||_F`` for many right-hand sides at once by
active/passive set exchange on the normal equations. Each iteration performs
one Cholesky solve per distinct passive set; the standard anti-cycling rule
(a budget of full exchanges, then single exchange of the largest infeasible
index) guarantees termination on full-rank problems.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

__all__ = [
    "NnlsOptions",
    "NnlsError",
    "NnlsRankError",
    "NnlsConvergenceError",
    "nnls_solve",
    "nnls_solve_gram",
]


class NnlsError(RuntimeError):
    """Base class for solver failures."""


class NnlsRankError(NnlsError):
    """The normal equations are rank deficient on some passive set."""


class NnlsConvergenceError(NnlsError):
    """Pivoting did not terminate within the iteration budget.

    Carries the best iterate found (``best``) and the offending right-hand
    side columns (``columns``) so the caller can decide how to proceed.
    """

    def __init__(self, message: str, best: np.ndarray, columns: list[int]):
        super().__init__(message)
        self.best = best
        self.columns = columns


@dataclass(frozen=True)
class NnlsOptions:
    """Solver knobs.

    ``max_outer_iterations`` defaults to ``5 * n + 10`` for ``n`` unknowns
    when left unset. ``kkt_tolerance`` is relative to ``max |A^T B|``.
    ``fallback`` enables the single-exchange anti-cycling mode once the full
    exchange budget is spent.
    """

    max_outer_iterations: int | None = None
    kkt_tolerance: float = 1e-10
    fallback: bool = True

    def __post_init__(self):
        if self.kkt_tolerance <= 0:
            raise ValueError("kkt_tolerance must be positive")
        if self.max_outer_iterations is not None and self.max_outer_iterations < 1:
            raise ValueError("max_outer_iterations must be at least 1")


def _solve_subsets(gram, cross, passive, x, cols):
    """Refresh ``x[:, cols]`` by exact solves on each distinct passive set."""
    patterns, inverse = np.unique(passive[:, cols], axis=1, return_inverse=True)
    for gi in range(patterns.shape[1]):
        gcols = cols[inverse == gi]
        free = np.flatnonzero(patterns[:, gi])
        x[:, gcols] = 0.0
        if free.size == 0:
            continue
        try:
            factor = cho_factor(gram[np.ix_(free, free)], check_finite=False)
        except LinAlgError as exc:
            raise NnlsRankError(
                f"normal equations singular on a passive set of size {free.size}"
            ) from exc
        x[np.ix_(free, gcols)] = cho_solve(
            factor, cross[np.ix_(free, gcols)], check_finite=False
        )


def nnls_solve_gram(
    gram, cross, options: NnlsOptions | None = None
) -> tuple[np.ndarray, int]:
    """Block principal pivoting on precomputed normal equations.

    Parameters
    ----------
    gram : (n, n) array
        ``A^T A`` of the underlying least-squares problem; must be symmetric
        positive definite for the exchanges to stay solvable.
    cross : (n, q) array
        ``A^T B``, one column per right-hand side.
    options : NnlsOptions, optional

    Returns
    -------
    x : (n, q) array
        Nonnegative solution satisfying the KKT conditions within
        ``kkt_tolerance * max|cross|``.
    iterations : int
        Largest number of exchange steps taken by any column.
    """
    options = options or NnlsOptions()
    gram = np.ascontiguousarray(gram, dtype=float)
    cross = np.atleast_2d(np.asarray(cross, dtype=float))
    n, q = cross.shape
    if gram.shape != (n, n):
        raise ValueError(f"gram must be {n}x{n} to match cross")
    max_outer = options.max_outer_iterations or 5 * n + 10

    tol = options.kkt_tolerance * (np.abs(cross).max() if cross.size else 0.0)
    x = np.zeros((n, q))
    y = np.zeros((n, q))
    # Starting from an all-passive partition makes the first pass a shared
    # unconstrained solve, which already finishes every feasible column.
    passive = np.ones((n, q), dtype=bool)
    backup = np.full(q, 3)
    best_infeasible = np.full(q, n + 1)
    exchanges = np.zeros(q, dtype=int)
    given_up = np.zeros(q, dtype=bool)

    pending = np.arange(q)
    while pending.size:
        _solve_subsets(gram, cross, passive, x, pending)
        y[:, pending] = gram @ x[:, pending] - cross[:, pending]
        infeasible = (passive & (x < -tol)) | (~passive & (y < -tol))
        infeasible[:, given_up] = False
        counts = infeasible.sum(axis=0)
        pending = np.flatnonzero(counts > 0)
        next_pending = []
        for c in pending:
            if exchanges[c] >= max_outer:
                given_up[c] = True
                continue
            bad = np.flatnonzero(infeasible[:, c])
            if counts[c] < best_infeasible[c]:
                best_infeasible[c] = counts[c]
                backup[c] = 3
                passive[bad, c] ^= True
            elif backup[c] > 0:
                backup[c] -= 1
                passive[bad, c] ^= True
            elif options.fallback:
                passive[bad[-1], c] ^= True
            else:
                given_up[c] = True
                continue
            exchanges[c] += 1
            next_pending.append(c)
        pending = np.asarray(next_pending, dtype=int)

    x = np.maximum(x, 0.0)
    if given_up.any():
        cols = np.flatnonzero(given_up).tolist()
        raise NnlsConvergenceError(
            f"pivoting did not converge within {max_outer} exchanges for "
            f"{len(cols)} of {q} columns",
            best=x,
            columns=cols,
        )
    return x, int(exchanges.max(initial=0))


def nnls_solve(a, b, options: NnlsOptions | None = None) -> np.ndarray:
    """Solve ``min_{G >= 0} ||a G - b||_F`` column-wise.

    ``a`` must have full column rank (the gram matrix is Cholesky-factored
    per passive set); ``b`` may have entries of any sign, only the solution
    is constrained. Raises :class:`NnlsRankError` on rank-deficient normal
    equations and :class:`NnlsConvergenceError` when the exchange budget is
    exhausted.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2:
        raise ValueError("a must be 2-D")
    squeeze = b.ndim == 1
    b = np.atleast_2d(b.T).T if squeeze else b
    if b.shape[0] != a.shape[0]:
        raise ValueError("a and b must have the same number of rows")
    x, _ = nnls_solve_gram(a.T @ a, a.T @ b, options)
    return x[:, 0] if squeeze else x
