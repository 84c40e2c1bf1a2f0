"""Column locators for separable factorizations.

The greedy successive-projection locator (``spa``), its conic extension with
1-norm thresholding and column rescaling (``orcon_spa``), and an
SVD-whitened variant (``precond_spa``). All three return the chosen column
indices in extraction order together with the located columns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import as_matrix

__all__ = [
    "LocateError",
    "LocateResult",
    "spa",
    "orcon_spa",
    "precond_spa",
    "threshold_candidates",
    "conic_rescale",
]

# Residual considered exhausted relative to the input Frobenius norm.
_RESIDUAL_FLOOR = 1e-12
# Trailing singular values below this fraction of the largest are treated as
# numerically zero when whitening.
_SINGULAR_FLOOR = 1e-12


class LocateError(RuntimeError):
    """The locator could not extract the requested number of columns."""


@dataclass(frozen=True)
class LocateResult:
    """Located column indices (in extraction order) and those columns.

    ``columns`` holds the extracted columns as they were fed to the greedy
    selection, i.e. rescaled to unit 1-norm for the conic locator and taken
    verbatim otherwise.
    """

    indices: tuple[int, ...]
    columns: np.ndarray


def spa(x, r: int) -> LocateResult:
    """Greedy vertex selection by maximum residual column norm.

    Picks the column with the largest 2-norm, projects the residual onto its
    orthogonal complement, and repeats ``r`` times. Ties in the argmax go to
    the lowest column index. Raises :class:`LocateError` when the residual
    is numerically zero before ``r`` columns are found (rank below ``r``).
    """
    x = as_matrix(x)
    n, t = x.shape
    if not 0 < r <= min(n, t):
        raise ValueError(f"r={r} must be in 1..min(rows, cols)={min(n, t)}")
    scale = np.linalg.norm(x)
    b = x.copy()
    indices: list[int] = []
    for step in range(r):
        if np.linalg.norm(b) <= _RESIDUAL_FLOOR * scale:
            raise LocateError(
                f"residual vanished after extracting {step} of {r} columns"
            )
        sq = (b * b).sum(axis=0)
        p = int(np.argmax(sq))
        col = b[:, p].copy()
        b -= np.outer(col, col @ b) / sq[p]
        indices.append(p)
    return LocateResult(tuple(indices), x[:, indices].copy())


def conic_rescale(x, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Zero out low-signal columns and rescale survivors to unit 1-norm.

    Columns whose 1-norm falls strictly below ``t`` are zeroed (a column
    whose norm equals ``t`` survives, so a threshold taken from an observed
    column norm keeps that column). Returns the rescaled matrix and the
    boolean survivor mask.
    """
    x = as_matrix(x)
    norms = np.abs(x).sum(axis=0)
    keep = norms >= t
    scaled = np.zeros_like(x)
    if keep.any():
        scaled[:, keep] = x[:, keep] / norms[keep]
    return scaled, keep


def orcon_spa(x, r: int, t: float) -> LocateResult:
    """Conic locator: threshold at ``t``, rescale to the simplex, then run ``spa``.

    The rescaling projects columns from the conic hull of the sought
    templates onto their convex hull, where the greedy selection is exact on
    clean separable data for any threshold below the smallest template
    column 1-norm.
    """
    if t <= 0:
        raise ValueError("threshold t must be positive")
    scaled, keep = conic_rescale(x, t)
    survivors = int(keep.sum())
    if survivors < r:
        raise LocateError(
            f"only {survivors} columns survive threshold t={t:g}, need {r}"
        )
    result = spa(scaled, r)
    return LocateResult(result.indices, scaled[:, list(result.indices)].copy())


def precond_spa(x, r: int) -> LocateResult:
    """Whitened locator: run ``spa`` on the rank-``r`` whitened data.

    Computes the thin SVD, inverts the top ``r`` singular values, and runs
    the greedy selection on the whitened matrix; indices refer to the
    original columns. Raises :class:`LocateError` when the ``r``-th singular
    value sits at the numerical floor.
    """
    x = as_matrix(x)
    n, t = x.shape
    if not 0 < r <= min(n, t):
        raise ValueError(f"r={r} must be in 1..min(rows, cols)={min(n, t)}")
    u, s, _ = np.linalg.svd(x, full_matrices=False)
    if s[0] == 0.0 or s[r - 1] <= _SINGULAR_FLOOR * s[0]:
        raise LocateError(f"singular value {r} is numerically zero, cannot whiten")
    white = (u[:, :r] / s[:r]).T @ x
    result = spa(white, r)
    return LocateResult(result.indices, x[:, list(result.indices)].copy())


def threshold_candidates(x, epsilon_estimate: float = 0.0) -> np.ndarray:
    """Candidate thresholds derived from observed column 1-norms.

    Returns the sorted, deduplicated positive values of
    ``||x[:, p]||_1 - 2 * epsilon_estimate`` over all columns ``p``. With a
    zero noise estimate these are exactly the distinct column norms.
    """
    if epsilon_estimate < 0:
        raise ValueError("epsilon_estimate must be nonnegative")
    x = as_matrix(x)
    values = np.abs(x).sum(axis=0) - 2.0 * epsilon_estimate
    return np.unique(values[values > 0])
