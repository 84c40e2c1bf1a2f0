"""Dense matrix primitives shared by every other module.

Column-shift algebra, convolutive reconstruction, column norms and the
relative reconstruction error. Matrices are plain 2-D float ``numpy``
arrays; shift operators are applied by index arithmetic and are never
materialized (the shift matrix acts trivially, building it would be
quadratic waste).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "CnmfModel",
    "BlockFactorization",
    "as_matrix",
    "shift_right",
    "shift_left",
    "shift_right_vec",
    "shift_left_vec",
    "reconstruct",
    "col_norm_extremes",
    "normalize_columns",
    "rel_mse",
    "block_stack",
]


def as_matrix(m) -> np.ndarray:
    """Coerce input to a 2-D float64 array (no copy when already one)."""
    a = np.asarray(m, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got ndim={a.ndim}")
    return a


def shift_right(m, tau: int) -> np.ndarray:
    """Shift the columns of ``m`` right by ``tau`` places, zero-padding on the left.

    Column ``j`` of the result equals column ``j - tau`` of ``m``; a shift of
    at least the column count yields the zero matrix.
    """
    m = as_matrix(m)
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    out = np.zeros_like(m)
    if tau < m.shape[1]:
        out[:, tau:] = m[:, : m.shape[1] - tau]
    return out


def shift_left(m, tau: int) -> np.ndarray:
    """Shift the columns of ``m`` left by ``tau`` places, zero-padding on the right."""
    m = as_matrix(m)
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    out = np.zeros_like(m)
    if tau < m.shape[1]:
        out[:, : m.shape[1] - tau] = m[:, tau:]
    return out


def shift_right_vec(v, tau: int) -> np.ndarray:
    """Shift the entries of a vector toward higher indices, zero-padding the front."""
    v = np.asarray(v, dtype=float)
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    out = np.zeros_like(v)
    if tau < v.shape[0]:
        out[tau:] = v[: v.shape[0] - tau]
    return out


def shift_left_vec(v, tau: int) -> np.ndarray:
    """Shift the entries of a vector toward lower indices, zero-padding the tail."""
    v = np.asarray(v, dtype=float)
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    out = np.zeros_like(v)
    if tau < v.shape[0]:
        out[: v.shape[0] - tau] = v[tau:]
    return out


@dataclass(frozen=True)
class CnmfModel:
    """A convolutive factor model: per-lag templates ``w`` and activations ``h``.

    ``w`` has shape ``(L, N, K)`` so that ``w[lag]`` is the ``N x K`` template
    applied at that lag; ``h`` has shape ``(K, T)``. All entries must be
    nonnegative. The modeled matrix is the sum over lags of
    ``w[lag] @ (h shifted right by lag)``.
    """

    w: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        h = np.asarray(self.h, dtype=float)
        if w.ndim != 3 or h.ndim != 2:
            raise ValueError("w must be (L, N, K) and h must be (K, T)")
        if w.shape[2] != h.shape[0]:
            raise ValueError(
                f"component mismatch: w has K={w.shape[2]}, h has K={h.shape[0]}"
            )
        if w.size and w.min() < 0 or h.size and h.min() < 0:
            raise ValueError("model factors must be nonnegative")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "h", h)

    @property
    def n_lags(self) -> int:
        return self.w.shape[0]

    @property
    def n_rows(self) -> int:
        return self.w.shape[1]

    @property
    def n_components(self) -> int:
        return self.w.shape[2]

    @property
    def n_cols(self) -> int:
        return self.h.shape[1]


@dataclass(frozen=True)
class BlockFactorization:
    """The stacked low-rank form ``v @ g`` of a convolutive model.

    ``v`` concatenates the per-lag templates column-wise and ``g`` stacks the
    shifted activation blocks; ``row_map[r]`` gives the ``(component, lag)``
    pair behind row ``r`` of ``g`` (equivalently column ``r`` of ``v``).
    """

    v: np.ndarray
    g: np.ndarray
    row_map: tuple[tuple[int, int], ...]


def block_stack(model: CnmfModel) -> BlockFactorization:
    """Flatten a convolutive model into its equivalent single product ``v @ g``."""
    L, N, K = model.w.shape
    T = model.h.shape[1]
    v = np.empty((N, K * L))
    g = np.empty((K * L, T))
    row_map = []
    for lag in range(L):
        v[:, lag * K : (lag + 1) * K] = model.w[lag]
        g[lag * K : (lag + 1) * K] = shift_right(model.h, lag)
        row_map.extend((k, lag) for k in range(K))
    return BlockFactorization(v, g, tuple(row_map))


def _reconstruct(w: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Array-level reconstruction used by the fitters (no validation)."""
    L = w.shape[0]
    T = h.shape[1]
    out = np.zeros((w.shape[1], T))
    for lag in range(L):
        if lag >= T:
            break
        out[:, lag:] += w[lag] @ h[:, : T - lag]
    return out


def reconstruct(model: CnmfModel) -> np.ndarray:
    """Sum of per-lag products ``w[lag] @ shift_right(h, lag)``.

    For a single lag this is the plain matrix product, i.e. the model
    degenerates to ordinary NMF.
    """
    return _reconstruct(model.w, model.h)


def col_norm_extremes(m, p: int) -> tuple[float, float]:
    """Maximum and minimum p-norm over the columns of ``m`` (p in {1, 2})."""
    m = as_matrix(m)
    if m.size == 0:
        raise ValueError("matrix must be nonempty")
    if p == 1:
        norms = np.abs(m).sum(axis=0)
    elif p == 2:
        norms = np.sqrt((m * m).sum(axis=0))
    else:
        raise ValueError("p must be 1 or 2")
    return float(norms.max()), float(norms.min())


def normalize_columns(m) -> tuple[np.ndarray, np.ndarray]:
    """Rescale every nonzero column to unit 1-norm.

    Returns the rescaled matrix together with the applied diagonal, whose
    entry is the reciprocal column 1-norm, or 0 for a zero column (which is
    left untouched).
    """
    m = as_matrix(m)
    if m.size and m.min() < 0:
        raise ValueError("normalize_columns expects a nonnegative matrix")
    norms = m.sum(axis=0)
    diag = np.where(norms > 0, 1.0 / np.where(norms > 0, norms, 1.0), 0.0)
    return m * diag, diag


def _rel_mse_arrays(x: np.ndarray, w: np.ndarray, h: np.ndarray) -> float:
    nx = np.linalg.norm(x)
    if nx == 0:
        raise ValueError("relative error is undefined for a zero matrix")
    return float(np.linalg.norm(x - _reconstruct(w, h)) / nx)


def rel_mse(x, model: CnmfModel) -> float:
    """Relative reconstruction error ``||x - xhat||_F / ||x||_F``."""
    return _rel_mse_arrays(as_matrix(x), model.w, model.h)
