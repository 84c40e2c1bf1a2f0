"""Heuristic convolutive-NMF fitters: multiplicative updates and alternating NNLS.

Both alternate between the per-lag templates and the shared activations.
The multiplicative rule is the Frobenius-loss majorization scheme with the
activation update averaged over lags; the alternating solver computes exact
nonnegative least-squares solutions of both subproblems, treating the
activation step as one joint solve over all of ``h`` (the lag structure
couples its columns, so per-column solves would not be exact).
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .core import CnmfModel, as_matrix, shift_left, shift_right, _reconstruct, _rel_mse_arrays
from .nnls import NnlsOptions, nnls_solve, nnls_solve_gram
from .report import FitReport
from .rng import DOMAIN_INIT, counter_stream

__all__ = ["IterOptions", "init_random_scaled", "mult_fit", "anls_fit"]

_EPS = float(np.finfo(float).eps)


@dataclass(frozen=True)
class IterOptions:
    """Iteration controls shared by both fitters."""

    max_iterations: int = 50
    seed: int = 0
    record_trace: bool = True

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


def init_random_scaled(x, k: int, l: int, seed: int) -> CnmfModel:
    """Uniform random factors rescaled to the least-squares optimal magnitude.

    Entries are drawn uniform on (0, 1); the whole model is then scaled by
    the closed-form scalar making the initial reconstruction the best
    multiple of itself fitting ``x``. The scale is applied entirely to the
    activations (any split gives the same product).
    """
    x = as_matrix(x)
    rng = counter_stream(seed, DOMAIN_INIT)
    w = rng.random((l, x.shape[0], k))
    h = rng.random((k, x.shape[1]))
    xhat = _reconstruct(w, h)
    denom = float((xhat * xhat).sum())
    alpha = float((x * xhat).sum()) / denom if denom > 0 else 0.0
    return CnmfModel(w, h * alpha)


def _resolve_init(x, k, l, opts, init):
    if init is not None:
        if init.n_components != k or init.n_lags != l:
            raise ValueError("initial model dimensions do not match k and l")
        return init.w.copy(), init.h.copy()
    model = init_random_scaled(x, k, l, opts.seed)
    return model.w, model.h


def _mu_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    # Machine-epsilon floor on the denominator; an all-zero denominator block
    # carries no gradient information, so the factor is left unchanged.
    peak = den.max() if den.size else 0.0
    if peak == 0.0:
        return np.ones_like(den)
    return num / np.maximum(den, _EPS * peak)


def mult_fit(
    x, k: int, l: int, opts: IterOptions, init: CnmfModel | None = None
) -> tuple[CnmfModel, FitReport]:
    """Averaged multiplicative updates for the Frobenius loss.

    Each sweep updates the lag templates one block at a time (refreshing the
    reconstruction in between, which keeps every sub-step monotone) and then
    the activations with numerator and denominator averaged over lags.
    """
    x = as_matrix(x)
    started = time.perf_counter()
    w, h = _resolve_init(x, k, l, opts, init)
    trace = [_rel_mse_arrays(x, w, h)] if opts.record_trace else []
    for _ in range(opts.max_iterations):
        for lag in range(l):
            xhat = _reconstruct(w, h)
            hs_t = shift_right(h, lag).T
            w[lag] *= _mu_ratio(x @ hs_t, xhat @ hs_t)
        xhat = _reconstruct(w, h)
        num = np.zeros_like(h)
        den = np.zeros_like(h)
        for lag in range(l):
            num += shift_left(w[lag].T @ x, lag)
            den += shift_left(w[lag].T @ xhat, lag)
        h *= _mu_ratio(num, den)
        if opts.record_trace:
            trace.append(_rel_mse_arrays(x, w, h))
    model = CnmfModel(w, h)
    report = FitReport(
        algorithm="mult",
        params={"K": k, "L": l, "iterations": opts.max_iterations, "seed": opts.seed},
        rel_mse=_rel_mse_arrays(x, w, h),
        loss_trace=trace,
        seconds=time.perf_counter() - started,
    )
    return model, report


def _stack_activations(h: np.ndarray, l: int) -> np.ndarray:
    return np.vstack([shift_right(h, lag) for lag in range(l)])


def _activation_gram(w: np.ndarray, x: np.ndarray):
    """Normal equations of the joint activation subproblem.

    The linear operator maps ``h`` to the lag-summed reconstruction; its
    gram matrix over the ``k * t`` unknowns is block-banded: the block at
    column offset ``d`` sums the template cross-grams at lag offset ``d``,
    with the sum truncated for output columns shifted past the right edge.
    Memory is O((k*t)^2), fine at benchmark scale.
    """
    l, n, k = w.shape
    t = x.shape[1]
    cross_grams = np.einsum("ank,bnm->abkm", w, w)  # (L, L, K, K)
    gram4 = np.zeros((k, t, k, t))
    for d in range(-(l - 1), l):
        s_lo = max(0, -d)
        s_hi = min(l - 1, l - 1 - d)
        lags = np.arange(s_lo, s_hi + 1)
        full_block = cross_grams[lags, lags + d].sum(axis=0)
        j_lo = max(0, d)
        j_hi = t - 1 + min(0, d)
        if j_lo > j_hi:
            continue
        interior_hi = min(j_hi, t - 1 - s_hi)
        if interior_hi >= j_lo:
            js = np.arange(j_lo, interior_hi + 1)
            gram4[:, js, :, js - d] = full_block[None, :, :]
        for j in range(max(j_lo, interior_hi + 1), j_hi + 1):
            in_range = lags[j + lags <= t - 1]
            block = (
                cross_grams[in_range, in_range + d].sum(axis=0)
                if in_range.size
                else np.zeros((k, k))
            )
            gram4[:, j, :, j - d] = block
    cross = np.zeros((k, t))
    for lag in range(l):
        cross += shift_left(w[lag].T @ x, lag)
    return gram4.reshape(k * t, k * t), cross.reshape(k * t, 1)


def anls_fit(
    x,
    k: int,
    l: int,
    opts: IterOptions,
    init: CnmfModel | None = None,
    nnls_options: NnlsOptions | None = None,
) -> tuple[CnmfModel, FitReport]:
    """Alternating exact nonnegative least squares.

    The template step solves ``min_{V >= 0} ||V G - X||_F`` on the stacked
    activations (via the transposed system); the activation step solves the
    joint problem over all entries of ``h`` through its structured normal
    equations. Each subproblem is solved exactly, so the loss trace is
    non-increasing by construction.
    """
    x = as_matrix(x)
    started = time.perf_counter()
    nnls_options = nnls_options or NnlsOptions()
    w, h = _resolve_init(x, k, l, opts, init)
    trace = [_rel_mse_arrays(x, w, h)] if opts.record_trace else []
    for _ in range(opts.max_iterations):
        g = _stack_activations(h, l)
        v = nnls_solve(g.T, x.T, nnls_options).T
        for lag in range(l):
            w[lag] = v[:, lag * k : (lag + 1) * k]
        gram, cross = _activation_gram(w, x)
        hvec, _ = nnls_solve_gram(gram, cross, nnls_options)
        h = hvec[:, 0].reshape(k, x.shape[1])
        if opts.record_trace:
            trace.append(_rel_mse_arrays(x, w, h))
    model = CnmfModel(w, h)
    report = FitReport(
        algorithm="anls",
        params={"K": k, "L": l, "iterations": opts.max_iterations, "seed": opts.seed},
        rel_mse=_rel_mse_arrays(x, w, h),
        loss_trace=trace,
        seconds=time.perf_counter() - started,
    )
    return model, report
