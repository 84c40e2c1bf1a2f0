"""The locate-estimate-cluster-sort pipeline for convolutive factorization.

Locate finds the stacked-template columns inside the data with a separable
locator, estimate recovers their activations by nonnegative least squares,
cluster groups activation rows that are shifted copies of one another, and
sort orders each group by shift direction. The assembled model is selected
over a threshold sweep by reconstruction error. Everything here is
deterministic: all tie-breaks go to the lowest index.
"""

from __future__ import annotations

import time
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .core import CnmfModel, as_matrix, shift_right_vec, _rel_mse_arrays
from .locate import (
    LocateError,
    conic_rescale,
    orcon_spa,
    precond_spa,
    spa,
    threshold_candidates,
)
from .nnls import NnlsError, NnlsOptions, nnls_solve_gram
from .report import FitReport
from .similarity import cos_shift, shift_leq

__all__ = [
    "Clustering",
    "LagOrder",
    "LecsConfig",
    "shift_cluster",
    "spectral_cluster",
    "shift_sort",
    "assemble_factors",
    "lecs_fit",
]

# A sweep candidate below this reconstruction error is exact for all
# practical purposes; later candidates cannot improve on it meaningfully.
_SWEEP_SHORT_CIRCUIT = 1e-9
# Cap on auto-generated threshold candidates; log-spaced representatives are
# kept when the data offers more distinct column norms.
_SWEEP_CAP = 32

LOCATORS = ("spa-conic", "spa-preconditioned")


@dataclass(frozen=True)
class Clustering:
    """Disjoint groups of activation-row indices, one group per component."""

    clusters: tuple[tuple[int, ...], ...]


@dataclass(frozen=True)
class LagOrder:
    """Row indices of one cluster ordered by lag: ``pi[lag]`` is the row at that lag."""

    pi: tuple[int, ...]


@dataclass(frozen=True)
class LecsConfig:
    """Pipeline parameters.

    ``threshold`` is a single value, an explicit sweep grid, or None for the
    automatic candidate sweep derived from column norms. ``seed`` is carried
    for config parity with the stochastic fitters; the pipeline itself is
    deterministic.
    """

    k: int
    l: int
    threshold: float | Sequence[float] | None = None
    locator: str = "spa-conic"
    nnls: NnlsOptions = field(default_factory=NnlsOptions)
    clustering: str = "greedy"
    seed: int = 0

    def __post_init__(self):
        if self.k < 1 or self.l < 1:
            raise ValueError("k and l must be positive")
        if self.locator not in LOCATORS:
            raise ValueError(f"locator must be one of {LOCATORS}")
        if self.clustering not in ("greedy", "spectral"):
            raise ValueError("clustering must be 'greedy' or 'spectral'")


def shift_cluster(g, k: int, l: int) -> Clustering:
    """Greedy grouping of activation rows into ``k`` clusters of ``l`` shifts.

    Repeatedly anchors on the lowest remaining row index and pulls in the
    ``l - 1`` available rows most similar to the anchor under the windowed
    shift cosine. Always produces a partition; its quality depends on the
    separation between components.
    """
    g = as_matrix(g)
    if g.shape[0] != k * l:
        raise ValueError(f"expected {k * l} rows, got {g.shape[0]}")
    pool = list(range(k * l))
    clusters = []
    for _ in range(k):
        anchor = pool[0]
        rest = pool[1:]
        ranked = sorted(
            rest, key=lambda i: (-cos_shift(g[anchor], g[i], l).value, i)
        )
        members = [anchor] + ranked[: l - 1]
        clusters.append(tuple(sorted(members)))
        pool = [i for i in pool if i not in set(members)]
    return Clustering(tuple(clusters))


def spectral_cluster(g, k: int, l: int) -> Clustering:
    """Eigenvector-based alternative to the greedy grouping.

    Builds the pairwise shift-cosine matrix, keeps its ``k * l**2`` largest
    entries as a binary affinity, and reads one cluster off each of the top
    ``k`` eigenvectors (largest-magnitude entries, sign-oriented). A
    heuristic backend; the greedy grouping is the default.
    """
    g = as_matrix(g)
    n = k * l
    if g.shape[0] != n:
        raise ValueError(f"expected {n} rows, got {g.shape[0]}")
    sim = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            sim[i, j] = sim[j, i] = cos_shift(g[i], g[j], l).value
    cutoff = np.partition(sim.ravel(), -k * l * l)[-k * l * l]
    affinity = (sim >= cutoff).astype(float)
    eigvals, eigvecs = np.linalg.eigh(affinity)
    order = np.argsort(eigvals)[::-1][:k]
    used = np.zeros(n, dtype=bool)
    clusters = []
    for idx in order:
        vec = eigvecs[:, idx]
        peak = int(np.argmax(np.abs(vec)))
        if vec[peak] < 0:
            vec = -vec
        ranked = sorted(range(n), key=lambda i: (-abs(vec[i]), i))
        members = [i for i in ranked if not used[i]][:l]
        used[members] = True
        clusters.append(tuple(sorted(members)))
    return Clustering(tuple(clusters))


def shift_sort(g, l: int, cluster: Sequence[int]) -> LagOrder:
    """Order one cluster's rows by shift direction.

    Selection by vote count: at each step the row that compares
    less-than-or-equal to the most remaining rows goes next, which reduces
    to the comparator's total order when one exists and stays deterministic
    (lowest index wins ties) when it does not.
    """
    g = as_matrix(g)
    members = sorted(int(i) for i in cluster)
    if len(members) != l:
        raise ValueError(f"cluster must have exactly {l} members")
    leq = {
        (i, j): shift_leq(i, j, g, l)
        for i in members
        for j in members
        if i != j
    }
    order: list[int] = []
    remaining = list(members)
    while remaining:
        best = None
        best_votes = -1
        for i in remaining:
            votes = sum(leq[(i, j)] for j in remaining if j != i)
            if votes > best_votes:
                best, best_votes = i, votes
        order.append(best)
        remaining.remove(best)
    return LagOrder(tuple(order))


def assemble_factors(
    v, g, clustering: Clustering, orders: Sequence[LagOrder], t: int
) -> CnmfModel:
    """Rebuild per-lag templates and activations from located columns.

    Within each sorted cluster the rows of ``g`` are shifted copies of one
    activation but carry per-row scales inherited from the located columns;
    each row is first rescaled onto the lag-0 row (least-squares ratio
    against its shifted reference, with the inverse scale pushed into the
    matching column of ``v`` so products are preserved), then the activation
    is the de-shifted average. Near the right edge the average runs over the
    lags still in range.
    """
    v = as_matrix(v)
    g = as_matrix(g)
    k = len(clustering.clusters)
    l = len(orders[0].pi) if orders else 1
    n = v.shape[0]
    w = np.zeros((l, n, k))
    h = np.zeros((k, t))
    # number of in-range lags contributing at each column
    counts = np.minimum(l, t - np.arange(t)).astype(float)
    for kk, order in enumerate(orders):
        rows = order.pi
        base = g[rows[0]]
        acc = np.zeros(t)
        for lag, row in enumerate(rows):
            scale = 1.0
            if lag:
                ref = shift_right_vec(base, lag)
                denom = float(ref @ ref)
                if denom > 0.0:
                    est = float(g[row] @ ref) / denom
                    if est > 0.0:
                        scale = est
            aligned = g[row] / scale
            acc[: t - lag] += aligned[lag:]
            w[lag, :, kk] = v[:, row] * scale
        h[kk] = acc / counts
    return CnmfModel(w, h)


def _locate(x, r: int, t: float, locator: str):
    if locator == "spa-conic":
        return orcon_spa(x, r, t)
    scaled, keep = conic_rescale(x, t)
    if int(keep.sum()) < r:
        raise LocateError(
            f"only {int(keep.sum())} columns survive threshold t={t:g}, need {r}"
        )
    return precond_spa(scaled, r)


def _candidate_thresholds(x, config: LecsConfig) -> list[float]:
    if config.threshold is None:
        cands = threshold_candidates(x, 0.0)
        if cands.size == 0:
            raise LocateError("no positive column norms to derive thresholds from")
        if cands.size > _SWEEP_CAP:
            targets = np.geomspace(cands[0], cands[-1], _SWEEP_CAP)
            picked = cands[
                np.abs(np.log(cands)[:, None] - np.log(targets)[None, :]).argmin(
                    axis=0
                )
            ]
            cands = np.unique(picked)
        return [float(t) for t in cands]
    if np.isscalar(config.threshold):
        if config.threshold <= 0:
            raise ValueError("threshold must be positive")
        return [float(config.threshold)]
    grid = [float(t) for t in config.threshold]
    if not grid or any(t <= 0 for t in grid):
        raise ValueError("threshold grid must be nonempty and positive")
    return sorted(grid)


def _run_once(x, config: LecsConfig, t: float, timings: dict):
    started = time.perf_counter()
    located = _locate(x, config.k * config.l, t, config.locator)
    timings["locate"] = timings.get("locate", 0.0) + time.perf_counter() - started

    started = time.perf_counter()
    v = located.columns
    g, nnls_iters = nnls_solve_gram(v.T @ v, v.T @ x, config.nnls)
    timings["estimate"] = timings.get("estimate", 0.0) + time.perf_counter() - started

    started = time.perf_counter()
    cluster_fn = shift_cluster if config.clustering == "greedy" else spectral_cluster
    clustering = cluster_fn(g, config.k, config.l)
    timings["cluster"] = timings.get("cluster", 0.0) + time.perf_counter() - started

    started = time.perf_counter()
    orders = [shift_sort(g, config.l, c) for c in clustering.clusters]
    timings["sort"] = timings.get("sort", 0.0) + time.perf_counter() - started

    started = time.perf_counter()
    model = assemble_factors(v, g, clustering, orders, x.shape[1])
    error = _rel_mse_arrays(x, model.w, model.h)
    timings["assemble"] = timings.get("assemble", 0.0) + time.perf_counter() - started
    return model, error, located, nnls_iters


def lecs_fit(x, config: LecsConfig) -> tuple[CnmfModel, FitReport]:
    """Run the full pipeline, sweeping thresholds when none is fixed.

    Every candidate threshold drives one locate/estimate/cluster/sort pass;
    the model with the smallest relative reconstruction error wins (ties go
    to the smaller threshold, and the sweep stops early once a candidate is
    exact to within numerical noise). Locator and solver failures for a
    fixed threshold propagate; during a sweep they are recorded per
    candidate and only an all-candidate failure raises.
    """
    x = as_matrix(x)
    if x.size and x.min() < 0:
        raise ValueError("input matrix must be nonnegative")
    r = config.k * config.l
    if r > min(x.shape):
        raise ValueError(
            f"k*l={r} exceeds min(rows, cols)={min(x.shape)} of the input"
        )
    fit_started = time.perf_counter()
    candidates = _candidate_thresholds(x, config)
    fixed = len(candidates) == 1 and config.threshold is not None and np.isscalar(
        config.threshold
    )

    timings: dict[str, float] = {}
    sweep_log: list[dict] = []
    best = None  # (rel_mse, t, model, located, nnls_iters)
    last_error: Exception | None = None
    for t in candidates:
        try:
            model, error, located, nnls_iters = _run_once(x, config, t, timings)
        except (LocateError, NnlsError) as exc:
            if fixed:
                raise type(exc)(f"threshold t={t:g}: {exc}") from exc
            sweep_log.append({"t": t, "relMse": None, "error": str(exc)})
            last_error = exc
            continue
        sweep_log.append({"t": t, "relMse": error})
        if best is None or (error, t) < (best[0], best[1]):
            best = (error, t, model, located, nnls_iters)
        if error <= _SWEEP_SHORT_CIRCUIT:
            break
    if best is None:
        raise LocateError(
            f"all {len(candidates)} threshold candidates failed; last error: "
            f"{last_error}"
        )

    error, chosen_t, model, located, nnls_iters = best
    report = FitReport(
        algorithm="lecs" if config.locator == "spa-conic" else "lecs-pre",
        params={
            "K": config.k,
            "L": config.l,
            "locator": config.locator,
            "clustering": config.clustering,
        },
        rel_mse=error,
        stage_seconds={k: round(v, 6) for k, v in timings.items()},
        chosen_t=chosen_t,
        locator_indices=tuple(int(i) for i in located.indices),
        nnls_iterations=nnls_iters,
        seconds=time.perf_counter() - fit_started,
        sweep=sweep_log,
    )
    return model, report
