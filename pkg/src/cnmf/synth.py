"""Synthetic convolutive-separable instances and the benchmark noise models.

The generator plants, for every component, two anchor neighborhoods inside a
sparse random activation matrix: zeroing a window around each anchor makes
every lag of every template appear somewhere as a positively scaled data
column, which is exactly the structure the locate step needs. Instances with
a degenerate shift-similarity margin or a near-singular stacked template are
rejected and redrawn.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CnmfModel, as_matrix, shift_right_vec, _reconstruct
from .rng import DOMAIN_INSTANCE, DOMAIN_NOISE, counter_stream

__all__ = [
    "SynthConfig",
    "NoiseSpec",
    "GroundTruth",
    "GenerationError",
    "gen_separable",
    "add_noise",
    "noise_grid",
]

NOISE_KINDS = ("uniform", "gaussian", "exponential")

# Rejection thresholds for degenerate draws.
_MIN_MARGIN = 1e-3
_MIN_SINGULAR = 1e-8
_MAX_INSTANCE_ATTEMPTS = 64
_MAX_PLACEMENT_ATTEMPTS = 1000


class GenerationError(RuntimeError):
    """The requested configuration could not produce a valid instance."""


@dataclass(frozen=True)
class SynthConfig:
    """Instance dimensions, activation sparsity and seed."""

    N: int
    T: int
    K: int
    L: int
    p: float = 0.75
    seed: int = 0

    def __post_init__(self):
        if min(self.N, self.T, self.K, self.L) < 1:
            raise ValueError("all dimensions must be positive")
        if not 0.0 <= self.p < 1.0:
            raise ValueError("sparsity p must be in [0, 1)")
        if self.T < 2 * self.K * (2 * self.L + 1):
            raise ValueError(
                f"T={self.T} leaves no room for {2 * self.K} disjoint anchor "
                f"windows of half-width {self.L}; need T >= "
                f"{2 * self.K * (2 * self.L + 1)}"
            )


@dataclass(frozen=True)
class NoiseSpec:
    """Additive noise description: kind, magnitude and stream seed."""

    kind: str
    beta: float
    seed: int = 0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"kind must be one of {NOISE_KINDS}")
        if self.beta <= 0:
            raise ValueError("beta must be positive")


@dataclass(frozen=True)
class GroundTruth:
    """A generated instance: exact factors, their reconstruction and provenance.

    ``t_anchors``/``s_anchors`` are the per-component anchor positions;
    ``delta`` is the realized shift-similarity margin (1 minus the largest
    cosine between distinct shifted activation rows, shifts up to twice the
    lag count, truncated alignments included).
    """

    config: SynthConfig
    model: CnmfModel
    x: np.ndarray
    t_anchors: tuple[int, ...]
    s_anchors: tuple[int, ...]
    delta: float

    def anchor_columns(self) -> dict[tuple[int, int], int]:
        """Map from (component, lag) to the data column carrying that template column."""
        l = self.config.L
        out = {}
        for k in range(self.config.K):
            for lag in range(l):
                base = self.t_anchors[k] if lag <= l // 2 else self.s_anchors[k]
                out[(k, lag)] = base + lag
        return out


def _place_anchors(rng, t: int, l: int, k: int) -> np.ndarray:
    """2k anchor positions with pairwise gap at least 3l + 2, by rejection."""
    min_gap = 3 * l + 2
    for _ in range(_MAX_PLACEMENT_ATTEMPTS):
        pos = rng.integers(0, t - l + 1, size=2 * k)
        ordered = np.sort(pos)
        if pos.size == 1 or np.diff(ordered).min() >= min_gap:
            return pos
    raise GenerationError(
        f"could not place {2 * k} anchor windows with gap {min_gap} in "
        f"{t} columns after {_MAX_PLACEMENT_ATTEMPTS} tries; increase T"
    )


def _shift_margin(h: np.ndarray, l: int) -> float:
    """1 minus the largest cosine between distinct shifted activation rows.

    Shifts run up to ``2l - 1`` in both roles so the margin also covers the
    truncated alignments seen by the clustering and sorting steps.
    """
    k, t = h.shape
    width = 2 * l
    shifted = np.zeros((k, width, t))
    for i in range(k):
        for a in range(width):
            shifted[i, a] = shift_right_vec(h[i], a)
    flat = shifted.reshape(k * width, t)
    norms = np.linalg.norm(flat, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    cosines = (flat @ flat.T) / np.outer(safe, safe)
    cosines[norms == 0, :] = 0.0
    cosines[:, norms == 0] = 0.0
    np.fill_diagonal(cosines, -1.0)
    return 1.0 - float(cosines.max())


def gen_separable(config: SynthConfig) -> GroundTruth:
    """Draw a convolutive-separable instance with verified anchor structure.

    Template entries are uniform on (0.5, 1.5); activations are uniform on
    (0, 1) masked by a Bernoulli(1 - p) draw. For each component two anchor
    positions are chosen, the surrounding activation columns are zeroed
    (window reaching ``l`` back and ``l // 2`` forward around the first
    anchor, mirrored for the second) and the anchors themselves redrawn
    uniform on (0.5, 1.5), so that every lag of every template shows up as a
    scaled data column. Draws failing the margin or rank checks are
    rejected; anchor placement failure signals an infeasible configuration.
    """
    n, t, k, l = config.N, config.T, config.K, config.L
    for attempt in range(_MAX_INSTANCE_ATTEMPTS):
        rng = counter_stream(config.seed, DOMAIN_INSTANCE, attempt)
        w = rng.uniform(0.5, 1.5, size=(l, n, k))
        h = rng.random((k, t)) * (rng.random((k, t)) < (1.0 - config.p))

        positions = _place_anchors(rng, t, l, k)
        t_anchors = positions[:k]
        s_anchors = positions[k:]
        for kk in range(k):
            lo = max(0, t_anchors[kk] - l)
            hi = min(t - 1, t_anchors[kk] + l // 2)
            h[:, lo : hi + 1] = 0.0
            lo = max(0, s_anchors[kk] - l // 2)
            hi = min(t - 1, s_anchors[kk] + l)
            h[:, lo : hi + 1] = 0.0
        anchor_values = rng.uniform(0.5, 1.5, size=(k, 2))
        for kk in range(k):
            h[kk, t_anchors[kk]] = anchor_values[kk, 0]
            h[kk, s_anchors[kk]] = anchor_values[kk, 1]

        delta = _shift_margin(h, l)
        if delta <= _MIN_MARGIN:
            continue
        v = w.transpose(1, 0, 2).reshape(n, l * k)
        if np.linalg.svd(v, compute_uv=False)[-1] <= _MIN_SINGULAR:
            continue

        x = _reconstruct(w, h)
        gt = GroundTruth(
            config=config,
            model=CnmfModel(w, h),
            x=x,
            t_anchors=tuple(int(a) for a in t_anchors),
            s_anchors=tuple(int(a) for a in s_anchors),
            delta=float(delta),
        )
        _check_anchors(gt)
        return gt
    raise GenerationError(
        f"no acceptable instance after {_MAX_INSTANCE_ATTEMPTS} attempts "
        f"(seed={config.seed})"
    )


def _check_anchors(gt: GroundTruth) -> None:
    """Every planted anchor column must be the advertised scaled template column."""
    h = gt.model.h
    for (k, lag), col in gt.anchor_columns().items():
        anchor = gt.t_anchors[k] if lag <= gt.config.L // 2 else gt.s_anchors[k]
        expected = gt.model.w[lag, :, k] * h[k, anchor]
        if not np.allclose(gt.x[:, col], expected, rtol=1e-12, atol=0.0):
            raise GenerationError(
                f"anchor column check failed for component {k}, lag {lag}"
            )


def add_noise(x, spec: NoiseSpec) -> np.ndarray:
    """Additive noise per the named model; deterministic given the spec's seed.

    uniform: entries uniform on (0, beta). gaussian: normal(0, beta) clamped
    from below so the result stays nonnegative. exponential: mean-beta
    exponential drawn by inverse CDF from the same counter stream. The three
    kinds use disjoint stream domains, so they are independent even under a
    shared seed.
    """
    x = as_matrix(x)
    if x.size and x.min() < 0:
        raise ValueError("add_noise expects a nonnegative matrix")
    rng = counter_stream(spec.seed, DOMAIN_NOISE, NOISE_KINDS.index(spec.kind))
    if spec.kind == "uniform":
        e = spec.beta * rng.random(x.shape)
    elif spec.kind == "gaussian":
        e = np.maximum(-x, rng.normal(0.0, spec.beta, size=x.shape))
    else:
        e = -spec.beta * np.log1p(-rng.random(x.shape))
    return x + e


def noise_grid() -> np.ndarray:
    """The 13 benchmark noise magnitudes, log-spaced from 1e-3 to 1e3."""
    return np.logspace(-3.0, 3.0, 13)
