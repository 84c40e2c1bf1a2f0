import pickle
import time

import numpy as np
import pytest

from cnmf import (
    LecsConfig,
    SynthConfig,
    add_noise,
    assemble_factors,
    block_stack,
    gen_separable,
    lecs_fit,
    perm_score,
    reconstruct,
    rel_mse,
    shift_cluster,
    shift_sort,
    spectral_cluster,
    NoiseSpec,
)
from cnmf.core import shift_right


def exact_instance(seed=0, n=20, t=90, k=2, l=3):
    return gen_separable(SynthConfig(N=n, T=t, K=k, L=l, p=0.75, seed=seed))


def scrambled_blocks(gt, rng):
    """Rows of the stacked activations under a random permutation and scaling."""
    blk = block_stack(gt.model)
    perm = rng.permutation(blk.g.shape[0])
    scales = rng.uniform(0.5, 2.0, size=blk.g.shape[0])
    g = blk.g[perm] * scales[:, None]
    row_map = [blk.row_map[i] for i in perm]
    return g, row_map


def test_shift_cluster_groups_exact_shifts():
    rng = np.random.default_rng(1)
    for seed in range(5):
        gt = exact_instance(seed)
        g, row_map = scrambled_blocks(gt, rng)
        clustering = shift_cluster(g, gt.config.K, gt.config.L)
        for cluster in clustering.clusters:
            components = {row_map[i][0] for i in cluster}
            assert len(components) == 1


def test_shift_cluster_single_component():
    g = np.random.default_rng(2).random((4, 20))
    clustering = shift_cluster(g, 1, 4)
    assert clustering.clusters == ((0, 1, 2, 3),)


def test_shift_cluster_single_lag():
    g = np.random.default_rng(3).random((3, 10))
    clustering = shift_cluster(g, 3, 1)
    assert clustering.clusters == ((0,), (1,), (2,))


def test_shift_sort_recovers_lag_order():
    rng = np.random.default_rng(4)
    for seed in range(5):
        gt = exact_instance(seed)
        g, row_map = scrambled_blocks(gt, rng)
        clustering = shift_cluster(g, gt.config.K, gt.config.L)
        for cluster in clustering.clusters:
            order = shift_sort(g, gt.config.L, cluster)
            lags = [row_map[i][1] for i in order.pi]
            assert lags == sorted(lags) == list(range(gt.config.L))


def test_shift_sort_single_element():
    g = np.random.default_rng(5).random((1, 6))
    assert shift_sort(g, 1, [0]).pi == (0,)


def test_shift_sort_all_ties_deterministic():
    # constant equal rows vote identically everywhere; lowest index wins
    g = np.ones((3, 8))
    assert shift_sort(g, 3, [2, 0, 1]).pi == (0, 1, 2)


def test_assemble_reconstructs_exactly():
    rng = np.random.default_rng(6)
    for seed in range(5):
        gt = exact_instance(seed)
        g, row_map = scrambled_blocks(gt, rng)
        # the located columns consistent with the scaled rows
        blk = block_stack(gt.model)
        perm = [blk.row_map.index(rm) for rm in row_map]
        scales = np.array(
            [g[i] @ blk.g[perm[i]] / (blk.g[perm[i]] @ blk.g[perm[i]]) for i in range(len(perm))]
        )
        v = blk.v[:, perm] / scales[None, :]
        clustering = shift_cluster(g, gt.config.K, gt.config.L)
        orders = [shift_sort(g, gt.config.L, c) for c in clustering.clusters]
        model = assemble_factors(v, g, clustering, orders, gt.x.shape[1])
        assert rel_mse(gt.x, model) <= 1e-9
        score, _ = perm_score(gt.model.h, model.h)
        assert score >= 1 - 1e-9


def test_assemble_single_lag_is_permutation():
    rng = np.random.default_rng(7)
    g = rng.random((3, 12))
    v = rng.random((5, 3))
    from cnmf.lecs import Clustering, LagOrder

    clustering = Clustering(((1,), (0,), (2,)))
    orders = [LagOrder((1,)), LagOrder((0,)), LagOrder((2,))]
    model = assemble_factors(v, g, clustering, orders, 12)
    assert np.array_equal(model.h, g[[1, 0, 2]])
    assert np.array_equal(model.w[0], v[:, [1, 0, 2]])


def test_assemble_identical_shifts_average_exactly():
    h = np.array([2.0, 1, 0, 3, 0, 0, 0, 0])
    g = np.vstack([shift_right(h[None, :], lag)[0] for lag in range(3)])
    v = np.ones((4, 3))
    from cnmf.lecs import Clustering, LagOrder

    model = assemble_factors(
        v, g, Clustering(((0, 1, 2),)), [LagOrder((0, 1, 2))], 8
    )
    assert np.allclose(model.h[0], h, atol=1e-14)


def test_lecs_exact_recovery_end_to_end():
    for seed in range(6):
        gt = exact_instance(seed)
        model, report = lecs_fit(gt.x, LecsConfig(k=gt.config.K, l=gt.config.L))
        score, _ = perm_score(gt.model.h, model.h)
        assert score >= 1 - 1e-6
        assert report.rel_mse <= 1e-9
        assert report.chosen_t is not None
        assert len(report.locator_indices) == gt.config.K * gt.config.L


def test_lecs_fixed_threshold():
    gt = exact_instance(1)
    cands = sorted(np.abs(gt.x).sum(axis=0))
    t = float(min(c for c in cands if c > 0))
    model, report = lecs_fit(gt.x, LecsConfig(k=2, l=3, threshold=t))
    assert report.chosen_t == t
    assert rel_mse(gt.x, model) <= 1e-9


def test_lecs_explicit_grid():
    gt = exact_instance(2)
    norms = np.abs(gt.x).sum(axis=0)
    grid = [float(norms[norms > 0].min()), float(norms.max() * 2)]
    model, report = lecs_fit(gt.x, LecsConfig(k=2, l=3, threshold=grid))
    assert report.rel_mse <= 1e-9
    assert any(entry.get("relMse") is None for entry in report.sweep) or len(
        report.sweep
    ) <= 2


def test_lecs_preconditioned_locator():
    for seed in range(3):
        gt = exact_instance(seed)
        model, report = lecs_fit(
            gt.x, LecsConfig(k=2, l=3, locator="spa-preconditioned")
        )
        score, _ = perm_score(gt.model.h, model.h)
        assert score >= 1 - 1e-6
        assert report.algorithm == "lecs-pre"


def test_lecs_single_lag_degenerates_to_separable_nmf():
    gt = gen_separable(SynthConfig(N=15, T=60, K=3, L=1, p=0.6, seed=4))
    model, report = lecs_fit(gt.x, LecsConfig(k=3, l=1))
    score, _ = perm_score(gt.model.h, model.h)
    assert score >= 1 - 1e-6
    assert report.rel_mse <= 1e-9


def test_lecs_low_noise_recovery():
    gt = exact_instance(3, n=40, t=120, k=2, l=3)
    xn = add_noise(gt.x, NoiseSpec("uniform", 1e-3, seed=9))
    model, _ = lecs_fit(xn, LecsConfig(k=2, l=3))
    score, _ = perm_score(gt.model.h, model.h)
    assert score >= 0.999


def test_lecs_deterministic():
    gt = exact_instance(5)
    xn = add_noise(gt.x, NoiseSpec("uniform", 1e-2, seed=1))
    out1 = lecs_fit(xn, LecsConfig(k=2, l=3))
    out2 = lecs_fit(xn.copy(), LecsConfig(k=2, l=3))
    assert np.array_equal(out1[0].w, out2[0].w)
    assert np.array_equal(out1[0].h, out2[0].h)
    assert out1[1].chosen_t == out2[1].chosen_t
    assert pickle.dumps((out1[0].w, out1[0].h)) == pickle.dumps(
        (out2[0].w, out2[0].h)
    )


def test_lecs_output_nonnegative():
    gt = exact_instance(6)
    xn = add_noise(gt.x, NoiseSpec("exponential", 0.05, seed=2))
    model, _ = lecs_fit(xn, LecsConfig(k=2, l=3))
    assert model.w.min() >= 0
    assert model.h.min() >= 0


def test_lecs_validates_dimensions():
    with pytest.raises(ValueError):
        lecs_fit(np.ones((4, 5)), LecsConfig(k=3, l=2))
    with pytest.raises(ValueError):
        lecs_fit(-np.ones((6, 6)), LecsConfig(k=2, l=2))
    with pytest.raises(ValueError):
        LecsConfig(k=2, l=2, locator="nope")


def test_spectral_cluster_backend():
    rng = np.random.default_rng(8)
    gt = exact_instance(7)
    g, row_map = scrambled_blocks(gt, rng)
    clustering = spectral_cluster(g, gt.config.K, gt.config.L)
    sizes = sorted(len(c) for c in clustering.clusters)
    covered = sorted(i for c in clustering.clusters for i in c)
    assert sizes == [gt.config.L] * gt.config.K
    assert covered == list(range(gt.config.K * gt.config.L))
    for cluster in clustering.clusters:
        assert len({row_map[i][0] for i in cluster}) == 1


def test_spectral_backend_through_pipeline():
    gt = exact_instance(8)
    model, _ = lecs_fit(gt.x, LecsConfig(k=2, l=3, clustering="spectral"))
    score, _ = perm_score(gt.model.h, model.h)
    assert score >= 1 - 1e-6


def test_cluster_sort_scaling_smoke():
    # doubling the column count should not triple cluster+sort time
    rng = np.random.default_rng(9)

    def stage_time(t):
        gt = gen_separable(SynthConfig(N=10, T=t, K=3, L=4, p=0.75, seed=11))
        g, _ = scrambled_blocks(gt, rng)
        best = np.inf
        for _ in range(3):
            begin = time.perf_counter()
            clustering = shift_cluster(g, 3, 4)
            for c in clustering.clusters:
                shift_sort(g, 4, c)
            best = min(best, time.perf_counter() - begin)
        return best

    small = stage_time(2000)
    large = stage_time(4000)
    assert large < 3.0 * small + 0.05
