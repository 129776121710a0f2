from __future__ import annotations

import math

import numpy as np
import pytest

from tims import lfd
from tims.lfd import (
    DegenerateDemoError,
    Demonstration,
    DemonstrationSet,
    ExtrapolationError,
    GprHyperparams,
    GuidePath,
    dedup_consecutive,
    fit,
    predict,
    preprocess,
    resample_arclength,
)


# ---------------------------------------------------------------------------
# preprocessing

def test_dedup_drops_consecutive_duplicates_and_keeps_endpoints():
    raw = np.array([[0, 0, 0], [0, 0, 0], [10, 0, 0]], dtype=float)
    demo = preprocess(raw, n=2)
    assert np.allclose(demo.points, [[0, 0, 0], [10, 0, 0]])


def test_resample_straight_segment_uniform():
    raw = np.linspace([0, 0, 0], [10, 0, 0], 137)
    demo = preprocess(raw, n=5)
    assert np.allclose(demo.points[:, 0], [0.0, 2.5, 5.0, 7.5, 10.0])
    assert np.allclose(demo.points[:, 1:], 0.0)


def test_resample_preserves_endpoints_exactly():
    rng = np.random.default_rng(3)
    raw = np.cumsum(rng.normal(0, 10, (50, 3)), axis=0)
    demo = preprocess(raw, n=17)
    assert np.array_equal(demo.points[0], raw[0])
    assert np.array_equal(demo.points[-1], raw[-1])


def test_resample_quarter_circle_equal_chords():
    theta = np.linspace(0.0, math.pi / 2.0, 1000)
    raw = np.column_stack([
        10000.0 * np.cos(theta), 10000.0 * np.sin(theta), np.zeros_like(theta)])
    demo = preprocess(raw, n=10)
    chords = np.linalg.norm(np.diff(demo.points, axis=0), axis=1)
    assert chords.max() / chords.min() < 1.01


def test_preprocess_rejects_degenerate_demo():
    raw = np.array([[5, 5, 5], [5, 5, 5]], dtype=float)
    with pytest.raises(DegenerateDemoError):
        preprocess(raw, n=4)


def test_preprocess_rejects_non_finite_and_small_n():
    with pytest.raises(ValueError):
        preprocess(np.array([[0, 0, 0], [float("nan"), 0, 0]]), n=4)
    with pytest.raises(ValueError):
        preprocess(np.array([[0, 0, 0], [1, 0, 0]], dtype=float), n=1)


def test_dedup_tolerance_is_componentwise():
    raw = np.array([[0, 0, 0], [5e-7, 5e-7, 5e-7], [1, 0, 0]], dtype=float)
    kept = dedup_consecutive(raw)
    assert len(kept) == 2


def test_resample_zero_arclength_raises():
    with pytest.raises(DegenerateDemoError):
        resample_arclength(np.zeros((4, 3)), 5)


def test_demo_set_requires_uniform_length():
    a = preprocess(np.linspace([0, 0, 0], [10, 0, 0], 30), n=20)
    b = preprocess(np.linspace([0, 0, 0], [10, 0, 0], 30), n=30)
    with pytest.raises(ValueError):
        DemonstrationSet(demos=[a, b], resample_count=20).validate()


# ---------------------------------------------------------------------------
# GPR against a dense-solve oracle

def _dense_gp_oracle(demos_pts, hyp, tq):
    """Full replicated-system GP: explicit kernel, plain linear solve.

    Independent reimplementation used as ground truth: inputs are the
    demo indices replicated once per demo, targets the raw coordinates,
    centered on their mean which is added back to the posterior mean.
    """
    m, n, _ = demos_pts.shape
    t_full = np.tile(np.arange(n, dtype=float), m)
    means, variances = [], []
    for axis in range(3):
        y_full = demos_pts[:, :, axis].reshape(-1)
        offset = y_full.mean()
        yc = y_full - offset
        k_full = np.empty((m * n, m * n))
        for i in range(m * n):
            for j in range(m * n):
                d = t_full[i] - t_full[j]
                k_full[i, j] = hyp.signal_variance * math.exp(
                    -(d * d) / (2.0 * hyp.length_scale ** 2))
        a = k_full + hyp.noise_variance * np.eye(m * n)
        sol = np.linalg.solve(a, yc)
        mean_q = np.empty(len(tq))
        var_q = np.empty(len(tq))
        for qi, t in enumerate(tq):
            ks = np.array([
                hyp.signal_variance * math.exp(
                    -((t - ti) ** 2) / (2.0 * hyp.length_scale ** 2))
                for ti in t_full])
            mean_q[qi] = offset + ks @ sol
            var_q[qi] = hyp.signal_variance - ks @ np.linalg.solve(a, ks)
        means.append(mean_q)
        variances.append(var_q)
    return np.array(means), np.array(variances)


def _close_rel(a, b, rtol=1e-9):
    return abs(a - b) <= rtol * max(1.0, abs(a), abs(b))


def test_posterior_matches_dense_oracle_small_n():
    rng = np.random.default_rng(17)
    hyp = GprHyperparams(length_scale=2.0, signal_variance=500.0, noise_variance=4.0)
    for n in (3, 5, 8):
        for m in (1, 3):
            pts = rng.normal(0.0, 300.0, (m, n, 3))
            demos = DemonstrationSet(
                demos=[Demonstration(points=pts[i]) for i in range(m)],
                resample_count=n)
            model, _ = fit(demos, hyperparams=hyp)
            tq = np.concatenate([np.arange(n, dtype=float), [0.5, n - 1.5]])
            want_mean, want_var = _dense_gp_oracle(pts, hyp, tq)
            for axis in range(3):
                got_mean, got_var = model.axes[axis].predict(tq)
                for q in range(len(tq)):
                    assert _close_rel(got_mean[q], want_mean[axis][q])
                    assert _close_rel(got_var[q], want_var[axis][q])


def test_noiseless_straight_line_is_interpolated():
    raw = np.linspace([0, 0, 0], [10000, 500, -300], 40)
    demo = preprocess(raw, n=40)
    demos = DemonstrationSet(demos=[demo], resample_count=40)
    _model, guide = fit(demos)
    assert np.max(np.abs(guide.points - demo.points)) < 1e-3


def test_interpolation_limit_tiny_noise_single_demo():
    rng = np.random.default_rng(5)
    raw = np.cumsum(rng.normal(0, 50, (30, 3)), axis=0)
    demo = preprocess(raw, n=30)
    demos = DemonstrationSet(demos=[demo], resample_count=30)
    hyp = GprHyperparams(length_scale=1.2, signal_variance=1e6, noise_variance=1e-9)
    _model, guide = fit(demos, hyperparams=hyp)
    assert np.max(np.abs(guide.points - demo.points)) < 1e-6


def _s_curve(n):
    s = np.linspace(0.0, 1.0, n)
    return np.column_stack([
        20000.0 * s,
        4000.0 * np.sin(2.0 * math.pi * s),
        1500.0 * np.cos(math.pi * s),
    ])


def test_noisy_s_curve_mean_recovers_truth():
    n = 200
    truth = _s_curve(n)
    rng = np.random.default_rng(42)
    demos = DemonstrationSet(
        demos=[Demonstration(points=truth + rng.normal(0.0, 50.0, truth.shape))
               for _ in range(10)],
        resample_count=n)
    _model, guide = fit(demos)
    rmse = math.sqrt(float(np.mean(np.sum((guide.points - truth) ** 2, axis=1))))
    assert rmse <= 100.0


def test_near_identical_demos_give_tight_ci():
    n = 200
    truth = _s_curve(n)
    rng = np.random.default_rng(9)
    demos = DemonstrationSet(
        demos=[Demonstration(points=truth + rng.normal(0.0, 10.0, truth.shape))
               for _ in range(10)],
        resample_count=n)
    _model, guide = fit(demos)
    assert float(np.max(guide.ci_halfwidth)) <= 1000.0


def test_posterior_invariant_under_demo_permutation():
    rng = np.random.default_rng(23)
    truth = _s_curve(50)
    noisy = [truth + rng.normal(0.0, 30.0, truth.shape) for _ in range(4)]
    a = DemonstrationSet(demos=[Demonstration(points=p) for p in noisy],
                         resample_count=50)
    b = DemonstrationSet(demos=[Demonstration(points=p) for p in reversed(noisy)],
                         resample_count=50)
    hyp = GprHyperparams(length_scale=4.0, signal_variance=1e6, noise_variance=100.0)
    _ma, ga = fit(a, hyperparams=hyp)
    _mb, gb = fit(b, hyperparams=hyp)
    assert np.allclose(ga.points, gb.points, atol=1e-9)
    assert np.allclose(ga.ci_halfwidth, gb.ci_halfwidth, atol=1e-9)


def test_predict_midpoint_of_linear_data_is_mean_of_neighbors():
    raw = np.linspace([0, 0, 0], [900, 0, 0], 10)
    demo = preprocess(raw, n=10)
    demos = DemonstrationSet(demos=[demo], resample_count=10)
    model, _ = fit(demos)
    mean, _ci = predict(model, 4.5)
    left, right = demo.points[4, 0], demo.points[5, 0]
    assert abs(mean.x - (left + right) / 2.0) <= 0.01 * abs((left + right) / 2.0)


def test_variance_smaller_at_training_index_than_between():
    raw = np.linspace([0, 0, 0], [900, 0, 0], 10)
    demos = DemonstrationSet(demos=[preprocess(raw, n=10)], resample_count=10)
    hyp = GprHyperparams(length_scale=0.8, signal_variance=1e4, noise_variance=1.0)
    model, _ = fit(demos, hyperparams=hyp)
    at_indices = model.axes[0].predict(np.arange(10, dtype=float))[1]
    at_midpoints = model.axes[0].predict(np.arange(9, dtype=float) + 0.5)[1]
    assert at_indices.max() <= at_midpoints.max()


def test_predict_rejects_extrapolation():
    raw = np.linspace([0, 0, 0], [900, 0, 0], 10)
    demos = DemonstrationSet(demos=[preprocess(raw, n=10)], resample_count=10)
    model, _ = fit(demos)
    with pytest.raises(ExtrapolationError):
        predict(model, -0.5)
    with pytest.raises(ExtrapolationError):
        predict(model, 9.5)


def test_posterior_variance_bounded_by_prior():
    rng = np.random.default_rng(31)
    pts = rng.normal(0, 200, (3, 12, 3))
    demos = DemonstrationSet(
        demos=[Demonstration(points=pts[i]) for i in range(3)], resample_count=12)
    hyp = GprHyperparams(length_scale=2.0, signal_variance=900.0, noise_variance=25.0)
    model, _ = fit(demos, hyperparams=hyp)
    tq = np.linspace(0.0, 11.0, 45)
    for gp in model.axes:
        _mu, var = gp.predict(tq)
        assert np.all(var >= 0.0)
        assert np.all(var <= hyp.signal_variance + hyp.noise_variance + 1e-9)


def test_guidepath_validation_and_round_trip(tmp_path):
    guide = GuidePath(points=np.zeros((4, 3)), ci_halfwidth=np.ones((4, 3)))
    path = tmp_path / "guide.json"
    lfd.save_guidepath(path, guide)
    loaded = lfd.load_guidepath(path)
    assert np.array_equal(loaded.points, guide.points)
    assert np.array_equal(loaded.ci_halfwidth, guide.ci_halfwidth)
    with pytest.raises(ValueError):
        GuidePath(points=np.zeros((4, 3)), ci_halfwidth=-np.ones((4, 3)))
    with pytest.raises(ValueError):
        GuidePath(points=np.zeros((4, 3)), ci_halfwidth=np.ones((3, 3)))


def test_demo_file_round_trip(tmp_path):
    raw = np.linspace([0, 0, 0], [10, 20, 30], 25)
    demo = preprocess(raw, n=25, source_id="d0")
    path = tmp_path / "demo.jsonl"
    lfd.save_demo(path, demo)
    pts, source_id = lfd.load_demo_points(path)
    assert source_id == "d0"
    assert np.allclose(pts, demo.points)
