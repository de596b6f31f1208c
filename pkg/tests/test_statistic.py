import numpy as np
import pytest

from sncp.core import TimeSeries, Window
from sncp.functionals import FunctionalSpec, precompute
from sncp.statistic import (
    contrast,
    local_profile,
    max_window_statistic,
    nested_profile,
    self_normalizer,
    single_cp_profile,
    t_statistic,
    window_components,
    window_grid,
)

from oracles import naive_grid, naive_max_window, naive_window

MEAN = FunctionalSpec.mean()


def _state(data, spec=MEAN):
    return precompute(TimeSeries(np.asarray(data, dtype=float)), spec)


class TestContrast:
    def test_step_series_exact(self):
        # (3*3/6^1.5) * (0 - 1) computed directly from the definition
        state = _state([0, 0, 0, 1, 1, 1])
        got = contrast(state, 1, 3, 6)
        assert got[0] == pytest.approx(-9.0 / 6.0**1.5, rel=1e-12)
        assert got[0] == pytest.approx(-0.6123724356957945, rel=1e-12)

    def test_constant_series_zero(self):
        state = _state(np.ones(12))
        assert contrast(state, 2, 6, 11)[0] == 0.0

    def test_random_matches_two_sample_recomputation(self):
        rng = np.random.default_rng(0)
        data = rng.standard_normal(50)
        state = _state(data)
        t1, k, t2 = 5, 20, 40
        direct = (
            (k - t1 + 1) * (t2 - k) / (t2 - t1 + 1) ** 1.5
            * (data[t1 - 1 : k].mean() - data[k : t2].mean())
        )
        assert contrast(state, t1, k, t2)[0] == pytest.approx(direct, rel=1e-10)


class TestSelfNormalizer:
    def test_constant_series_zero_matrices(self):
        state = _state(np.full(10, 3.3))
        L, R, V = self_normalizer(state, 1, 5, 10)
        assert np.all(L == 0) and np.all(R == 0) and np.all(V == 0)

    def test_boundary_weights_vanish(self):
        # window (1, 1, 2): every sum term carries weight zero
        state = _state([0.0, 1.0])
        L, R, V = self_normalizer(state, 1, 1, 2)
        assert np.all(V == 0)

    def test_matches_naive_double_loop(self):
        rng = np.random.default_rng(1)
        data = rng.standard_normal((30, 1))
        state = _state(data)
        _, Lo, Ro, Vo, _ = naive_window(data, MEAN, 1, 15, 30)
        L, R, V = self_normalizer(state, 1, 15, 30)
        np.testing.assert_allclose(L, Lo, rtol=1e-10)
        np.testing.assert_allclose(R, Ro, rtol=1e-10)
        np.testing.assert_allclose(V, Vo, rtol=1e-10)


class TestTStatistic:
    def test_scalar(self):
        assert t_statistic(np.array([2.0]), np.array([[4.0]])) == pytest.approx(1.0)

    def test_zero_contrast(self):
        assert t_statistic(np.zeros(2), np.eye(2)) == pytest.approx(0.0)

    def test_zero_normalizer_invalid(self):
        assert t_statistic(np.array([1.0]), np.array([[0.0]])) is None
        assert t_statistic(np.ones(3), np.zeros((3, 3))) is None

    def test_degenerate_contrast_invalid(self):
        assert t_statistic(np.array([np.nan]), np.array([[1.0]])) is None

    def test_non_psd_invalid(self):
        V = np.array([[1.0, 2.0], [2.0, 1.0]])  # indefinite
        assert t_statistic(np.ones(2), V) is None


class TestWindowGrid:
    def test_grid_size_and_smallest(self):
        grid = window_grid(50, 1, 100, 5, 100)
        assert len(grid) == 100
        assert (46, 55) in grid
        assert grid[0] == (46, 55)  # lexicographic (j1, j2) order

    def test_empty_below_h(self):
        assert window_grid(3, 1, 100, 5, 100) == []
        assert max_window_statistic(_state(np.arange(100.0)), 3, 1, 100, 5) == (0.0, None)

    def test_matches_naive_enumeration(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            n = int(rng.integers(20, 120))
            h = int(rng.integers(2, 12))
            k = int(rng.integers(1, n))
            s = int(rng.integers(1, k + 1))
            e = int(rng.integers(k, n + 1))
            assert window_grid(k, s, e, h, n) == naive_grid(k, s, e, h, n)


class TestMaxWindowStatistic:
    def test_all_invalid_gives_zero_none(self):
        state = _state(np.ones(40))
        assert max_window_statistic(state, 20, 1, 40, 5) == (0.0, None)

    def test_step_exceeds_threshold(self):
        rng = np.random.default_rng(3)
        data = np.concatenate([np.zeros(100), np.full(100, 2.0)]) + 0.3 * rng.standard_normal(200)
        state = _state(data)
        t, win = max_window_statistic(state, 100, 1, 200, 10)
        assert t > 141.9
        assert win is not None and win.t1 <= 100 < win.t2

    def test_matches_naive(self):
        rng = np.random.default_rng(4)
        data = rng.standard_normal((60, 1)) + (np.arange(60) >= 30)[:, None]
        state = _state(data)
        for k in (12, 30, 47):
            t, win = max_window_statistic(state, k, 1, 60, 6)
            to, wo = naive_max_window(data, MEAN, k, 1, 60, 6)
            assert t == pytest.approx(to, rel=1e-9)
            got = None if win is None else (win.t1, win.t2)
            assert got == wo


@pytest.mark.parametrize(
    "spec,p",
    [
        (FunctionalSpec.mean(), 1),
        (FunctionalSpec.mean(), 3),
        (FunctionalSpec.variance(), 1),
        (FunctionalSpec.correlation(1, 2), 2),
        (FunctionalSpec.autocovariance(1, 2), 1),
        (FunctionalSpec.quantile(0.4), 1),
        (FunctionalSpec.covariance_matrix(), 2),
        (FunctionalSpec.multi([FunctionalSpec.variance(), FunctionalSpec.quantile(0.8)]), 1),
    ],
)
class TestEngineOracleEquivalence:
    """The fast profiles must match both the per-window reference API and
    the from-scratch naive implementation."""

    def test_profiles(self, spec, p):
        rng = np.random.default_rng(abs(hash((spec.kind, p))) % 2**31)
        data = rng.standard_normal((70, p))
        data[40:] += 0.8
        state = precompute(TimeSeries(data), spec)
        h = 8
        stats, wins = nested_profile(state, 1, 70, h)
        for k in range(1, 71):
            tref, wref = max_window_statistic(state, k, 1, 70, h)
            assert stats[k - 1] == pytest.approx(tref, rel=1e-9, abs=1e-12)
        # spot-check the reference API against the naive double loop
        for k in (20, 40, 55):
            to, _ = naive_max_window(data, spec, k, 1, 70, h, state.eff_start)
            assert stats[k - 1] == pytest.approx(to, rel=1e-8, abs=1e-10)

    def test_single_cp(self, spec, p):
        rng = np.random.default_rng(abs(hash((p, spec.kind))) % 2**31)
        data = rng.standard_normal((50, p))
        data[25:] *= 1.7
        state = precompute(TimeSeries(data), spec)
        prof = single_cp_profile(state, 1, 50)
        for k in (5, 17, 33, 46):
            want = naive_window(data, spec, max(1, state.eff_start), k, 50)[4]
            assert prof[k - 1] == pytest.approx(want if want is not None else 0.0, rel=1e-8, abs=1e-10)


class TestInvariances:
    def test_affine_invariance_mean(self):
        rng = np.random.default_rng(5)
        data = rng.standard_normal((60, 3))
        A = rng.standard_normal((3, 3)) + 3 * np.eye(3)
        b = rng.standard_normal(3)
        s1 = _state(data)
        s2 = _state(data @ A.T + b)
        for (t1, k, t2) in [(3, 20, 50), (10, 30, 40), (1, 45, 60)]:
            c1 = window_components(s1, t1, k, t2)
            c2 = window_components(s2, t1, k, t2)
            if c1.T is None:
                assert c2.T is None
            else:
                assert c2.T == pytest.approx(c1.T, rel=1e-8)

    def test_time_reversal_symmetry(self):
        rng = np.random.default_rng(6)
        data = rng.standard_normal(40)
        s1 = _state(data)
        s2 = _state(data[::-1].copy())
        n = 40
        for (t1, k, t2) in [(2, 15, 35), (5, 20, 30), (1, 10, 40)]:
            a = window_components(s1, t1, k, t2).T
            b = window_components(s2, n + 1 - t2, n - k, n + 1 - t1).T
            assert a == pytest.approx(b, rel=1e-9)

    def test_monotone_nesting(self):
        rng = np.random.default_rng(7)
        data = rng.standard_normal(90)
        state = _state(data)
        h = 9
        for k in range(h, 90 - h + 1, 7):
            t_max, _ = max_window_statistic(state, k, 1, 90, h)
            t_small = window_components(state, k - h + 1, k, k + h).T or 0.0
            assert t_max >= t_small - 1e-12

    def test_psd_normalizers(self):
        rng = np.random.default_rng(8)
        data = rng.standard_normal((50, 2))
        state = _state(data)
        for (t1, k, t2) in [(1, 25, 50), (5, 10, 45), (20, 30, 44)]:
            _, _, V = self_normalizer(state, t1, k, t2)
            evals = np.linalg.eigvalsh(V)
            assert evals.min() >= -1e-10 * max(np.trace(V), 1e-30)


class TestWindowTieBreak:
    def test_exact_tie_prefers_lexicographically_smallest(self):
        # engineered bitwise tie: windows (1,2) and (2,1) share the same
        # contrast and normalizer and jointly dominate (1,1) and (2,2)
        from sncp.statistic import _combine

        SL = np.array([100.0, 0.01]).reshape(1, 2, 1, 1)
        SR = SL.copy()
        thL = np.array([1.0, 0.0]).reshape(1, 2, 1)
        thR = np.array([-1.0, 0.0]).reshape(1, 2, 1)
        t, bj1, bj2 = _combine(SL, SR, thL, thR, h=5)
        assert t[0] > 0
        assert (bj1[0], bj2[0]) == (1, 2)

    def test_mirror_symmetric_windows_agree_across_engines(self):
        # data symmetric about the split makes windows (1,2) and (2,1)
        # score identically up to roundoff; both engines must agree on the
        # value and on the chosen window
        rng = np.random.default_rng(10)
        h, k, n = 6, 18, 36
        data = np.empty(n)
        half = rng.standard_normal(18)
        data[k:] = half
        data[:k] = half[::-1]
        state = _state(data)
        t12 = window_components(state, k - h + 1, k, k + 2 * h).T
        t21 = window_components(state, k - 2 * h + 1, k, k + h).T
        assert t12 == pytest.approx(t21, rel=1e-12)
        stats, wins = nested_profile(state, 1, n, h)
        t_ref, best_ref = max_window_statistic(state, k, 1, n, h)
        assert stats[k - 1] == pytest.approx(t_ref, rel=1e-12)
        assert wins[k - 1] == best_ref == Window(13, 30)


class TestLocalProfile:
    def test_equals_smallest_window(self):
        rng = np.random.default_rng(9)
        data = rng.standard_normal(80)
        state = _state(data)
        h = 8
        stats, _ = local_profile(state, 1, 80, h)
        for k in range(h, 80 - h + 1):
            want = window_components(state, k - h + 1, k, k + h).T
            assert stats[k - 1] == pytest.approx(want if want is not None else 0.0, rel=1e-9)
        assert stats[: h - 1].max() == 0.0
        assert stats[80 - h + 1 :].max() == 0.0
