import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from funcoord.errors import GridError, KernelError
from funcoord.geometry import (DeltaPath, EmbeddedManifold, circle_embedding_check, definiteness_scan,
                               directional_derivative_check, gram_deltas, induced_metric,
                               linear_structure_continuity, path_norm_crosscheck, path_quadratic_form)
from funcoord.grid import make_grid
from funcoord.kernels import chordal_circle, damped_gauss, eval_kernel, gauss_metric, minkowski_gauss

LINE = make_grid([(-4.0, 4.0, 513)])


def unit_line(speed=1.0, kernel=None):
    kernel = gauss_metric() if kernel is None else kernel
    return DeltaPath.from_function(lambda t: speed * t, -1.0, 1.0, 41, kernel,
                                   velocity=lambda t: speed * np.ones_like(t))


class TestInducedMetric:
    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_gauss_metric_is_identity(self, n):
        np.testing.assert_array_equal(induced_metric(gauss_metric(), np.zeros(n)), np.eye(n))

    def test_minkowski(self):
        np.testing.assert_array_equal(induced_metric(minkowski_gauss((1, -1)), [0.3, 0.1]),
                                      np.diag([1.0, -1.0]))

    @pytest.mark.parametrize("s", [0.5, 2.0])
    def test_scale(self, s):
        np.testing.assert_allclose(induced_metric(gauss_metric(s), [1.0, 2.0]), s * np.eye(2))

    def test_symmetrised(self):
        g = induced_metric(damped_gauss(), [0.4])
        assert g.shape == (1, 1)

    def test_manifold_cache(self):
        m = EmbeddedManifold(make_grid([(0.0, 1.0, 4)]), gauss_metric())
        assert m.metric_at(2) is m.metric_at(2)
        assert m.metrics().shape == (4, 1, 1)


class TestPaths:
    def test_null_path(self):
        k = minkowski_gauss((1, -1))
        p = DeltaPath.from_function(lambda t: np.stack([t, t], axis=1), 0.0, 1.0, 11, k)
        np.testing.assert_allclose(path_quadratic_form(p), 0.0, atol=1e-12)

    def test_circle_unit_speed(self):
        p = DeltaPath.from_function(lambda t: np.stack([np.cos(t), np.sin(t)], axis=1), 0.0, 2 * math.pi, 65,
                                    gauss_metric(),
                                    velocity=lambda t: np.stack([-np.sin(t), np.cos(t)], axis=1))
        np.testing.assert_allclose(path_quadratic_form(p), 1.0, atol=1e-14)

    def test_circle_fd_velocity(self):
        p = DeltaPath.from_function(lambda t: np.stack([np.cos(t), np.sin(t)], axis=1), 0.0, 2 * math.pi, 257,
                                    gauss_metric())
        q = path_quadratic_form(p)
        assert np.max(np.abs(q[2:-2] - 1.0)) < 1e-6

    def test_timelike(self):
        k = minkowski_gauss((1, -1))
        p = DeltaPath.from_function(lambda t: np.stack([t, 0.5 * t], axis=1), 0.0, 1.0, 11, k)
        np.testing.assert_allclose(path_quadratic_form(p), 0.75, atol=1e-12)

    def test_spacelike(self):
        k = minkowski_gauss((1, -1))
        p = DeltaPath.from_function(lambda t: np.stack([0.5 * t, t], axis=1), 0.0, 1.0, 11, k)
        assert np.all(path_quadratic_form(p) < 0)

    @given(st.floats(0.25, 4.0))
    @settings(max_examples=20, deadline=None)
    def test_reparametrisation_scales(self, c):
        q1 = path_quadratic_form(unit_line())
        qc = path_quadratic_form(unit_line(c))
        np.testing.assert_allclose(qc, c * c * q1, rtol=1e-12)

    def test_box(self):
        with pytest.raises(GridError):
            DeltaPath.from_function(lambda t: 3 * t, 0.0, 1.0, 11, gauss_metric(), box=[(0.0, 2.0)])

    def test_too_few_steps(self):
        with pytest.raises(GridError):
            DeltaPath.from_function(lambda t: t, 0.0, 1.0, 4, gauss_metric())


class TestCrosscheck:
    def test_unit_line(self):
        r = path_norm_crosscheck(unit_line(), LINE)
        assert r["quadratic_form"] == 1.0
        assert r["relative_error"] < 1e-6
        assert r["order"] == pytest.approx(2.0, abs=0.2)

    def test_zero_velocity(self):
        p = DeltaPath.from_function(lambda t: 0 * t + 0.5, 0.0, 1.0, 11, gauss_metric(),
                                    velocity=lambda t: 0 * t)
        r = path_norm_crosscheck(p, LINE)
        assert r["extrapolated"] == 0.0
        assert r["relative_error"] == 0.0

    def test_doubled_speed(self):
        r1 = path_norm_crosscheck(unit_line(), LINE)
        r2 = path_norm_crosscheck(unit_line(2.0), LINE)
        np.testing.assert_allclose(r2["values"], 4 * r1["values"], rtol=1e-12)

    def test_under_resolved(self):
        with pytest.raises(GridError):
            path_norm_crosscheck(unit_line(), make_grid([(-4.0, 4.0, 257)]))

    def test_schedule_must_double(self):
        with pytest.raises(ValueError):
            path_norm_crosscheck(unit_line(), LINE, schedule=(4, 6, 8))

    def test_dimension_mismatch(self):
        with pytest.raises(GridError):
            path_norm_crosscheck(unit_line(), make_grid([(-1.0, 1.0, 9)] * 2))


class TestGram:
    def test_single(self):
        assert gram_deltas(gauss_metric(), [[0.7]])["min_eigenvalue"] == pytest.approx(1.0)

    def test_pair(self):
        r = gram_deltas(gauss_metric(), [[0.0], [2.0]])
        assert r["min_eigenvalue"] == pytest.approx(1 - math.exp(-2), rel=1e-14)
        assert r["min_distance"] == 2.0

    @given(st.integers(1, 8), st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=40, deadline=None)
    def test_random_positive(self, m, seed):
        pts = np.random.default_rng(seed).uniform(-3, 3, (m, 2))
        r = gram_deltas(gauss_metric(), pts)
        assert r["min_eigenvalue"] > 0 or r["min_distance"] < 1e-3

    def test_duplicates(self):
        with pytest.raises(KernelError):
            gram_deltas(gauss_metric(), [[0.0], [1.0], [0.0]])

    def test_too_many(self):
        with pytest.raises(KernelError):
            gram_deltas(gauss_metric(), np.arange(9.0)[:, None])

    def test_interlacing(self):
        # adding a point can only lower the smallest eigenvalue
        pts = np.random.default_rng(1).uniform(-2, 2, (6, 1))
        mins = [gram_deltas(gauss_metric(), pts[:m])["min_eigenvalue"] for m in range(1, 7)]
        assert all(b <= a + 1e-14 for a, b in zip(mins, mins[1:]))


class TestContinuity:
    def test_quadratic_order(self):
        eps = 2.0 ** -np.arange(3, 10)
        r = linear_structure_continuity(gauss_metric(), [0.0], [[e] for e in eps])
        assert r["order"] == pytest.approx(2.0, abs=1e-2)
        np.testing.assert_allclose(r["values"], eps ** 2, rtol=1e-2)

    def test_static_points(self):
        r = linear_structure_continuity(gauss_metric(), [0.0], [[0.0]] * 3, lam_seq=[0.5, 0.9, 0.99])
        np.testing.assert_allclose(r["values"], [0.25, 0.01, 1e-4], rtol=1e-10)
        assert math.isnan(r["order"])


class TestCircle:
    def test_gluing_and_metric(self):
        g = make_grid([(0.0, 2 * math.pi, 64, True)])
        r = circle_embedding_check(g, [np.sin, np.cos, lambda t: np.exp(np.sin(t))])
        assert r["glued"]
        assert r["pairing_gap"] == 0.0
        assert r["metric_spread"] == 0.0
        np.testing.assert_array_equal(r["metric"], 1.0)
        assert r["fd_deviation"] < 1e-7

    def test_needs_periodic(self):
        with pytest.raises(GridError):
            circle_embedding_check(make_grid([(0.0, 1.0, 8)]))

    def test_chordal_periodic(self):
        k = chordal_circle()
        assert eval_kernel(k, 0.1, 2.0) == pytest.approx(eval_kernel(k, 0.1 + 2 * math.pi, 2.0), rel=1e-14)


class TestDirectional:
    def test_linear(self):
        r = directional_derivative_check(lambda p: p[..., 0], None, unit_line(), LINE)
        assert r["chain"] == pytest.approx(1.0, abs=1e-14)
        assert r["difference"] < 1e-6

    def test_sine(self):
        path = DeltaPath.from_function(lambda t: 0.3 + t, -1.0, 1.0, 41, gauss_metric(),
                                       velocity=lambda t: np.ones_like(t))
        r = directional_derivative_check(lambda p: np.sin(p[..., 0]), None, path, LINE)
        assert r["chain"] == pytest.approx(math.cos(0.3), rel=1e-12)
        assert r["difference"] < 1e-4

    def test_translation_invariant_quadratic(self):
        f2 = lambda x, y: np.exp(-np.sum((x - y) ** 2, axis=-1))
        r = directional_derivative_check(lambda p: 0 * p[..., 0], f2, unit_line(), LINE)
        assert r["chain"] == 0.0
        assert r["difference"] < 1e-6

    def test_quadratic_with_drift(self):
        f2 = lambda x, y: np.exp(-np.sum((x - y) ** 2, axis=-1)) * (1 + 0.25 * np.sum(x + y, axis=-1))
        path = DeltaPath.from_function(lambda t: 0.2 + t, -1.0, 1.0, 41, gauss_metric(),
                                       velocity=lambda t: np.ones_like(t))
        r = directional_derivative_check(lambda p: p[..., 0] ** 2, f2, path, LINE)
        assert r["chain"] == pytest.approx(0.4 + 0.5, rel=1e-12)
        assert r["difference"] < 1e-4


class TestDefiniteness:
    def test_minkowski_both_signs(self):
        lo, hi = definiteness_scan(minkowski_gauss((1, -1)), [0.0, 0.0])
        assert lo == pytest.approx(-1.0)
        assert hi == pytest.approx(1.0)

    def test_gauss_positive(self):
        lo, hi = definiteness_scan(gauss_metric(), [0.0, 0.0, 0.0])
        assert lo == pytest.approx(1.0) and hi == pytest.approx(1.0)
