import numpy as np
import pytest

from mioflow.geometry import (GeodesicParams, KernelSpec, build_kernel,
                              diffusion_geodesic, markov_normalize)


def alpha_decay_reference(pts, knn, decay):
    """Straightforward double-loop recomputation of the adaptive kernel."""
    n = len(pts)
    dist = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            dist[i, j] = np.linalg.norm(pts[i] - pts[j])
    bw = np.array([np.sort(dist[i])[knn] for i in range(n)])
    k = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            k[i, j] = 0.5 * (np.exp(-((dist[i, j] / bw[i]) ** decay))
                             + np.exp(-((dist[i, j] / bw[j]) ** decay)))
    return k


def naive_geodesic(p, pi, alpha, max_scale):
    """Evaluate the multiscale sum from explicitly multiplied walk powers."""
    n = p.shape[0]
    g = np.zeros((n, n))
    for k in range(max_scale + 1):
        power = np.linalg.matrix_power(p, 2 ** k)
        for i in range(n):
            for j in range(n):
                g[i, j] += 2.0 ** (-(max_scale - k) * alpha) * np.abs(power[i] - power[j]).sum()
    for i in range(n):
        for j in range(n):
            g[i, j] += 2.0 ** (-(max_scale + 1) / 2.0) * abs(pi[i] - pi[j])
    return g


CHAIN_KERNEL = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 1.0], [0.0, 1.0, 1.0]])


class TestBuildKernel:
    def test_identical_points_gaussian(self):
        k = build_kernel(np.zeros((2, 3)), KernelSpec(kind="gaussian", epsilon=1.0))
        assert k[0, 1] == pytest.approx(1.0)

    def test_gaussian_closed_form(self):
        pts = np.array([[0.0], [2.0]])
        k = build_kernel(pts, KernelSpec(kind="gaussian", epsilon=2.0))
        assert k[0, 1] == pytest.approx(np.exp(-2.0), abs=1e-12)
        assert k[0, 0] == 1.0

    def test_alpha_decay_matches_reference(self):
        rng = np.random.default_rng(42)
        pts = rng.standard_normal((10, 2))
        spec = KernelSpec(kind="alpha_decay", knn=3, decay=2.0)
        np.testing.assert_allclose(build_kernel(pts, spec),
                                   alpha_decay_reference(pts, 3, 2.0), atol=1e-12)

    def test_knn_too_large(self):
        with pytest.raises(ValueError, match="knn"):
            build_kernel(np.zeros((3, 2)), KernelSpec(kind="alpha_decay", knn=3, decay=2.0))

    def test_duplicate_points_bandwidth_substitution(self, caplog):
        pts = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
        with caplog.at_level("WARNING", logger="mioflow.geometry"):
            k = build_kernel(pts, KernelSpec(kind="alpha_decay", knn=1, decay=2.0))
        assert np.isfinite(k).all()
        assert "bandwidth" in caplog.text

    def test_symmetry(self):
        rng = np.random.default_rng(0)
        pts = rng.standard_normal((15, 3))
        for spec in (KernelSpec(kind="gaussian", epsilon=0.7),
                     KernelSpec(kind="alpha_decay", knn=4, decay=5.0)):
            k = build_kernel(pts, spec)
            np.testing.assert_allclose(k, k.T, atol=0)
            assert (k >= 0).all()


class TestMarkovNormalize:
    def test_all_ones(self):
        op = markov_normalize(np.ones((2, 2)))
        np.testing.assert_allclose(op.p, [[0.5, 0.5], [0.5, 0.5]])
        np.testing.assert_allclose(op.pi, [0.5, 0.5])

    def test_chain_hand_computation(self):
        # Q = diag(2,3,2); M = Q^-1 K Q^-1; D = diag(5/12, 4/9, 5/12)
        op = markov_normalize(CHAIN_KERNEL)
        np.testing.assert_allclose(op.p, [[0.6, 0.4, 0.0],
                                          [0.375, 0.25, 0.375],
                                          [0.0, 0.4, 0.6]], atol=1e-14)
        np.testing.assert_allclose(op.pi, [15 / 46, 16 / 46, 15 / 46], atol=1e-14)

    def test_stationarity(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            a = rng.uniform(0.0, 1.0, size=(8, 8))
            kernel = a + a.T + np.eye(8)
            op = markov_normalize(kernel)
            np.testing.assert_allclose(op.p.sum(axis=1), 1.0, atol=1e-10)
            assert np.abs(op.pi @ op.p - op.pi).max() < 1e-8
            assert op.pi.sum() == pytest.approx(1.0, abs=1e-10)

    def test_isolated_point(self):
        kernel = np.array([[1.0, 0.0], [0.0, 0.0]])
        with pytest.raises(ValueError, match="row 1"):
            markov_normalize(kernel)


class TestDiffusionGeodesic:
    def test_zero_diagonal(self):
        op = markov_normalize(CHAIN_KERNEL)
        g = diffusion_geodesic(op, GeodesicParams(alpha=0.5, max_scale=2))
        np.testing.assert_array_equal(np.diag(g), 0.0)

    def test_chain_matches_naive_powers(self):
        op = markov_normalize(CHAIN_KERNEL)
        g = diffusion_geodesic(op, GeodesicParams(alpha=0.5, max_scale=2))
        expected = naive_geodesic(op.p, op.pi, 0.5, 2)
        np.testing.assert_allclose(g, expected, atol=1e-12)

    def test_metric_axioms_random(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            pts = rng.standard_normal((12, 2))
            op = markov_normalize(build_kernel(pts, KernelSpec(epsilon=1.0)))
            g = diffusion_geodesic(op, GeodesicParams(alpha=0.49, max_scale=3))
            np.testing.assert_allclose(g, g.T, atol=1e-12)
            assert (g >= 0).all()
            lhs = g[:, :, None]
            rhs = g[:, None, :] + g[None, :, :]
            assert (lhs <= rhs + 1e-9).all()

    def test_squaring_matches_iterated_multiplication(self):
        rng = np.random.default_rng(11)
        pts = rng.standard_normal((20, 2))
        op = markov_normalize(build_kernel(pts, KernelSpec(epsilon=2.0)))
        power = op.p.copy()
        for k in range(5):
            np.testing.assert_allclose(power.sum(axis=1), 1.0, atol=1e-8)
            naive = np.linalg.matrix_power(op.p, 2 ** k)
            assert np.abs(power - naive).max() < 1e-9
            power = power @ power

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(5)
        pts = rng.standard_normal((9, 2))
        params = GeodesicParams(alpha=0.4, max_scale=3)
        spec = KernelSpec(epsilon=1.5)
        g = diffusion_geodesic(markov_normalize(build_kernel(pts, spec)), params)
        perm = rng.permutation(9)
        g_perm = diffusion_geodesic(markov_normalize(build_kernel(pts[perm], spec)), params)
        np.testing.assert_allclose(g_perm, g[np.ix_(perm, perm)], atol=1e-10)
