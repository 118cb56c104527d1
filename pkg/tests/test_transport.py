from itertools import permutations

import numpy as np
import pytest
from scipy.optimize import linprog
from scipy.spatial.distance import cdist

from helpers import central_difference, relative_error
from mioflow.transport import (DiscreteDistribution, emd, emd_gradient,
                               mmd_gaussian, mmd_mean, one_nn_distance)


def brute_force_uniform_cost(x, y, p):
    """Minimum over all assignments for uniform equal-size sets."""
    metric = "sqeuclidean" if p == 2 else "euclidean"
    cost = cdist(x, y, metric)
    m = len(x)
    return min(cost[range(m), perm].sum() / m for perm in permutations(range(m)))


def linprog_cost(aw, bw, cost):
    """Independent LP solve of the transportation problem."""
    m, n = cost.shape
    a_eq = np.zeros((m + n, m * n))
    for i in range(m):
        a_eq[i, i * n:(i + 1) * n] = 1.0
    for j in range(n):
        a_eq[m + j, j::n] = 1.0
    res = linprog(cost.ravel(), A_eq=a_eq, b_eq=np.concatenate([aw, bw]),
                  bounds=(0, None), method="highs")
    assert res.status == 0
    return res.fun


class TestEmd:
    def test_same_distribution_is_zero(self):
        pts = np.random.default_rng(0).standard_normal((6, 2))
        for p in (1, 2):
            w, _ = emd(pts, pts, p=p)
            assert w == pytest.approx(0.0, abs=1e-12)

    def test_two_diracs(self):
        a = np.array([[0.0]])
        b = np.array([[3.0]])
        for p in (1, 2):
            w, plan = emd(a, b, p=p)
            assert w == pytest.approx(3.0, abs=1e-12)
            np.testing.assert_allclose(plan.plan, [[1.0]])

    @pytest.mark.parametrize("p", [1, 2])
    def test_uniform_matches_brute_force(self, p):
        rng = np.random.default_rng(17)
        for _ in range(20):
            x = rng.uniform(size=(5, 2))
            y = rng.uniform(size=(5, 2))
            w, plan = emd(x, y, p=p)
            assert plan.cost == pytest.approx(brute_force_uniform_cost(x, y, p), abs=1e-10)

    @pytest.mark.parametrize("p", [1, 2])
    def test_unequal_sizes_match_linprog(self, p):
        rng = np.random.default_rng(23)
        for sizes in [(3, 7), (8, 5), (1, 6), (6, 1), (4, 4)]:
            x = rng.standard_normal((sizes[0], 3))
            y = rng.standard_normal((sizes[1], 3))
            wa = rng.uniform(0.2, 1.0, sizes[0])
            wa /= wa.sum()
            wb = rng.uniform(0.2, 1.0, sizes[1])
            wb /= wb.sum()
            da = DiscreteDistribution(x, wa)
            db = DiscreteDistribution(y, wb)
            metric = "sqeuclidean" if p == 2 else "euclidean"
            expected = linprog_cost(wa, wb, cdist(x, y, metric))
            _, plan = emd(da, db, p=p)
            assert plan.cost == pytest.approx(expected, abs=1e-9)

    def test_plan_marginals(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal((9, 2))
        y = rng.standard_normal((4, 2))
        _, plan = emd(x, y, p=2)
        np.testing.assert_allclose(plan.plan.sum(axis=1), 1 / 9, atol=1e-9)
        np.testing.assert_allclose(plan.plan.sum(axis=0), 1 / 4, atol=1e-9)
        assert (plan.plan >= 0).all()

    def test_metric_axioms_uniform(self):
        rng = np.random.default_rng(9)
        for p in (1, 2):
            for _ in range(10):
                x = rng.standard_normal((5, 2))
                y = rng.standard_normal((5, 2))
                z = rng.standard_normal((5, 2))
                wxy, _ = emd(x, y, p=p)
                wyx, _ = emd(y, x, p=p)
                wyz, _ = emd(y, z, p=p)
                wxz, _ = emd(x, z, p=p)
                assert wxy == pytest.approx(wyx, abs=1e-10)
                assert wxz <= wxy + wyz + 1e-9
                assert emd(x, x, p=p)[0] == pytest.approx(0.0, abs=1e-12)

    def test_rigid_motion_invariance(self):
        rng = np.random.default_rng(31)
        x = rng.standard_normal((6, 2))
        y = rng.standard_normal((6, 2))
        theta = 0.73
        rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
        shift = np.array([2.0, -1.0])
        w0, _ = emd(x, y, p=2)
        w1, _ = emd(x @ rot.T + shift, y @ rot.T + shift, p=2)
        assert w1 == pytest.approx(w0, abs=1e-9)

    def test_degenerate_weights_rejected(self):
        pts = np.zeros((2, 1))
        with pytest.raises(ValueError, match="degenerate"):
            DiscreteDistribution(pts, np.array([0.5, -0.5]))
        with pytest.raises(ValueError, match="degenerate"):
            DiscreteDistribution(pts, np.array([0.9, 0.2]))

    def test_coincident_points_cost_zero(self):
        x = np.ones((4, 2))
        w, plan = emd(x, np.ones((3, 2)), p=2)
        assert w == 0.0
        np.testing.assert_allclose(plan.plan.sum(), 1.0, atol=1e-12)


class TestEmdGradient:
    def test_identity_plan_zero_gradient(self):
        x = np.random.default_rng(2).standard_normal((5, 2))
        _, plan = emd(x, x, p=2)
        np.testing.assert_allclose(emd_gradient(x, x, plan), 0.0, atol=1e-12)

    def test_dirac_pair(self):
        a = np.array([[1.0, 2.0]])
        b = np.array([[4.0, 6.0]])
        _, plan = emd(a, b, p=2)
        np.testing.assert_allclose(emd_gradient(a, b, plan), 2.0 * (a - b), atol=1e-12)

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(13)
        x = rng.standard_normal((4, 2))
        y = rng.standard_normal((4, 2)) + 3.0  # well-separated: stable plan

        def cost():
            return emd(x, y, p=2)[1].cost

        _, plan = emd(x, y, p=2)
        grad = emd_gradient(x, y, plan)
        fd = central_difference(cost, [x], eps=1e-6)[0]
        assert relative_error(grad, fd) < 1e-3


class TestMmdGaussian:
    def test_identical_sets(self):
        x = np.random.default_rng(0).standard_normal((7, 3))
        assert mmd_gaussian(x, x) == pytest.approx(0.0, abs=1e-8)

    def test_single_point_closed_form(self):
        r, s = 1.7, 0.8
        x = np.array([[0.0]])
        y = np.array([[r]])
        expected = np.sqrt(2.0 - 2.0 * np.exp(-r ** 2 / (2 * s ** 2)))
        assert mmd_gaussian(x, y, scales=(s,)) == pytest.approx(expected, abs=1e-12)

    def test_matches_double_loop(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal((6, 2))
        y = rng.standard_normal((9, 2))
        scales = (0.1, 0.5)
        total = 0.0
        for s in scales:
            def k(a, b):
                return np.exp(-np.sum((a - b) ** 2) / (2 * s * s))
            kxx = np.mean([[k(a, b) for b in x] for a in x])
            kyy = np.mean([[k(a, b) for b in y] for a in y])
            kxy = np.mean([[k(a, b) for b in y] for a in x])
            total += kxx + kyy - 2 * kxy
        assert mmd_gaussian(x, y, scales) == pytest.approx(np.sqrt(max(total / 2, 0)), abs=1e-12)

    def test_symmetry_and_nonnegativity(self):
        rng = np.random.default_rng(8)
        for _ in range(10):
            x = rng.standard_normal((5, 2))
            y = rng.standard_normal((6, 2))
            v = mmd_gaussian(x, y)
            assert v >= 0
            assert v == pytest.approx(mmd_gaussian(y, x), abs=1e-12)


class TestMmdMean:
    def test_equal_means(self):
        x = np.array([[1.0, 0.0], [-1.0, 0.0]])
        y = np.array([[0.0, 2.0], [0.0, -2.0]])
        assert mmd_mean(x, y) == pytest.approx(0.0, abs=1e-12)

    def test_three_four_five(self):
        x = np.array([[0.0, 0.0]])
        y = np.array([[3.0, 4.0]])
        assert mmd_mean(x, y, squared=False) == pytest.approx(5.0)
        assert mmd_mean(x, y, squared=True) == pytest.approx(25.0)

    def test_matches_direct(self):
        rng = np.random.default_rng(12)
        x = rng.standard_normal((8, 3))
        y = rng.standard_normal((5, 3))
        direct = np.linalg.norm(x.mean(0) - y.mean(0))
        assert mmd_mean(x, y, squared=False) == pytest.approx(direct, abs=1e-12)


class TestOneNN:
    def test_subset_is_zero(self):
        truth = np.random.default_rng(3).standard_normal((10, 2))
        assert one_nn_distance(truth[:4], truth) == 0.0

    def test_single_point(self):
        assert one_nn_distance(np.array([[2.0, 0.0]]), np.array([[0.0, 0.0], [5.0, 0.0]])) == 2.0

    def test_matches_brute_force(self):
        rng = np.random.default_rng(6)
        pred = rng.standard_normal((7, 2))
        truth = rng.standard_normal((11, 2))
        nn = np.array([min(np.linalg.norm(p - t) for t in truth) for p in pred])
        assert one_nn_distance(pred, truth, "mean") == pytest.approx(nn.mean(), abs=1e-12)
        worst = np.sort(nn)[::-1][:int(np.ceil(7 / 4))]
        assert one_nn_distance(pred, truth, "worst_quartile") == pytest.approx(worst.mean(), abs=1e-12)
