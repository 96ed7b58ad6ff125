import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from parsidict.prox import (
    ProxParams,
    linf_thresholds,
    project_box,
    project_l1_ball,
    prox_l1_linf,
    prox_l1_linf_rows,
    prox_linf,
    soft_threshold,
)

from oracles import composite_objective, grid_soft_threshold, qp_project_l1_ball, qp_prox, subgradient_prox

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)
vectors = arrays(np.float64, st.integers(1, 8), elements=finite)
taus = st.floats(0, 5, allow_nan=False)


class TestSoftThreshold:
    def test_example(self):
        np.testing.assert_array_equal(soft_threshold([2.0, -0.5, 0.1], 0.5), [1.5, 0.0, 0.0])

    def test_zero_tau_is_identity(self):
        v = np.array([0.3, -2.0, 7.0])
        np.testing.assert_array_equal(soft_threshold(v, 0.0), v)

    def test_grid_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            v = rng.normal(0, 2, 3)
            tau = rng.uniform(0, 2)
            np.testing.assert_allclose(soft_threshold(v, tau), grid_soft_threshold(v, tau), atol=1e-6)

    def test_negative_tau(self):
        with pytest.raises(ValueError):
            soft_threshold([1.0], -0.1)


class TestProjectL1Ball:
    def test_feasible_unchanged(self):
        np.testing.assert_array_equal(project_l1_ball([0.5, -0.3], 1.0), [0.5, -0.3])

    def test_single_axis(self):
        np.testing.assert_allclose(project_l1_ball([3.0, 0.0, 0.0], 1.0), [1.0, 0.0, 0.0])

    def test_kkt_example(self):
        # theta = 1 solves sum(max(|v| - theta, 0)) = 1
        np.testing.assert_allclose(project_l1_ball([2.0, 1.0], 1.0), [1.0, 0.0], atol=1e-15)
        np.testing.assert_allclose(qp_project_l1_ball(np.array([2.0, 1.0]), 1.0), [1.0, 0.0], atol=1e-7)

    def test_matches_qp(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            v = rng.normal(0, 3, rng.integers(1, 7))
            r = rng.uniform(0.1, 3)
            np.testing.assert_allclose(project_l1_ball(v, r), qp_project_l1_ball(v, r), atol=1e-6)

    @given(vectors, st.floats(0.01, 10))
    def test_feasible_and_idempotent(self, v, r):
        p = project_l1_ball(v, r)
        assert np.abs(p).sum() <= r + 1e-12 * max(1.0, r)
        np.testing.assert_allclose(project_l1_ball(p, r), p, atol=1e-12)

    def test_bad_radius(self):
        with pytest.raises(ValueError):
            project_l1_ball([1.0], 0.0)


class TestProxLinf:
    def test_interior_is_zero(self):
        out = prox_linf([0.2, -0.3, 0.1], 1.0)
        assert np.all(out == 0.0)

    def test_example(self):
        np.testing.assert_allclose(prox_linf([2.0, 1.0], 1.0), [1.0, 1.0])
        np.testing.assert_allclose(qp_prox(np.array([2.0, 1.0]), 0.0, 1.0), [1.0, 1.0], atol=1e-7)

    def test_zero_tau(self):
        v = np.array([1.0, -4.0])
        np.testing.assert_array_equal(prox_linf(v, 0.0), v)

    @given(vectors, st.floats(0.01, 10))
    def test_moreau_identity(self, v, tau):
        lhs = prox_linf(v, tau) + tau * project_l1_ball(v / tau, 1.0)
        np.testing.assert_allclose(lhs, v, atol=1e-12 * max(1.0, np.abs(v).max()))


class TestCompositeProx:
    def test_zero_params(self):
        v = np.array([1.0, -2.0, 0.5])
        np.testing.assert_array_equal(prox_l1_linf(v, ProxParams(0, 0)), v)

    def test_reduces_to_soft_threshold(self):
        v = np.array([1.0, -2.0, 0.5])
        np.testing.assert_array_equal(prox_l1_linf(v, ProxParams(0.7, 0)), soft_threshold(v, 0.7))

    def test_subgradient_oracle(self):
        rng = np.random.default_rng(11)
        v = rng.normal(0, 1.5, 3)
        x = prox_l1_linf(v, ProxParams(0.3, 0.7))
        s = subgradient_prox(v, 0.3, 0.7)
        assert composite_objective(x, v, 0.3, 0.7) <= composite_objective(s, v, 0.3, 0.7) + 1e-6
        np.testing.assert_allclose(x, s, atol=1e-4)

    def test_qp_oracle_small_rows(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            v = rng.normal(0, 2, rng.integers(1, 7))
            t1, t2 = rng.uniform(1e-3, 2, 2)
            x = prox_l1_linf(v, ProxParams(t1, t2))
            o = qp_prox(v, t1, t2)
            assert composite_objective(x, v, t1, t2) - composite_objective(o, v, t1, t2) <= 1e-6
            np.testing.assert_allclose(x, o, atol=1e-4)

    def test_rows_match_single_vector(self):
        rng = np.random.default_rng(2)
        V = rng.normal(size=(6, 40))
        V[2] *= 0.01  # row that the L-inf prox kills
        out = prox_l1_linf_rows(V, 0.2, 0.9)
        for i in range(6):
            np.testing.assert_allclose(out[i], prox_l1_linf(V[i], ProxParams(0.2, 0.9)), atol=1e-13)
        assert np.all(out[2] == 0.0)

    def test_thresholds_zero_rows(self):
        t = linf_thresholds(np.array([[0.1, -0.1], [3.0, 1.0]]), 0.5)
        assert t[0] == 0.0 and t[1] == pytest.approx(2.5)

    @settings(max_examples=60)
    @given(vectors, vectors, taus, taus)
    def test_nonexpansive(self, u, v, t1, t2):
        n = min(u.size, v.size)
        u, v = u[:n], v[:n]
        p = ProxParams(t1, t2)
        lhs = np.linalg.norm(prox_l1_linf(u, p) - prox_l1_linf(v, p))
        assert lhs <= np.linalg.norm(u - v) * (1 + 1e-12) + 1e-12

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            ProxParams(-1.0, 0.0)


class TestProjectBox:
    def test_inside(self):
        M = np.array([[0.1, 0.9], [0.0, 1.0]])
        np.testing.assert_array_equal(project_box(M, 0, 1), M)

    def test_clamps(self):
        np.testing.assert_array_equal(project_box(np.array([[1.7, -0.2]]), 0, 1), [[1.0, 0.0]])

    def test_bad_box(self):
        with pytest.raises(ValueError):
            project_box(np.zeros((1, 1)), 1, 0)
