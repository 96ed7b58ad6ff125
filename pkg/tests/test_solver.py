import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parsidict.core import DataMatrix, DimensionMismatch, HyperParams
from parsidict.solver import (
    SolverConfig,
    encode,
    fit,
    objective,
    reconstruct,
    spectral_norm_sq,
    update_D,
    update_R,
)
from parsidict.synth import SynthConfig, generate


def _naive_objective(X, D, R, l1, l2):
    # loop-based recomputation from the definitions
    fit_ = 0.0
    for i in range(X.shape[0]):
        for j in range(X.shape[1]):
            fit_ += (X[i, j] - sum(D[i, k] * R[k, j] for k in range(D.shape[1]))) ** 2
    pen1 = sum(abs(r) for r in R.ravel())
    pen2 = sum(max(abs(r) for r in row) for row in R)
    return fit_ + l1 * pen1 + l2 * pen2


class TestObjective:
    def test_zero_codes(self):
        X = np.arange(6.0).reshape(2, 3)
        total, f, a, b = objective(X, np.ones((2, 4)), np.zeros((4, 3)), HyperParams())
        assert (total, f, a, b) == (55.0, 55.0, 0.0, 0.0)

    def test_hand_scalar(self):
        out = objective(np.array([[2.0]]), np.array([[1.0]]), np.array([[1.0]]),
                        HyperParams(lambda1=1, lambda2=1))
        assert out == (3.0, 1.0, 1.0, 1.0)

    def test_matches_naive(self):
        rng = np.random.default_rng(0)
        X, D, R = rng.normal(size=(4, 5)), rng.uniform(size=(4, 3)), rng.normal(size=(3, 5))
        total = objective(X, D, R, HyperParams(lambda1=0.7, lambda2=1.3))[0]
        assert total == pytest.approx(_naive_objective(X, D, R, 0.7, 1.3), rel=1e-12)

    def test_mismatch(self):
        with pytest.raises(DimensionMismatch):
            objective(np.zeros((2, 3)), np.zeros((2, 4)), np.zeros((5, 3)), HyperParams())


def test_spectral_norm_matches_svd():
    A = np.random.default_rng(1).normal(size=(7, 30))
    assert spectral_norm_sq(A) == pytest.approx(np.linalg.svd(A, compute_uv=False)[0] ** 2, rel=1e-12)
    assert spectral_norm_sq(A.T) == pytest.approx(spectral_norm_sq(A), rel=1e-12)


class TestUpdateR:
    def test_kill_threshold(self):
        rng = np.random.default_rng(2)
        X, D = rng.normal(size=(3, 3)), rng.uniform(size=(3, 3))
        lam2 = 1.0
        lam1 = 2 * np.abs(D.T @ X).max() + lam2
        R = update_R(X, D, rng.normal(size=(3, 3)), HyperParams(lambda1=lam1, lambda2=lam2), k_r=50)
        assert np.all(R.values == 0.0)

    def test_orthonormal_exact_step(self):
        rng = np.random.default_rng(3)
        Q, _ = np.linalg.qr(rng.normal(size=(6, 3)))
        X = rng.normal(size=(6, 4))
        # L = 2 for orthonormal D, so one 1/L step from zero is exact
        R = update_R(X, Q, np.zeros((3, 4)), HyperParams(lambda1=0, lambda2=0), k_r=1)
        np.testing.assert_allclose(R.values, Q.T @ X, atol=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_descent(self, seed):
        rng = np.random.default_rng(seed)
        X, D, R = rng.normal(size=(5, 7)), rng.uniform(size=(5, 4)), rng.normal(size=(4, 7))
        hp = HyperParams(lambda1=rng.uniform(0, 2), lambda2=rng.uniform(0, 2))
        before = objective(X, D, R, hp)[0]
        after = objective(X, D, update_R(X, D, R, hp, k_r=3), hp)[0]
        assert after <= before * (1 + 1e-12) + 1e-12

    def test_rejects_zero_steps(self):
        with pytest.raises(ValueError):
            update_R(np.zeros((1, 1)), np.ones((1, 1)), np.zeros((1, 1)), HyperParams(), k_r=0)


class TestUpdateD:
    def test_zero_codes_keep_D(self):
        D = np.random.default_rng(4).uniform(size=(3, 2))
        np.testing.assert_array_equal(update_D(np.ones((3, 5)), D, np.zeros((2, 5)), 5).atoms, D)

    def test_scalar_quadratic(self):
        D = update_D(np.array([[0.5]]), np.array([[1.0]]), np.array([[1.0]]), 1)
        assert D.atoms[0, 0] == pytest.approx(0.5, abs=1e-12)

    def test_exact_fit_is_fixed_point(self):
        rng = np.random.default_rng(5)
        D, R = rng.uniform(size=(4, 3)), rng.uniform(size=(3, 6))
        np.testing.assert_allclose(update_D(D @ R, D, R, 10).atoms, D, atol=1e-12)

    def test_stays_in_box(self):
        rng = np.random.default_rng(6)
        D = update_D(rng.normal(0, 5, (4, 10)), rng.uniform(size=(4, 3)), rng.normal(size=(3, 10)), 20)
        assert D.atoms.min() >= 0 and D.atoms.max() <= 1


class TestFit:
    def test_t_zero_is_initialization(self):
        X = DataMatrix(np.random.default_rng(7).normal(size=(4, 20)))
        cfg = SolverConfig(n_atoms=3, hp=HyperParams(T=0, beta=3.0))
        res = fit(X, cfg, seed=11)
        rng = np.random.Generator(np.random.PCG64(11))
        np.testing.assert_array_equal(res.D.atoms, rng.uniform(0, 1, size=(4, 3)))
        np.testing.assert_array_equal(res.R.values, rng.beta(1.0, 3.0, size=(3, 20)))
        assert len(res.trace) == 1 and res.n_iter == 0

    def test_deterministic(self):
        X = DataMatrix(np.random.default_rng(8).normal(size=(6, 40)))
        cfg = SolverConfig(n_atoms=4, hp=HyperParams(T=15))
        a, b = fit(X, cfg, seed=3), fit(X, cfg, seed=3)
        np.testing.assert_array_equal(a.D.atoms, b.D.atoms)
        np.testing.assert_array_equal(a.R.values, b.R.values)
        assert a.trace.total == b.trace.total
        c = fit(X, cfg, seed=4)
        assert not np.array_equal(a.D.atoms, c.D.atoms)

    def test_monotone_trace(self):
        rng = np.random.default_rng(9)
        X = DataMatrix(rng.normal(size=(8, 60)))
        res = fit(X, SolverConfig(n_atoms=5, hp=HyperParams(T=40, lambda1=0.5, lambda2=2.0), tol=0), 1)
        assert res.trace.is_monotone(1e-9)
        for _, total, f, a, b, _ in res.trace.rows():
            assert total == pytest.approx(f + a + b, rel=1e-12)

    def test_synthetic_fit_near_noise_floor(self):
        data = generate(SynthConfig(d=16, n=8, m=500, sigma_noise=0.05, seed=1))
        X = data.X
        res = fit(X, SolverConfig(n_atoms=8, hp=HyperParams(T=200, lambda1=1e-3, lambda2=1e-3), tol=0), 0)
        floor = X.m * X.d * 0.05 ** 2
        assert res.trace.fit[-1] <= 1.5 * floor

    def test_lambda2_zero_is_l1_only(self):
        X = DataMatrix(np.random.default_rng(10).normal(size=(5, 30)))
        res = fit(X, SolverConfig(n_atoms=3, hp=HyperParams(T=5, lambda2=0.0)), 0)
        assert all(v == 0.0 for v in res.trace.linf)

    def test_warns_when_undersampled(self):
        with pytest.warns(RuntimeWarning):
            fit(DataMatrix(np.ones((2, 2))), SolverConfig(n_atoms=4, hp=HyperParams(T=1)), 0)


class TestEncode:
    def test_replicated_first_atom(self):
        rng = np.random.default_rng(12)
        D = rng.uniform(size=(16, 5))
        X = np.tile(D[:, :1], (1, 7))
        R = encode(X, D, HyperParams(lambda1=1e-3, lambda2=1e-3), k_r=2000, tol=0)
        assert np.all(np.argmax(R.values, axis=0) == 0)

    def test_huge_lambda_is_zero(self):
        rng = np.random.default_rng(13)
        D, X = rng.uniform(size=(4, 3)), rng.normal(size=(4, 6))
        R = encode(X, D, HyperParams(lambda1=2 * np.abs(D.T @ X).max() + 1, lambda2=1))
        assert np.all(R.values == 0.0)

    def test_empty_test_set(self):
        with pytest.raises(DimensionMismatch):
            encode(np.zeros((4, 0)), np.ones((4, 2)), HyperParams())

    def test_reconstruct(self):
        D, R = np.eye(2), np.array([[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_array_equal(reconstruct(D, R), R)
