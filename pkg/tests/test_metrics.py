import math

import numpy as np
import pytest

from parsidict.core import DataMatrix
from parsidict.metrics import (
    InfinitePSNR,
    atom_usage,
    description_length,
    evaluate,
    psnr,
    rmse,
    ssim,
    ssim_patches,
)


class TestRmse:
    def test_identical(self):
        X = np.random.default_rng(0).normal(size=(3, 4))
        assert rmse(X, X) == 0.0

    def test_constant_offset(self):
        X = np.zeros((4, 5))
        assert rmse(X, X - 0.1) == pytest.approx(0.1, rel=1e-12)

    def test_two_pass(self):
        rng = np.random.default_rng(1)
        A, B = rng.normal(size=(6, 7)), rng.normal(size=(6, 7))
        sq = math.fsum(float(a - b) ** 2 for a, b in zip(A.ravel(), B.ravel()))
        assert rmse(A, B) == pytest.approx(math.sqrt(sq / A.size), rel=1e-12)


class TestPsnr:
    def test_examples(self):
        assert psnr(0.1) == pytest.approx(20.0)
        assert psnr(2.0, peak=2.0) == 0.0
        assert psnr(0.099) == pytest.approx(20.087, abs=1e-3)

    def test_perfect(self):
        with pytest.raises(InfinitePSNR):
            psnr(0.0)


class TestSsim:
    def test_identical(self):
        A = np.random.default_rng(2).uniform(size=(8, 8))
        assert ssim(A, A) == pytest.approx(1.0)

    def test_inverted(self):
        A = np.random.default_rng(3).uniform(size=(8, 8))
        assert ssim(A, 1 - A) < 1.0

    def test_constant_equal(self):
        A = np.full((8, 8), 0.3)
        assert ssim(A, A.copy()) == pytest.approx(1.0)

    def test_patch_columns(self):
        X = np.random.default_rng(4).uniform(size=(64, 5))
        assert ssim_patches(X, X) == pytest.approx(1.0)
        assert ssim_patches(X, X[:, ::-1]) < 1.0


class TestUsage:
    def test_single_row(self):
        R = np.zeros((3, 4)); R[1] = 0.5
        np.testing.assert_array_equal(atom_usage(R), [0, 1, 0])

    def test_zero_and_high_threshold(self):
        R = np.random.default_rng(5).uniform(size=(3, 4))
        np.testing.assert_array_equal(atom_usage(np.zeros((3, 4))), 0)
        np.testing.assert_array_equal(atom_usage(R, threshold=2.0), 0)


class TestDescriptionLength:
    def test_examples(self):
        assert description_length(np.zeros((2, 3)), 7.0) == (7.0, 0.0, 7.0)
        R = np.zeros((2, 2)); R[0, 1] = 0.5
        assert description_length(R, 0.0) == (0.5, 0.5, 1.0)

    def test_recompute(self):
        R = np.random.default_rng(6).normal(size=(4, 9))
        l_data = math.fsum(abs(float(v)) for v in R.ravel()) + 2.5
        l_model = math.fsum(max(abs(float(v)) for v in row) for row in R)
        out = description_length(R, 2.5)
        assert out[0] == pytest.approx(l_data, rel=1e-12)
        assert out[1] == pytest.approx(l_model, rel=1e-12)
        assert out[2] == pytest.approx(l_data + l_model, rel=1e-12)


def test_evaluate_pixel_space():
    rng = np.random.default_rng(7)
    raw = rng.uniform(size=(4, 10))
    mu, sigma = raw.mean(axis=1), raw.std(axis=1)
    X = DataMatrix((raw - mu[:, None]) / sigma[:, None], mu, sigma)
    D = np.eye(4)
    rep = evaluate(X, D, X.values)
    assert rep.rmse == pytest.approx(0.0, abs=1e-12)
    assert rep.active_atoms == 4
    assert len(rep.csv_row()) == len(rep.HEADER)
