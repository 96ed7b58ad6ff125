"""Synthetic data from the Beta-Bernoulli generative model.

Coefficients are i.i.d. Beta(1, beta), the dictionary is uniform on [0, 1],
and samples carry isotropic Gaussian noise.  Per-atom activation indicators
``z`` are drawn with probability ``1 / (1 + exp(gamma * (rowmax - delta)))``,
exactly as the model states it; note that this makes a strongly used row
*less* likely to have ``z = 1``.  ``z`` is metadata only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .core import CoeffMatrix, DataMatrix, Dictionary


@dataclass(frozen=True)
class SynthConfig:
    d: int = 16
    n: int = 8
    m: int = 500
    beta: float = 2.0
    gamma: float = 50.0
    delta: float = 0.5
    sigma_noise: float = 0.05
    seed: int = 0
    row_sparsity: int = 0

    def __post_init__(self):
        if min(self.d, self.n, self.m) < 1:
            raise ValueError("d, n, m must be positive")
        if not self.beta > 1:
            raise ValueError("beta must exceed 1")
        if self.gamma <= 0 or self.sigma_noise < 0:
            raise ValueError("gamma must be > 0 and sigma_noise >= 0")
        if not 0 <= self.delta <= 1:
            raise ValueError("delta must lie in [0, 1]")
        if not 0 <= self.row_sparsity <= self.n:
            raise ValueError("row_sparsity must lie in [0, n]")


@dataclass(frozen=True)
class SynthData:
    X: DataMatrix
    D_true: Dictionary
    R_true: CoeffMatrix
    z: np.ndarray
    inactive_rows: np.ndarray

    @property
    def clean(self) -> np.ndarray:
        return self.D_true.atoms @ self.R_true.values

    def __iter__(self):
        # allows ``X, D, R, z = generate(cfg)``
        return iter((self.X, self.D_true, self.R_true, self.z))


def activation_probability(row_max, gamma: float, delta: float) -> np.ndarray:
    """P(z = 1 | row) for the logistic activation model."""
    return expit(-gamma * (np.asarray(row_max, dtype=np.float64) - delta))


def sample_z(R: np.ndarray, gamma: float, delta: float, rng: np.random.Generator) -> np.ndarray:
    p = activation_probability(np.abs(R).max(axis=1), gamma, delta)
    return (rng.uniform(size=p.shape) < p).astype(np.uint8)


def generate(cfg: SynthConfig) -> SynthData:
    """Draw ``(X, D_true, R_true, z)``; deterministic for a fixed seed.

    With ``row_sparsity = k`` the ``k`` rows of ``R_true`` with the smallest
    row maximum are zeroed (planted support; not part of the prior itself).
    """
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    D = rng.uniform(0.0, 1.0, size=(cfg.d, cfg.n))
    R = rng.beta(1.0, cfg.beta, size=(cfg.n, cfg.m))
    inactive = np.sort(np.argsort(R.max(axis=1), kind="stable")[: cfg.row_sparsity])
    R[inactive] = 0.0
    z = sample_z(R, cfg.gamma, cfg.delta, rng)
    noise = rng.normal(0.0, 1.0, size=(cfg.d, cfg.m)) * cfg.sigma_noise
    X = D @ R + noise
    return SynthData(DataMatrix(X), Dictionary(D), CoeffMatrix(R), z, inactive)
