"""Alternating minimization of

    ||X - D R||_F^2 + lambda1 * ||R||_1 + lambda2 * sum_i max_j |R_ij|

with proximal-gradient updates of ``R`` (rows = atoms) and box-projected
gradient updates of ``D`` in ``[0, 1]``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import (
    CoeffMatrix,
    DataMatrix,
    DimensionMismatch,
    Dictionary,
    HyperParams,
    NonFiniteObjective,
    TrainTrace,
    check_dims,
)
from .prox import project_box, prox_l1_linf_rows

log = logging.getLogger(__name__)

DEAD_ATOM_PATIENCE = 5


@dataclass(frozen=True)
class SolverConfig:
    n_atoms: int = 128
    hp: HyperParams = field(default_factory=HyperParams)
    usage_threshold: float = 1e-3
    tol: float = 1e-6
    reinit_dead_atoms: bool = True

    def __post_init__(self):
        if self.n_atoms < 1:
            raise ValueError("n_atoms must be >= 1")
        if self.tol < 0 or self.usage_threshold < 0:
            raise ValueError("tol and usage_threshold must be >= 0")


@dataclass
class FitResult:
    D: Dictionary
    R: CoeffMatrix
    trace: TrainTrace
    seed: int
    hp: HyperParams
    mu: Optional[np.ndarray] = None
    sigma: Optional[np.ndarray] = None
    n_iter: int = 0


def _arr(a, attr):
    return getattr(a, attr) if hasattr(a, attr) else np.asarray(a, dtype=np.float64)


def spectral_norm_sq(A: np.ndarray) -> float:
    """Largest eigenvalue of ``A^T A`` computed on the smaller Gram matrix."""
    A = np.asarray(A, dtype=np.float64)
    if A.size == 0:
        return 0.0
    G = A @ A.T if A.shape[0] <= A.shape[1] else A.T @ A
    return float(max(np.linalg.eigvalsh(G)[-1], 0.0))


def _terms(X, D, R, lam1, lam2):
    res = X - D @ R
    fit = float(np.einsum("ij,ij->", res, res))
    absR = np.abs(R)
    l1 = lam1 * float(absR.sum())
    linf = lam2 * float(absR.max(axis=1).sum()) if R.shape[1] else 0.0
    return fit, l1, linf


def objective(X, D, R, hp: HyperParams):
    """Return ``(total, fit, l1, linf)`` for the three-part objective."""
    check_dims(X, D, R)
    x, dd, r = _arr(X, "values"), _arr(D, "atoms"), _arr(R, "values")
    fit, l1, linf = _terms(x, dd, r, hp.lambda1, hp.lambda2)
    return fit + l1 + linf, fit, l1, linf


def _r_step_size(D, hp):
    if hp.step_r != "auto":
        return float(hp.step_r)
    L = 2.0 * spectral_norm_sq(D)
    return 1.0 / L if L > 0 else 0.0


def _r_steps(X, D, R, lam1, lam2, k, step, DtX=None, DtD=None):
    if step == 0.0:
        # D == 0: fit term is constant, only the penalty acts
        return np.zeros_like(R)
    if DtX is None:
        DtX = D.T @ X
    if DtD is None:
        DtD = D.T @ D
    for _ in range(k):
        grad = 2.0 * (DtD @ R - DtX)
        R = prox_l1_linf_rows(R - step * grad, step * lam1, step * lam2)
    return R


def update_R(X, D, R, hp: HyperParams, k_r: Optional[int] = None) -> CoeffMatrix:
    """Run ``k_r`` proximal-gradient steps on ``R`` with ``D`` fixed.

    Step size ``1/L`` with ``L = 2 * sigma_max(D)^2`` unless ``hp.step_r``
    is numeric.
    """
    check_dims(X, D, R)
    k = hp.k_r if k_r is None else k_r
    if k < 1:
        raise ValueError("k_r must be >= 1")
    x, dd, r = _arr(X, "values"), _arr(D, "atoms"), _arr(R, "values")
    out = _r_steps(x, dd, r.copy(), hp.lambda1, hp.lambda2, k, _r_step_size(dd, hp))
    return CoeffMatrix(out)


def _d_steps(X, D, R, k, step=None):
    RRt = R @ R.T
    if step is None:
        L = 2.0 * float(max(np.linalg.eigvalsh(RRt)[-1], 0.0)) if RRt.size else 0.0
        if L == 0.0:
            return D
        step = 1.0 / L
    XRt = X @ R.T
    for _ in range(k):
        grad = 2.0 * (D @ RRt - XRt)
        D = project_box(D - step * grad, 0.0, 1.0)
    return D


def update_D(X, D, R, k_d: int, hp: Optional[HyperParams] = None) -> Dictionary:
    """Run ``k_d`` box-projected gradient steps on the fit term w.r.t. ``D``."""
    check_dims(X, D, R)
    if k_d < 1:
        raise ValueError("k_d must be >= 1")
    x, dd, r = _arr(X, "values"), _arr(D, "atoms"), _arr(R, "values")
    step = None if hp is None or hp.step_d == "auto" else float(hp.step_d)
    return Dictionary(_d_steps(x, dd.copy(), r, k_d, step))


def _record(trace, X, D, R, hp, usage_threshold):
    fit, l1, linf = _terms(X, D, R, hp.lambda1, hp.lambda2)
    total = fit + l1 + linf
    if not np.isfinite(total):
        raise NonFiniteObjective(f"objective became {total} at trace entry {len(trace)}")
    active = int(np.count_nonzero(np.abs(R).max(axis=1) > usage_threshold))
    trace.record(fit, l1, linf, active)
    return total


def fit(X: DataMatrix, cfg: SolverConfig, seed: int = 0, *, D0=None, R0=None) -> FitResult:
    """Learn a dictionary by alternating R- and D-updates.

    Parameters
    ----------
    X : DataMatrix
        Normalized training data, ``d x m``.
    cfg : SolverConfig
        Atom count, hyperparameters and stopping rule.
    seed : int
        Seed for the PCG64 generator used for initialization and dead-atom
        redraws.
    D0, R0 : array, optional
        Warm start; overrides the random initialization.

    Returns
    -------
    FitResult
    """
    if not isinstance(X, DataMatrix):
        X = DataMatrix(X)
    hp = cfg.hp
    x = X.values
    d, m = x.shape
    n = cfg.n_atoms
    if not X.is_normalized:
        log.debug("fit() called on data without normalization statistics")
    if m < n:
        warnings.warn(f"fewer samples ({m}) than atoms ({n})", RuntimeWarning, stacklevel=2)

    rng = np.random.Generator(np.random.PCG64(seed))
    D = rng.uniform(0.0, 1.0, size=(d, n)) if D0 is None else np.array(_arr(D0, "atoms"), dtype=np.float64)
    R = rng.beta(1.0, hp.beta, size=(n, m)) if R0 is None else np.array(_arr(R0, "values"), dtype=np.float64)
    check_dims(x, D, R)

    trace = TrainTrace()
    prev = _record(trace, x, D, R, hp, cfg.usage_threshold)
    dead_for = np.zeros(n, dtype=int)
    t_done = 0
    for t in range(1, hp.T + 1):
        R = _r_steps(x, D, R, hp.lambda1, hp.lambda2, hp.k_r, _r_step_size(D, hp))
        D = _d_steps(x, D, R, hp.k_d, None if hp.step_d == "auto" else float(hp.step_d))
        if cfg.reinit_dead_atoms:
            dead = ~np.any(R != 0.0, axis=1)
            dead_for = np.where(dead, dead_for + 1, 0)
            redraw = dead_for >= DEAD_ATOM_PATIENCE
            if np.any(redraw):
                # zero rows leave the fit untouched, so this cannot raise the objective
                D[:, redraw] = rng.uniform(0.0, 1.0, size=(d, int(redraw.sum())))
                dead_for[redraw] = 0
        cur = _record(trace, x, D, R, hp, cfg.usage_threshold)
        t_done = t
        if abs(prev - cur) <= cfg.tol * max(abs(prev), np.finfo(float).tiny):
            break
        prev = cur

    return FitResult(
        D=Dictionary(D),
        R=CoeffMatrix(R),
        trace=trace,
        seed=seed,
        hp=hp,
        mu=X.mu,
        sigma=X.sigma,
        n_iter=t_done,
    )


def encode(X_test, D, hp: HyperParams, k_r: int = 500, tol: float = 1e-6) -> CoeffMatrix:
    """Sparse-code ``X_test`` against a frozen dictionary.

    Starts from ``R = 0`` and runs proximal-gradient steps until the relative
    objective change drops below ``tol`` or ``k_r`` steps have been taken.
    """
    x = X_test.values if isinstance(X_test, DataMatrix) else np.asarray(X_test, dtype=np.float64)
    dd = _arr(D, "atoms")
    if x.ndim != 2 or x.shape[1] < 1:
        raise DimensionMismatch(f"X_test must be d x m with m >= 1, got {x.shape}")
    R = np.zeros((dd.shape[1], x.shape[1]))
    check_dims(x, dd, R)
    step = _r_step_size(dd, hp)
    DtX, DtD = dd.T @ x, dd.T @ dd
    prev = sum(_terms(x, dd, R, hp.lambda1, hp.lambda2))
    done = 0
    while done < k_r:
        chunk = min(10, k_r - done)
        R = _r_steps(x, dd, R, hp.lambda1, hp.lambda2, chunk, step, DtX, DtD)
        done += chunk
        cur = sum(_terms(x, dd, R, hp.lambda1, hp.lambda2))
        if abs(prev - cur) <= tol * max(abs(prev), np.finfo(float).tiny):
            break
        prev = cur
    return CoeffMatrix(R)


def reconstruct(D, R) -> np.ndarray:
    return _arr(D, "atoms") @ _arr(R, "values")
