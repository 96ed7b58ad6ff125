"""Hyperparameter selection from the Beta prior and the residual-atom
correlation bound, plus a grid-search validator for ``lambda1``."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .core import DataMatrix, HyperParams
from .metrics import reconstruction_rmse
from .solver import FitResult, SolverConfig, encode, fit

log = logging.getLogger(__name__)

PILOT_T = 10
PILOT_LAMBDA1 = 0.1
PILOT_LAMBDA2 = 1.0
DELTA_PERCENTILE = 95.0
BETA_CLAMP = 1.0 - 1e-9


class DegenerateSample(ValueError):
    """All coefficients are zero, so the Beta(1, beta) MLE is unbounded."""


@dataclass(frozen=True)
class LambdaReport:
    beta_hat: float
    eta_hat: float
    delta: float
    lambda1_theoretical: float
    lambda2_theoretical: float = 1.0
    lambda1_empirical: Optional[float] = None
    relative_error_pct: Optional[float] = None
    beta_scale: float = 1.0

    def with_empirical(self, lambda1_empirical: float) -> "LambdaReport":
        rel = abs(lambda1_empirical - self.lambda1_theoretical) / abs(self.lambda1_theoretical) * 100.0
        return replace(self, lambda1_empirical=float(lambda1_empirical), relative_error_pct=rel)

    def csv_header(self):
        return ["beta_hat", "eta_hat", "delta", "lambda1_theoretical", "lambda2_theoretical",
                "lambda1_empirical", "relative_error_pct", "beta_scale"]

    def csv_row(self):
        def fmt(v):
            return "" if v is None else repr(float(v))
        return [fmt(getattr(self, k)) for k in self.csv_header()]

    def text(self) -> str:
        lines = [
            f"beta_hat            {self.beta_hat:.6g}",
            f"eta_hat             {self.eta_hat:.6g}",
            f"delta               {self.delta:.6g}",
            f"lambda1 (theory)    {self.lambda1_theoretical:.6g}",
            f"lambda2 (theory)    {self.lambda2_theoretical:.6g}",
        ]
        if self.lambda1_empirical is not None:
            lines.append(f"lambda1 (grid)      {self.lambda1_empirical:.6g}")
            lines.append(f"relative error %    {self.relative_error_pct:.3g}")
        return "\n".join(lines)


def fit_beta(R, return_scale: bool = False):
    """Maximum-likelihood ``beta`` of a Beta(1, beta) sample.

    ``beta_hat = N / sum(-log(1 - r))``.  Absolute values are used; if any
    exceeds 1 the whole sample is divided by ``max|R|`` first.  Entries are
    clamped to ``[0, 1 - 1e-9]``.
    """
    r = np.abs(np.asarray(getattr(R, "values", R), dtype=np.float64)).ravel()
    if r.size == 0:
        raise DegenerateSample("empty sample")
    scale = 1.0
    top = r.max()
    if top > 1.0:
        scale = float(top)
        r = r / scale
    r = np.clip(r, 0.0, BETA_CLAMP)
    s = float(-np.log1p(-r).sum())
    if s == 0.0:
        raise DegenerateSample("all coefficients are zero; beta_hat is unbounded")
    beta = r.size / s
    return (beta, scale) if return_scale else beta


def estimate_eta(E) -> float:
    """Residual/atom correlation bound approximated as ``||E||_F / sqrt(m)``."""
    E = np.asarray(E, dtype=np.float64)
    m = E.shape[1] if E.ndim == 2 else E.size
    if m < 1:
        raise ValueError("E must have at least one column")
    return float(np.linalg.norm(E) / math.sqrt(m))


def max_correlation(E, D) -> float:
    """Exact ``max_{j,k} |e_j^T d_k|`` with atoms rescaled to unit norm."""
    D = np.asarray(getattr(D, "atoms", D), dtype=np.float64)
    norms = np.linalg.norm(D, axis=0)
    Dn = D[:, norms > 0] / norms[norms > 0]
    return float(np.abs(Dn.T @ np.asarray(E)).max()) if Dn.size else 0.0


def select_lambda(beta_hat: float, eta_hat: float, delta: float) -> LambdaReport:
    """``lambda1 = max(beta - 1, 2 eta + delta)``, ``lambda2 = 1``."""
    lam1 = max(beta_hat - 1.0, 2.0 * eta_hat + delta)
    return LambdaReport(beta_hat=beta_hat, eta_hat=eta_hat, delta=delta,
                        lambda1_theoretical=lam1, lambda2_theoretical=1.0)


def pilot_run(X: DataMatrix, cfg: SolverConfig, seed: int = 0) -> FitResult:
    hp = cfg.hp.replace(lambda1=PILOT_LAMBDA1, lambda2=PILOT_LAMBDA2, T=PILOT_T)
    return fit(X, replace(cfg, hp=hp, tol=0.0), seed)


def theoretical_lambdas(X: DataMatrix, cfg: SolverConfig, seed: int = 0,
                        delta: Optional[float] = None):
    """Run the pilot fit and derive ``(LambdaReport, pilot FitResult)``.

    ``delta`` defaults to the 95th percentile of the pilot ``|R|``, capped at 1.
    """
    pilot = pilot_run(X, cfg, seed)
    R = pilot.R.values
    try:
        beta_hat, scale = fit_beta(R, return_scale=True)
    except DegenerateSample:
        log.warning("pilot coefficients are all zero; beta_hat set to +inf")
        beta_hat, scale = math.inf, 1.0
    if delta is None:
        delta = min(float(np.percentile(np.abs(R), DELTA_PERCENTILE)), 1.0)
    E = X.values - pilot.D.atoms @ R
    rep = select_lambda(beta_hat, estimate_eta(E), delta)
    return replace(rep, beta_scale=scale), pilot


def validation_rmse(result: FitResult, X_val: DataMatrix, hp: HyperParams,
                    reference: Optional[np.ndarray] = None, k_encode: int = 500,
                    clip=None) -> float:
    """Pixel-space RMSE of the encoded-and-reconstructed validation set.

    ``reference`` (raw scale) replaces the denormalized ``X_val`` as the
    target, e.g. the noise-free signal of a synthetic set.
    """
    R = encode(X_val, result.D, hp, k_r=k_encode)
    return reconstruction_rmse(X_val, result.D.atoms @ R.values, reference=reference, clip=clip)


def grid_search_lambda1(X_train: DataMatrix, X_val: DataMatrix, cfg: SolverConfig,
                        grid: Sequence[float], seed: int = 0,
                        reference: Optional[np.ndarray] = None, k_encode: int = 500,
                        clip=None):
    """Train one model per ``lambda1`` in ``grid`` and keep the best.

    Returns ``(best_lambda1, [(lambda1, rmse), ...])``; ties go to the
    smaller ``lambda1``.
    """
    grid = [float(g) for g in grid]
    if not grid:
        raise ValueError("grid must be non-empty")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("grid must be ascending")
    table = []
    best, best_rmse = None, math.inf
    for lam in grid:
        hp = cfg.hp.replace(lambda1=lam)
        res = fit(X_train, replace(cfg, hp=hp), seed)
        err = validation_rmse(res, X_val, hp, reference=reference, k_encode=k_encode, clip=clip)
        table.append((lam, err))
        log.info("grid lambda1=%g rmse=%.6g", lam, err)
        if err < best_rmse:
            best, best_rmse = lam, err
    return best, table
