"""Reconstruction quality, atom usage and description-length accounting."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .core import DataMatrix, DimensionMismatch

SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2


class InfinitePSNR(ValueError):
    """PSNR is unbounded for a perfect reconstruction."""


def _same_shape(a, b):
    a = np.asarray(getattr(a, "values", a), dtype=np.float64)
    b = np.asarray(getattr(b, "values", b), dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes differ: {a.shape} vs {b.shape}")
    return a, b


def rmse(X, X_hat) -> float:
    """Root mean squared entrywise error."""
    a, b = _same_shape(X, X_hat)
    diff = a - b
    return math.sqrt(float(np.einsum("ij,ij->", diff, diff)) / diff.size) if diff.ndim == 2 \
        else math.sqrt(float(np.mean(diff * diff)))


def psnr(rmse_val: float, peak: float = 1.0) -> float:
    """``20 * log10(peak / rmse)`` in dB."""
    if rmse_val == 0:
        raise InfinitePSNR("rmse is zero")
    if rmse_val < 0 or peak <= 0:
        raise ValueError("rmse must be >= 0 and peak > 0")
    return 20.0 * math.log10(peak / rmse_val)


def _ssim_stats(a, b):
    mu_a, mu_b = a.mean(axis=-1), b.mean(axis=-1)
    var_a = a.var(axis=-1)
    var_b = b.var(axis=-1)
    cov = ((a - mu_a[..., None]) * (b - mu_b[..., None])).mean(axis=-1)
    num = (2 * mu_a * mu_b + SSIM_C1) * (2 * cov + SSIM_C2)
    den = (mu_a ** 2 + mu_b ** 2 + SSIM_C1) * (var_a + var_b + SSIM_C2)
    return num / den


def ssim(A, B, win: int = 8) -> float:
    """Mean SSIM over all ``win x win`` uniform windows (peak 1).

    An input smaller than the window is treated as a single window, so an
    8x8 patch yields exactly one local SSIM value.
    """
    a, b = _same_shape(A, B)
    if a.ndim == 1:
        return float(_ssim_stats(a, b))
    if a.ndim != 2:
        raise DimensionMismatch("ssim expects 2-D images")
    wh, ww = min(win, a.shape[0]), min(win, a.shape[1])
    va = np.lib.stride_tricks.sliding_window_view(a, (wh, ww)).reshape(-1, wh * ww)
    vb = np.lib.stride_tricks.sliding_window_view(b, (wh, ww)).reshape(-1, wh * ww)
    return float(_ssim_stats(va, vb).mean())


def ssim_patches(X, X_hat) -> float:
    """Average single-window SSIM over the columns of two patch matrices."""
    a, b = _same_shape(X, X_hat)
    return float(_ssim_stats(a.T, b.T).mean())


def atom_usage(R, threshold: float = 1e-3) -> np.ndarray:
    """Fraction of samples in which each atom's |coefficient| exceeds ``threshold``."""
    r = np.abs(np.asarray(getattr(R, "values", R), dtype=np.float64))
    if r.shape[1] == 0:
        return np.zeros(r.shape[0])
    return np.count_nonzero(r > threshold, axis=1) / r.shape[1]


def description_length(R, fit_error: float) -> Tuple[float, float, float]:
    """``(l_data, l_model, total)`` with ``l_data = ||R||_1 + fit_error`` and
    ``l_model`` the sum of per-atom maximum |coefficient|."""
    r = np.abs(np.asarray(getattr(R, "values", R), dtype=np.float64))
    l_data = float(r.sum()) + float(fit_error)
    l_model = float(r.max(axis=1).sum()) if r.size else 0.0
    return l_data, l_model, l_data + l_model


def to_pixels(values, mu, sigma, clip: Optional[Tuple[float, float]] = (0.0, 1.0)) -> np.ndarray:
    out = np.asarray(values) * np.asarray(sigma)[:, None] + np.asarray(mu)[:, None]
    return np.clip(out, *clip) if clip is not None else out


def reconstruction_rmse(X: DataMatrix, X_hat_norm: np.ndarray, reference: Optional[np.ndarray] = None,
                        clip: Optional[Tuple[float, float]] = None) -> float:
    """RMSE in the raw (denormalized) scale.

    ``X`` carries the normalization statistics; ``reference`` overrides the
    target.
    """
    if X.is_normalized:
        target = to_pixels(X.values, X.mu, X.sigma, clip) if reference is None else reference
        est = to_pixels(X_hat_norm, X.mu, X.sigma, clip)
    else:
        target = X.values if reference is None else reference
        est = np.clip(X_hat_norm, *clip) if clip is not None else X_hat_norm
    return rmse(target, est)


@dataclass(frozen=True)
class EvalReport:
    rmse: float
    psnr_db: float
    ssim: float
    active_atoms: int
    usage_freq: np.ndarray
    mdl: Tuple[float, float, float]

    HEADER = ("rmse", "psnr_db", "ssim", "active_atoms", "l_data", "l_model", "mdl_total")

    def csv_row(self):
        return [repr(self.rmse), repr(self.psnr_db), repr(self.ssim), str(self.active_atoms),
                *(repr(v) for v in self.mdl)]


def evaluate(X: DataMatrix, D, R, threshold: float = 1e-3,
             clip: Optional[Tuple[float, float]] = (0.0, 1.0)) -> EvalReport:
    """Pixel-space metrics for a normalized ``X`` coded as ``D @ R``."""
    dd = np.asarray(getattr(D, "atoms", D))
    r = np.asarray(getattr(R, "values", R))
    X_hat = dd @ r
    if X.is_normalized:
        target = to_pixels(X.values, X.mu, X.sigma, clip)
        est = to_pixels(X_hat, X.mu, X.sigma, clip)
    else:
        target, est = X.values, X_hat
    err = rmse(target, est)
    try:
        p = psnr(err)
    except InfinitePSNR:
        p = math.inf
    usage = atom_usage(r, threshold)
    res = X.values - X_hat
    mdl = description_length(r, float(np.einsum("ij,ij->", res, res)))
    return EvalReport(rmse=err, psnr_db=p, ssim=ssim_patches(target, est),
                      active_atoms=int(np.count_nonzero(usage > 0)), usage_freq=usage, mdl=mdl)
