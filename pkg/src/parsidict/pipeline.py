"""Experiment protocols shared by the CLI and the acceptance suite:
theory-driven training, evaluation, the four-way ablation and lambda sweeps."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .core import DataMatrix, HyperParams
from .hyperparam import LambdaReport, theoretical_lambdas
from .metrics import EvalReport, evaluate
from .solver import FitResult, SolverConfig, encode, fit

log = logging.getLogger(__name__)

ABLATIONS = (
    ("Full framework", True, True),
    ("w/o Infinity norm", True, False),
    ("w/o L1", False, True),
    ("w/o L1 & Infinity norm", False, False),
)


def worker_count() -> int:
    """Job-level parallelism from ``PDL_THREADS`` (0 or unset = all cores)."""
    try:
        n = int(os.environ.get("PDL_THREADS", "0"))
    except ValueError:
        n = 0
    return n if n > 0 else (os.cpu_count() or 1)


def _map(fn, jobs):
    workers = min(worker_count(), len(jobs))
    if workers <= 1:
        return [fn(*j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*jobs)))


def train(X: DataMatrix, cfg: SolverConfig, seed: int = 0, lambda1: Optional[float] = None,
          lambda2: Optional[float] = None) -> Tuple[FitResult, Optional[LambdaReport]]:
    """Fit a model, deriving ``lambda1``/``lambda2`` from the pilot run unless given."""
    report = None
    hp = cfg.hp
    if lambda1 is None:
        report, _ = theoretical_lambdas(X, cfg, seed)
        if not np.isfinite(report.lambda1_theoretical):
            raise ValueError("theoretical lambda1 is not finite; pass lambda1 explicitly")
        hp = hp.replace(lambda1=report.lambda1_theoretical, eta=report.eta_hat, delta=report.delta)
    else:
        hp = hp.replace(lambda1=lambda1)
    if lambda2 is not None:
        hp = hp.replace(lambda2=lambda2)
    elif report is not None:
        hp = hp.replace(lambda2=report.lambda2_theoretical)
    return fit(X, replace(cfg, hp=hp), seed), report


@dataclass
class Evaluation:
    report: EvalReport
    R: np.ndarray
    fit_error: float


def evaluate_model(D, hp: HyperParams, X_test: DataMatrix, k_encode: int = 500,
                   threshold: float = 1e-3, clip=(0.0, 1.0)) -> Evaluation:
    """Encode ``X_test`` against ``D`` and score it in pixel space."""
    D = np.asarray(getattr(D, "atoms", D), dtype=np.float64)
    R = encode(X_test, D, hp, k_r=k_encode).values
    rep = evaluate(X_test, D, R, threshold=threshold, clip=clip)
    res = X_test.values - D @ R
    return Evaluation(rep, R, float(np.einsum("ij,ij->", res, res)))


def _ablation_job(name, lam1, lam2, X_train, X_test, cfg, seed, k_encode, threshold, clip):
    res, _ = train(X_train, cfg, seed, lambda1=lam1, lambda2=lam2)
    ev = evaluate_model(res.D, res.hp, X_test, k_encode, threshold, clip)
    return {"config": name, "lambda1": lam1, "lambda2": lam2, "rmse": ev.report.rmse,
            "psnr": ev.report.psnr_db, "ssim": ev.report.ssim,
            "active_atoms": ev.report.active_atoms, "train_active_atoms": res.trace.active_atoms[-1],
            "seed": seed, "T": cfg.hp.T, "k_r": cfg.hp.k_r, "k_d": cfg.hp.k_d,
            "usage": ev.report.usage_freq}


def run_ablation(X_train: DataMatrix, X_test: DataMatrix, cfg: SolverConfig, seed: int = 0,
                 lambda1: Optional[float] = None, lambda2: float = 1.0, k_encode: int = 500,
                 threshold: float = 1e-3, clip=(0.0, 1.0)) -> Tuple[List[dict], Optional[LambdaReport]]:
    """Train the full model and its three ablations with a shared seed and schedule."""
    report = None
    if lambda1 is None:
        report, _ = theoretical_lambdas(X_train, cfg, seed)
        lambda1 = report.lambda1_theoretical
    jobs = [(name, lambda1 if use_l1 else 0.0, lambda2 if use_inf else 0.0, X_train, X_test,
             cfg, seed, k_encode, threshold, clip) for name, use_l1, use_inf in ABLATIONS]
    return _map(_ablation_job, jobs), report


def _sweep_job(variant, lam1, lam2, X_train, X_test, cfg, seed, k_encode, threshold, clip):
    res, _ = train(X_train, cfg, seed, lambda1=lam1, lambda2=lam2)
    ev = evaluate_model(res.D, res.hp, X_test, k_encode, threshold, clip)
    l_data, l_model, total = ev.report.mdl
    return {"variant": variant, "lambda1": lam1, "lambda2": lam2, "rmse": ev.report.rmse,
            "psnr": ev.report.psnr_db, "ssim": ev.report.ssim,
            "active_atoms": ev.report.active_atoms, "fit_error": ev.fit_error,
            "l_data": l_data, "l_model": l_model, "mdl_total": total}


def run_sweep(X_train: DataMatrix, X_test: DataMatrix, cfg: SolverConfig, grid: Sequence[float],
              seed: int = 0, lambda2: float = 1.0, theoretical_lambda1: Optional[float] = None,
              k_encode: int = 500, threshold: float = 1e-3, clip=(0.0, 1.0)) -> List[dict]:
    """One model per (variant, lambda1): ``linf`` uses ``lambda2``, ``l1`` uses 0.

    The grid point nearest ``theoretical_lambda1`` gets ``theoretical = 1``.
    """
    grid = [float(g) for g in grid]
    if not grid:
        raise ValueError("grid must be non-empty")
    jobs = [(variant, lam, l2, X_train, X_test, cfg, seed, k_encode, threshold, clip)
            for variant, l2 in (("linf", lambda2), ("l1", 0.0)) for lam in grid]
    rows = _map(_sweep_job, jobs)
    mark = None
    if theoretical_lambda1 is not None:
        mark = grid[int(np.argmin([abs(g - theoretical_lambda1) for g in grid]))]
    for r in rows:
        r["theoretical"] = int(mark is not None and r["lambda1"] == mark)
    return rows


def best_by_variant(rows: Sequence[dict]) -> dict:
    """Lowest-RMSE row per sweep variant (ties to the smaller lambda1)."""
    best = {}
    for r in sorted(rows, key=lambda r: r["lambda1"]):
        cur = best.get(r["variant"])
        if cur is None or r["rmse"] < cur["rmse"]:
            best[r["variant"]] = r
    return best


def mdl_win_fraction(rows: Sequence[dict]) -> float:
    """Share of ``linf`` sweep points whose total description length beats the
    ``l1`` curve interpolated to the same fit error.

    Points whose fit error falls outside the ``l1`` curve's range have no
    equal-fit counterpart and count as losses.
    """
    linf = [r for r in rows if r["variant"] == "linf"]
    l1 = sorted((r for r in rows if r["variant"] == "l1"), key=lambda r: r["fit_error"])
    if not linf or not l1:
        return float("nan")
    fx = np.array([r["fit_error"] for r in l1])
    fy = np.array([r["mdl_total"] for r in l1])
    wins = 0
    for r in linf:
        f = r["fit_error"]
        if fx[0] <= f <= fx[-1]:
            wins += r["mdl_total"] < float(np.interp(f, fx, fy))
    return wins / len(linf)
