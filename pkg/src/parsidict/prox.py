"""Proximal operators for the composite row penalty ``tau1*||x||_1 + tau2*||x||_inf``.

The L-infinity prox is obtained from the Moreau decomposition

    prox_{tau ||.||_inf}(v) = v - tau * P_{B1}(v / tau)

where ``P_{B1}`` is the Euclidean projection onto the unit L1 ball.  For the
composite penalty the prox factorizes: soft-threshold first, then apply the
L-infinity prox.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ProxParams:
    """Step-scaled weights: ``tau1 = step*lambda1``, ``tau2 = step*lambda2``."""

    tau1: float = 0.0
    tau2: float = 0.0

    def __post_init__(self):
        for name in ("tau1", "tau2"):
            t = getattr(self, name)
            if not (np.isfinite(t) and t >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {t}")


def soft_threshold(v, tau: float) -> np.ndarray:
    """Elementwise ``sign(v) * max(|v| - tau, 0)``."""
    if tau < 0:
        raise ValueError("tau must be >= 0")
    v = np.asarray(v, dtype=np.float64)
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)


def _l1_ball_threshold(a_sorted: np.ndarray, radius: float) -> float:
    # a_sorted: |v| sorted in decreasing order, with sum(|v|) > radius.
    cssv = np.cumsum(a_sorted)
    k = np.arange(1, a_sorted.size + 1)
    rho = np.nonzero(a_sorted * k >= (cssv - radius))[0][-1]
    return (cssv[rho] - radius) / (rho + 1.0)


def project_l1_ball(v, radius: float = 1.0) -> np.ndarray:
    """Euclidean projection of ``v`` onto ``{x : ||x||_1 <= radius}``.

    Sort-and-threshold algorithm, O(n log n).
    """
    if not radius > 0:
        raise ValueError("radius must be > 0")
    v = np.asarray(v, dtype=np.float64)
    a = np.abs(v)
    if a.sum() <= radius:
        return v.copy()
    theta = _l1_ball_threshold(np.sort(a.ravel())[::-1], radius)
    return np.sign(v) * np.maximum(a - theta, 0.0)


def prox_linf(v, tau: float) -> np.ndarray:
    """Prox of ``tau * ||x||_inf`` via the Moreau decomposition."""
    if tau < 0:
        raise ValueError("tau must be >= 0")
    v = np.asarray(v, dtype=np.float64)
    if tau == 0:
        return v.copy()
    if np.abs(v).sum() <= tau:
        return np.zeros_like(v)
    # tau * P_{B1}(v / tau) == P_{B_tau}(v); the latter avoids overflow for tiny tau
    return v - project_l1_ball(v, tau)


def prox_l1_linf(v, p: ProxParams) -> np.ndarray:
    """Exact prox of ``tau1*||x||_1 + tau2*||x||_inf`` for one row."""
    return prox_linf(soft_threshold(v, p.tau1), p.tau2)


def linf_thresholds(V: np.ndarray, tau: float) -> np.ndarray:
    """Per-row clipping level of the L-infinity prox.

    ``prox_linf(V[i], tau) == clip(V[i], -t[i], t[i])``; rows whose L1 norm is
    at most ``tau`` get ``t[i] = 0``.
    """
    A = np.abs(V)
    n, m = A.shape
    t = np.zeros(n)
    if tau == 0:
        t[:] = np.inf
        return t
    live = A.sum(axis=1) > tau
    if not np.any(live):
        return t
    U = -np.sort(-A[live], axis=1)
    cssv = np.cumsum(U, axis=1)
    k = np.arange(1, m + 1)
    rho = np.count_nonzero(U * k >= (cssv - tau), axis=1) - 1
    theta = (cssv[np.arange(U.shape[0]), rho] - tau) / (rho + 1.0)
    # prox = v - P_{tau ball}(v) = sign(v) * min(|v|, theta_ball)
    t[live] = theta
    return t


def prox_l1_linf_rows(V, tau1: float, tau2: float) -> np.ndarray:
    """Row-wise composite prox for a whole coefficient matrix."""
    V = np.asarray(V, dtype=np.float64)
    S = soft_threshold(V, tau1)
    if tau2 == 0:
        return S
    t = linf_thresholds(S, tau2)
    return np.clip(S, -t[:, None], t[:, None])


def project_box(M, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    """Elementwise clamp to ``[lo, hi]``."""
    if lo > hi:
        raise ValueError("lo must be <= hi")
    return np.clip(np.asarray(M, dtype=np.float64), lo, hi)
