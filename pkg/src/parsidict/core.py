"""Shared data model for the dictionary learning toolkit.

Layout convention used everywhere in the package:

* ``X`` is ``d x m`` -- one column per sample (patch).
* ``D`` is ``d x n`` -- one column per atom.
* ``R`` is ``n x m`` -- one row per atom, so the row-wise L-infinity
  penalty acts on contiguous rows.

All arrays are float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from typing import Optional, Union

import numpy as np

SIGMA_FLOOR = 1e-8


class DimensionMismatch(ValueError):
    """Raised when matrix shapes are inconsistent."""


class NonFiniteObjective(FloatingPointError):
    """Raised when the solver produces a NaN or infinite objective."""


def _as_matrix(a, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DataMatrix:
    """A ``d x m`` sample matrix plus the statistics used to normalize it.

    ``mu``/``sigma`` are ``None`` for raw (unnormalized) data.
    """

    values: np.ndarray
    mu: Optional[np.ndarray] = None
    sigma: Optional[np.ndarray] = None

    def __post_init__(self):
        v = _as_matrix(self.values, "X")
        d, m = v.shape
        if d < 1 or m < 1:
            raise DimensionMismatch(f"X must have d >= 1 and m >= 1, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("X contains non-finite values")
        object.__setattr__(self, "values", _frozen(v))
        for name in ("mu", "sigma"):
            vec = getattr(self, name)
            if vec is None:
                continue
            vec = np.asarray(vec, dtype=np.float64).reshape(-1)
            if vec.shape != (d,):
                raise DimensionMismatch(f"{name} has length {vec.size}, expected {d}")
            object.__setattr__(self, name, _frozen(vec))
        if (self.mu is None) != (self.sigma is None):
            raise ValueError("mu and sigma must be given together")

    @property
    def shape(self):
        return self.values.shape

    @property
    def d(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]

    @property
    def is_normalized(self) -> bool:
        return self.mu is not None

    def columns(self, idx) -> "DataMatrix":
        return DataMatrix(self.values[:, idx], self.mu, self.sigma)


@dataclass(frozen=True)
class Dictionary:
    """``d x n`` matrix whose columns are the atoms."""

    atoms: np.ndarray

    def __post_init__(self):
        a = _as_matrix(self.atoms, "D")
        if min(a.shape) < 1:
            raise DimensionMismatch(f"D must be non-empty, got {a.shape}")
        object.__setattr__(self, "atoms", _frozen(a))

    @property
    def shape(self):
        return self.atoms.shape

    @property
    def d(self) -> int:
        return self.atoms.shape[0]

    @property
    def n(self) -> int:
        return self.atoms.shape[1]


@dataclass(frozen=True)
class CoeffMatrix:
    """``n x m`` coefficient matrix; row ``i`` holds atom ``i``'s usage."""

    values: np.ndarray

    def __post_init__(self):
        v = _as_matrix(self.values, "R")
        if not np.all(np.isfinite(v)):
            raise ValueError("R contains non-finite values")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def shape(self):
        return self.values.shape

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]


Step = Union[float, str]


@dataclass(frozen=True)
class HyperParams:
    """Regularization weights, prior parameters and solver schedule."""

    lambda1: float = 0.1
    lambda2: float = 1.0
    beta: float = 2.0
    delta: float = 1.0
    gamma: float = 50.0
    sigma_noise: float = 1.0
    eta: float = 0.0
    T: int = 100
    k_r: int = 10
    k_d: int = 10
    step_r: Step = "auto"
    step_d: Step = "auto"

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("lambda1 and lambda2 must be nonnegative")
        if not self.beta > 1:
            raise ValueError(f"beta must exceed 1, got {self.beta}")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError(f"delta must lie in [0, 1], got {self.delta}")
        if self.gamma <= 0 or self.sigma_noise <= 0:
            raise ValueError("gamma and sigma_noise must be positive")
        if self.eta < 0:
            raise ValueError("eta must be nonnegative")
        if self.T < 0 or self.k_r < 1 or self.k_d < 1:
            raise ValueError("T must be >= 0 and k_r, k_d >= 1")
        for name in ("step_r", "step_d"):
            s = getattr(self, name)
            if isinstance(s, str):
                if s != "auto":
                    raise ValueError(f"{name} must be 'auto' or a positive number")
            elif not s > 0:
                raise ValueError(f"{name} must be positive")

    def replace(self, **changes) -> "HyperParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "HyperParams":
        kw = {}
        types = {f.name: f.type for f in fields(cls)}
        for key, val in d.items():
            if key not in types:
                raise KeyError(f"unknown hyperparameter {key!r}")
            if key in ("T", "k_r", "k_d"):
                kw[key] = int(val)
            elif key in ("step_r", "step_d"):
                kw[key] = val if val == "auto" else float(val)
            else:
                kw[key] = float(val)
        return cls(**kw)


@dataclass
class TrainTrace:
    """Per-outer-iteration objective decomposition.

    Entry 0 is the initialization; entry ``t`` is recorded after outer
    iteration ``t``.
    """

    total: list = field(default_factory=list)
    fit: list = field(default_factory=list)
    l1: list = field(default_factory=list)
    linf: list = field(default_factory=list)
    active_atoms: list = field(default_factory=list)

    def record(self, fit: float, l1: float, linf: float, active: int) -> None:
        self.fit.append(float(fit))
        self.l1.append(float(l1))
        self.linf.append(float(linf))
        self.total.append(float(fit) + float(l1) + float(linf))
        self.active_atoms.append(int(active))

    def __len__(self) -> int:
        return len(self.total)

    def rows(self):
        for t in range(len(self)):
            yield t, self.total[t], self.fit[t], self.l1[t], self.linf[t], self.active_atoms[t]

    def is_monotone(self, rel_slack: float = 1e-9) -> bool:
        tot = np.asarray(self.total)
        if tot.size < 2:
            return True
        allowed = rel_slack * np.maximum(np.abs(tot[:-1]), 1.0)
        return bool(np.all(np.diff(tot) <= allowed))


def check_dims(X, D, R) -> None:
    """Validate that ``X`` is d x m, ``D`` is d x n and ``R`` is n x m.

    Accepts either the wrapper types or bare arrays.
    """
    x = X.values if isinstance(X, DataMatrix) else np.asarray(X)
    dd = D.atoms if isinstance(D, Dictionary) else np.asarray(D)
    r = R.values if isinstance(R, CoeffMatrix) else np.asarray(R)
    for name, a in (("X", x), ("D", dd), ("R", r)):
        if a.ndim != 2:
            raise DimensionMismatch(f"{name} must be 2-D, got shape {a.shape}")
    if x.shape[1] < 1 or x.shape[0] < 1:
        raise DimensionMismatch(f"X must have d >= 1 and m >= 1, got {x.shape}")
    if x.shape[0] != dd.shape[0]:
        raise DimensionMismatch(f"X/D: feature dims differ ({x.shape[0]} vs {dd.shape[0]})")
    if dd.shape[1] != r.shape[0]:
        raise DimensionMismatch(f"D/R: atom counts differ ({dd.shape[1]} vs {r.shape[0]})")
    if x.shape[1] != r.shape[1]:
        raise DimensionMismatch(f"X/R: sample counts differ ({x.shape[1]} vs {r.shape[1]})")
