"""Domain types and the deterministic policy abstraction.

Single records (``PotentialOutcomeSample``, ``ObservedSample``) exist for
clarity at API boundaries; the numerical code works on the columnar
containers ``PotentialOutcomes`` and ``ObservedData``.
"""
from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np


@dataclass(frozen=True)
class PotentialOutcomeSample:
    x: tuple
    y0: float
    y1: float
    u: Optional[int] = None


@dataclass(frozen=True)
class ObservedSample:
    x: tuple
    y: float
    w: int

    def __post_init__(self):
        if self.w not in (0, 1):
            raise ValueError(f"w must be 0 or 1, got {self.w!r}")


def _as_2d(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError(f"expected a 2-d covariate array, got shape {X.shape}")
    return X


@dataclass(frozen=True)
class PotentialOutcomes:
    """Columnar potential-outcome dataset: ``X`` (n, d), ``y0``, ``y1`` and optional ``u``."""

    X: np.ndarray
    y0: np.ndarray
    y1: np.ndarray
    u: Optional[np.ndarray] = None

    def __post_init__(self):
        X = _as_2d(self.X)
        y0 = np.asarray(self.y0, dtype=np.float64).ravel()
        y1 = np.asarray(self.y1, dtype=np.float64).ravel()
        if not (len(X) == len(y0) == len(y1)):
            raise ValueError("X, y0 and y1 must have the same number of rows")
        if not (np.all(np.isfinite(y0)) and np.all(np.isfinite(y1))):
            raise ValueError("potential outcomes must be finite")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y0", y0)
        object.__setattr__(self, "y1", y1)
        if self.u is not None:
            object.__setattr__(self, "u", np.asarray(self.u, dtype=np.int64).ravel())

    def __len__(self) -> int:
        return len(self.y0)

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def samples(self) -> list:
        u = self.u if self.u is not None else [None] * len(self)
        return [
            PotentialOutcomeSample(tuple(x), float(a), float(b), None if k is None else int(k))
            for x, a, b, k in zip(self.X, self.y0, self.y1, u)
        ]

    @classmethod
    def from_samples(cls, samples: Sequence[PotentialOutcomeSample]) -> "PotentialOutcomes":
        u = None
        if samples and all(s.u is not None for s in samples):
            u = [s.u for s in samples]
        return cls(
            X=np.array([s.x for s in samples], dtype=np.float64),
            y0=[s.y0 for s in samples],
            y1=[s.y1 for s in samples],
            u=u,
        )


@dataclass(frozen=True)
class ObservedData:
    """Columnar RCT dataset ``(X, y, w)``."""

    X: np.ndarray
    y: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        X = _as_2d(self.X)
        y = np.asarray(self.y, dtype=np.float64).ravel()
        w = np.asarray(self.w).ravel()
        if not (len(X) == len(y) == len(w)):
            raise ValueError("X, y and w must have the same number of rows")
        if not np.all(np.isin(w, (0, 1))):
            raise ValueError("treatment indicator w must be binary")
        if not np.all(np.isfinite(y)):
            raise ValueError("observed outcomes must be finite")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "w", w.astype(np.int64))

    def __len__(self) -> int:
        return len(self.y)

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def subset(self, index) -> "ObservedData":
        return ObservedData(self.X[index], self.y[index], self.w[index])

    def samples(self) -> list:
        return [ObservedSample(tuple(x), float(y), int(w)) for x, y, w in zip(self.X, self.y, self.w)]

    @classmethod
    def from_samples(cls, samples: Sequence[ObservedSample]) -> "ObservedData":
        return cls(
            X=np.array([s.x for s in samples], dtype=np.float64),
            y=[s.y for s in samples],
            w=[s.w for s in samples],
        )


@dataclass(frozen=True)
class RobustnessConfig:
    """Sampling-bias strength ``gamma`` and the RCT treatment probability ``e``.

    ``zeta`` is derived as ``1 / (gamma + 1)``, the quantile level at which
    every worst-case functional evaluates its CVaR.
    """

    gamma: float
    e: float = 0.5
    zeta: float = field(init=False)

    def __post_init__(self):
        if not np.isfinite(self.gamma) or self.gamma < 1:
            raise ValueError(f"gamma must be >= 1, got {self.gamma!r}")
        if not 0 < self.e < 1:
            raise ValueError(f"e must lie in (0, 1), got {self.e!r}")
        object.__setattr__(self, "zeta", 1.0 / (self.gamma + 1.0))


def potential_value(sample: PotentialOutcomeSample, z: int) -> float:
    if z not in (0, 1):
        raise ValueError(f"z must be 0 or 1, got {z!r}")
    return sample.y1 if z == 1 else sample.y0


class Policy(ABC):
    """Deterministic treatment rule mapping covariates to {0, 1}.

    Subclasses implement :meth:`decide` on a 2-d array. ``n_features`` is the
    expected covariate dimension, or None when the rule accepts any.
    """

    n_features: Optional[int] = None
    name: str = "policy"

    @abstractmethod
    def _decide(self, X: np.ndarray) -> np.ndarray:
        ...

    def decide(self, X) -> np.ndarray:
        X = _as_2d(X)
        if self.n_features is not None and X.shape[1] != self.n_features:
            raise ValueError(
                f"{self.name} expects {self.n_features} features, got {X.shape[1]}"
            )
        return np.asarray(self._decide(X), dtype=np.int64)

    def __call__(self, X) -> np.ndarray:
        return self.decide(X)


class ThresholdPolicy(Policy):
    """``I(cate(x) >= threshold(x))``; ties go to treatment."""

    def __init__(self, cate: Callable, threshold: Callable, n_features=None, name="threshold"):
        self.cate = cate
        self.threshold = threshold
        self.n_features = n_features
        self.name = name

    def _decide(self, X):
        return (np.asarray(self.cate(X)) >= np.asarray(self.threshold(X))).astype(np.int64)


class ScorePolicy(Policy):
    """``I(score(x) >= 1/2)`` for a score bounded in [0, 1]."""

    def __init__(self, score: Callable, n_features=None, name="learned"):
        self.score = score
        self.n_features = n_features
        self.name = name

    def _decide(self, X):
        return (np.asarray(self.score(X)).ravel() >= 0.5).astype(np.int64)


class ConstantPolicy(Policy):
    def __init__(self, treat: int, n_features=None):
        if treat not in (0, 1):
            raise ValueError("treat must be 0 or 1")
        self.treat = treat
        self.n_features = n_features
        self.name = "always_treat" if treat else "always_control"

    def _decide(self, X):
        return np.full(len(X), self.treat, dtype=np.int64)


class CoordinateRulePolicy(Policy):
    """``I(x[feature] <= cutoff)``, e.g. the high-dimensional baseline."""

    def __init__(self, feature: int = 0, cutoff: float = 0.0, n_features=None):
        self.feature = feature
        self.cutoff = cutoff
        self.n_features = n_features
        self.name = f"x{feature + 1}_rule"

    def _decide(self, X):
        return (X[:, self.feature] <= self.cutoff).astype(np.int64)


BASELINES = ("always_control", "always_treat", "x1_rule")


def make_baseline(spec) -> Policy:
    """Resolve a baseline name (or pass through a Policy / callable)."""
    if isinstance(spec, Policy):
        return spec
    if callable(spec):
        return _CallablePolicy(spec)
    if spec == "always_control":
        return ConstantPolicy(0)
    if spec == "always_treat":
        return ConstantPolicy(1)
    if spec == "x1_rule":
        return CoordinateRulePolicy(0, 0.0)
    raise ValueError(f"unknown baseline {spec!r}; expected one of {BASELINES}")


class _CallablePolicy(Policy):
    def __init__(self, fn):
        self.fn = fn
        self.name = getattr(fn, "__name__", "custom")

    def _decide(self, X):
        out = np.asarray(self.fn(X)).ravel()
        if not np.all(np.isin(out, (0, 1))):
            raise ValueError("baseline callable must return 0/1 decisions")
        return out


def apply_policy(policy: Policy, x) -> int:
    """Decision for a single covariate vector."""
    x = np.asarray(x, dtype=np.float64).ravel()
    return int(policy.decide(x[None, :])[0])
