"""Observed-data and potential-outcome value functions.

``v_obs`` is the IPW-weighted, observed-data counterpart of ``v_star``: for
an RCT with design propensity ``e`` the two have equal expectation. All
functions are vectorized over samples; ``z`` is the score in [0, 1].
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import ObservedData, Policy, PotentialOutcomes, make_baseline

REGRET_CLAMP = 1e-12


@dataclass(frozen=True)
class MaxMin:
    name = "maxmin"


@dataclass(frozen=True)
class Gain:
    baseline: Policy

    name = "gain"

    def __post_init__(self):
        object.__setattr__(self, "baseline", make_baseline(self.baseline))


@dataclass(frozen=True)
class Regret:
    name = "regret"


def make_kind(objective: str, baseline=None):
    if objective == "maxmin":
        return MaxMin()
    if objective == "gain":
        if baseline is None:
            raise ValueError("the gain objective needs a baseline")
        return Gain(baseline)
    if objective == "regret":
        return Regret()
    raise ValueError(f"unknown objective {objective!r}")


def softplus(t):
    return np.logaddexp(0.0, t)


def _sigmoid(t):
    return 0.5 * (1.0 + np.tanh(0.5 * t))


def _check_z(z):
    z = np.asarray(z, dtype=np.float64)
    if np.any((z < 0) | (z > 1)) or np.any(np.isnan(z)):
        raise ValueError("z must lie in [0, 1]")
    return z


def _check_e(e):
    if not 0 < e < 1:
        raise ValueError(f"e must lie in (0, 1), got {e!r}")


def ipw_contrast(y, w, e):
    """``y w / e - y (1 - w) / (1 - e)``."""
    return y * w / e - y * (1 - w) / (1.0 - e)


def _log_abs_2z_minus_1(z):
    a = np.abs(2.0 * z - 1.0)
    if np.any(a < REGRET_CLAMP):
        warnings.warn("regret value evaluated at z = 1/2; |2z - 1| clamped to 1e-12",
                      RuntimeWarning, stacklevel=3)
    return np.log(np.maximum(a, REGRET_CLAMP))


def v_obs(kind, z, X, y, w, e: float) -> np.ndarray:
    """Observed-data value of scores ``z`` on records ``(X, y, w)``."""
    _check_e(e)
    z = _check_z(z)
    y = np.asarray(y, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    t = 2.0 * z - 1.0
    if isinstance(kind, MaxMin):
        s = 2.0 * w - 1.0
        return softplus(t * s) * y / (w * e + (1.0 - w) * (1.0 - e))
    if isinstance(kind, Gain):
        pi0 = kind.baseline.decide(X)
        d = ipw_contrast(y, w, e)
        return (1 - pi0) * softplus(t) * d - pi0 * softplus(-t) * d
    if isinstance(kind, Regret):
        return t * ipw_contrast(y, w, e) + _log_abs_2z_minus_1(z)
    raise TypeError(f"unsupported value-function kind {kind!r}")


def dv_obs_dz(kind, z, X, y, w, e: float) -> np.ndarray:
    """Derivative of :func:`v_obs` with respect to ``z`` (smooth kinds only)."""
    z = np.asarray(z, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    t = 2.0 * z - 1.0
    if isinstance(kind, MaxMin):
        s = 2.0 * w - 1.0
        return 2.0 * s * _sigmoid(t * s) * y / (w * e + (1.0 - w) * (1.0 - e))
    if isinstance(kind, Gain):
        pi0 = kind.baseline.decide(X)
        d = ipw_contrast(y, w, e)
        return 2.0 * d * ((1 - pi0) * _sigmoid(t) + pi0 * _sigmoid(-t))
    raise TypeError(f"no gradient for value-function kind {kind!r}")


def v_star(kind, z, X, y0, y1) -> np.ndarray:
    """Potential-outcome value of scores ``z``."""
    z = _check_z(z)
    y0 = np.asarray(y0, dtype=np.float64)
    y1 = np.asarray(y1, dtype=np.float64)
    t = 2.0 * z - 1.0
    if isinstance(kind, MaxMin):
        return softplus(t) * y1 + softplus(-t) * y0
    if isinstance(kind, Gain):
        pi0 = kind.baseline.decide(X)
        return (1 - pi0) * softplus(t) * (y1 - y0) + pi0 * softplus(-t) * (y0 - y1)
    if isinstance(kind, Regret):
        return t * (y1 - y0) + _log_abs_2z_minus_1(z)
    raise TypeError(f"unsupported value-function kind {kind!r}")


def v_obs_data(kind, z, data: ObservedData, e: float) -> np.ndarray:
    return v_obs(kind, z, data.X, data.y, data.w, e)


def v_star_data(kind, z, data: PotentialOutcomes) -> np.ndarray:
    return v_star(kind, z, data.X, data.y0, data.y1)


def v_obs_sample(kind, z: float, sample, e: float) -> float:
    x = np.asarray(sample.x, dtype=np.float64)[None, :]
    return float(v_obs(kind, np.array([z]), x, np.array([sample.y]), np.array([sample.w]), e)[0])


def v_star_sample(kind, z: float, sample) -> float:
    x = np.asarray(sample.x, dtype=np.float64)[None, :]
    return float(v_star(kind, np.array([z]), x, np.array([sample.y0]), np.array([sample.y1]))[0])
