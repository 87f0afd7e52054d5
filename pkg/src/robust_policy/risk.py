"""Quantiles, CVaR and the worst-case mean under Γ-bounded reweighting.

Conventions
-----------
``CVaR_zeta(Z)`` is the mean of ``Z`` above its ``zeta``-quantile, i.e. the
upper tail of mass ``1 - zeta``. For a finite sample of size ``n`` this is the
mean of the largest ``k = ceil((1 - zeta) * n)`` values. The worst-case mean
over likelihood ratios in ``[1/gamma, gamma]`` is

    robust_mean(Z, gamma) = gamma * E[Z] + (1 - gamma) * CVaR_{zeta(gamma)}(Z)

with ``zeta(gamma) = 1 / (gamma + 1)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import ndtr

# Integer-mass detection: (1 - zeta) * n is compared to its ceiling with this slack.
_MASS_SLACK = 1e-9


def zeta_of_gamma(gamma: float) -> float:
    if not gamma >= 1:
        raise ValueError(f"gamma must be >= 1, got {gamma!r}")
    return 1.0 / (gamma + 1.0)


def _check_level(zeta):
    if not 0 < zeta < 1:
        raise ValueError(f"quantile level must lie in (0, 1), got {zeta!r}")


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Finite distribution on ``values`` with optional probability ``weights``."""

    values: np.ndarray
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).ravel()
        if values.size == 0:
            raise ValueError("empirical distribution needs at least one value")
        object.__setattr__(self, "values", values)
        if self.weights is not None:
            weights = np.asarray(self.weights, dtype=np.float64).ravel()
            if weights.shape != values.shape:
                raise ValueError("weights must match values in length")
            if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
                raise ValueError("weights must be nonnegative and sum to 1")
            object.__setattr__(self, "weights", weights)

    def mean(self) -> float:
        if self.weights is None:
            return float(np.mean(self.values))
        return float(np.dot(self.weights, self.values))

    def _upper_tail(self, zeta):
        """Sorted-descending values and weights of the smallest upper set with mass >= 1 - zeta."""
        _check_level(zeta)
        order = np.argsort(-self.values, kind="stable")
        v = self.values[order]
        n = v.size
        if self.weights is None:
            k = int(math.ceil((1.0 - zeta) * n - _MASS_SLACK * n))
            k = min(max(k, 1), n)
            return v[:k], np.full(k, 1.0 / n)
        w = self.weights[order]
        cum = np.cumsum(w)
        k = int(np.searchsorted(cum, (1.0 - zeta) - _MASS_SLACK, side="left")) + 1
        k = min(max(k, 1), n)
        return v[:k], w[:k]

    def quantile(self, zeta: float) -> float:
        tail, _ = self._upper_tail(zeta)
        return float(tail[-1])

    def cvar(self, zeta: float) -> float:
        tail, w = self._upper_tail(zeta)
        return float(np.dot(tail, w) / w.sum())


def _as_distribution(dist) -> EmpiricalDistribution:
    if isinstance(dist, EmpiricalDistribution):
        return dist
    return EmpiricalDistribution(np.asarray(dist, dtype=np.float64))


def empirical_quantile(dist, zeta: float) -> float:
    """Smallest value with at least ``ceil((1 - zeta) n)`` samples at or above it."""
    return _as_distribution(dist).quantile(zeta)


def empirical_cvar(dist, zeta: float) -> float:
    """Mean of the top ``ceil((1 - zeta) n)`` order statistics."""
    return _as_distribution(dist).cvar(zeta)


# Rational approximation for the standard normal quantile (P. J. Acklam).
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758276357841e00,
      -2.549671010245018e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def normal_pdf(x):
    return np.exp(-0.5 * np.square(x)) / math.sqrt(2.0 * math.pi)


def _ppf_lower(p):
    # valid for p <= 0.5; the result is <= 0
    p = np.asarray(p, dtype=np.float64)
    x = np.empty_like(p)
    tail = p < _P_LOW
    q = np.sqrt(-2.0 * np.log(p[tail]))
    x[tail] = ((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
               / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    mid = ~tail
    q = p[mid] - 0.5
    r = q * q
    x[mid] = ((((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
              / (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0))
    # one Newton step on Phi(x) = p
    return x - (ndtr(x) - p) / normal_pdf(x)


def normal_ppf(p):
    """Standard normal quantile, accurate to well below 1e-9 on (0, 1)."""
    p = np.asarray(p, dtype=np.float64)
    if np.any((p <= 0) | (p >= 1)):
        raise ValueError("normal_ppf requires 0 < p < 1")
    upper = p > 0.5
    out = np.where(upper, -_ppf_lower(np.where(upper, 1.0 - p, 0.5)), _ppf_lower(np.where(upper, 0.5, p)))
    return out if out.ndim else float(out)


def normal_cvar(mu, sigma, zeta):
    """``CVaR_zeta`` of ``N(mu, sigma^2)``: ``mu + sigma * pdf(ppf(zeta)) / (1 - zeta)``."""
    sigma = np.asarray(sigma, dtype=np.float64)
    if np.any(sigma <= 0):
        raise ValueError("sigma must be positive")
    _check_level(zeta)
    out = np.asarray(mu, dtype=np.float64) + sigma * normal_pdf(normal_ppf(zeta)) / (1.0 - zeta)
    return out if out.ndim else float(out)


def _upper_partial_moment(means, sds, q):
    """E[Z 1{Z >= q}] per Gaussian component."""
    a = (q - means) / sds
    return means * ndtr(-a) + sds * normal_pdf(a)


def _mixture_cdf(weights, means, sds, q):
    return np.sum(weights * ndtr((q[..., None] - means) / sds), axis=-1)


def _check_mixture(weights, means, sds):
    weights = np.atleast_2d(np.asarray(weights, dtype=np.float64))
    means = np.atleast_2d(np.asarray(means, dtype=np.float64))
    sds = np.atleast_2d(np.asarray(sds, dtype=np.float64))
    weights, means, sds = np.broadcast_arrays(weights, means, sds)
    if np.any(weights < 0) or np.any(np.abs(weights.sum(axis=-1) - 1.0) > 1e-9):
        raise ValueError("mixture weights must be nonnegative and sum to 1")
    if np.any(sds <= 0):
        raise ValueError("mixture component sds must be positive")
    return weights, means, sds


def mixture_quantile_rows(weights, means, sds, level, tol: float = 1e-10, max_iter: int = 200):
    """Row-wise ``level``-quantile of Gaussian mixtures by bisection on the CDF.

    Arrays have shape (n, K); the bracket is
    ``[min(mean) - 12 max(sd), max(mean) + 12 max(sd)]``.
    """
    _check_level(level)
    weights, means, sds = _check_mixture(weights, means, sds)
    lo = means.min(axis=-1) - 12.0 * sds.max(axis=-1)
    hi = means.max(axis=-1) + 12.0 * sds.max(axis=-1)
    active = np.ones(lo.shape, dtype=bool)
    mid = 0.5 * (lo + hi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        err = _mixture_cdf(weights, means, sds, mid) - level
        done = np.abs(err) <= tol
        active &= ~done
        if not active.any():
            break
        below = err < 0
        lo = np.where(active & below, mid, lo)
        hi = np.where(active & ~below, mid, hi)
        # freeze converged rows at their bisection point
        lo = np.where(active, lo, mid)
        hi = np.where(active, hi, mid)
    return mid


def mixture_cvar_rows(weights, means, sds, zeta):
    """Row-wise ``CVaR_zeta`` of Gaussian mixtures, shape (n,)."""
    weights, means, sds = _check_mixture(weights, means, sds)
    q = mixture_quantile_rows(weights, means, sds, zeta)
    tail = np.sum(weights * _upper_partial_moment(means, sds, q[:, None]), axis=-1)
    return tail / (1.0 - zeta)


@dataclass(frozen=True)
class GaussianMixture:
    """One-dimensional Gaussian mixture given as (weight, mean, sd) components."""

    components: tuple

    def __post_init__(self):
        comps = tuple(tuple(float(c) for c in comp) for comp in self.components)
        if not comps:
            raise ValueError("mixture needs at least one component")
        w = np.array([c[0] for c in comps])
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("mixture weights must be nonnegative and sum to 1")
        if any(c[2] <= 0 for c in comps):
            raise ValueError("mixture component sds must be positive")
        object.__setattr__(self, "components", comps)

    def _arrays(self):
        arr = np.array(self.components)
        return arr[:, 0][None], arr[:, 1][None], arr[:, 2][None]

    def mean(self) -> float:
        return float(sum(w * m for w, m, _ in self.components))

    def quantile(self, level: float) -> float:
        return float(mixture_quantile_rows(*self._arrays(), level)[0])

    def cvar(self, zeta: float) -> float:
        return float(mixture_cvar_rows(*self._arrays(), zeta)[0])

    def negate(self) -> "GaussianMixture":
        return GaussianMixture(tuple((w, -m, s) for w, m, s in self.components))


def mixture_cvar(components: Sequence, zeta: float) -> float:
    """``CVaR_zeta`` of a Gaussian mixture given as ``[(weight, mu, sigma), ...]``."""
    return GaussianMixture(tuple(components)).cvar(zeta)


def robust_mean(dist, gamma: float) -> float:
    """Worst-case mean ``gamma * E[Z] + (1 - gamma) * CVaR_{zeta(gamma)}(Z)``.

    ``dist`` is an array of samples, an :class:`EmpiricalDistribution`, or any
    object exposing ``mean()`` and ``cvar(zeta)`` (e.g. :class:`GaussianMixture`).
    """
    zeta = zeta_of_gamma(gamma)
    if not hasattr(dist, "cvar"):
        dist = _as_distribution(dist)
    if gamma == 1:
        return float(dist.mean())
    return float(gamma * dist.mean() + (1.0 - gamma) * dist.cvar(zeta))
