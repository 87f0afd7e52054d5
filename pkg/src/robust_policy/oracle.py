"""Closed-form robust policies for models with known conditional outcome laws.

Every quantity is evaluated at ``zeta = 1 / (gamma + 1)``. With
``f = 1 - 1/gamma`` and ``c_w^± = CVaR_zeta(±Y(w) | x)``::

    H   = f (c1p - c0p)
    H+  = f (c1p + c0m)
    H-  = f (-c1m - c0p)
    g1  =  gamma tau + (1 - gamma)(c1p + c0m)
    g0  = -gamma tau + (1 - gamma)(c0p + c1m)
"""
from __future__ import annotations

import csv
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import Policy, RobustnessConfig, ThresholdPolicy, _as_2d, make_baseline
from .risk import (
    EmpiricalDistribution,
    mixture_cvar_rows,
    mixture_quantile_rows,
    normal_cvar,
    normal_ppf,
)


class ConditionalModel(ABC):
    """Known conditional laws of ``Y(0) | x`` and ``Y(1) | x``."""

    n_features: Optional[int] = None

    @abstractmethod
    def mean(self, X, w: int) -> np.ndarray:
        ...

    @abstractmethod
    def cvar(self, X, w: int, zeta: float, sign: int = 1) -> np.ndarray:
        """``CVaR_zeta(sign * Y(w) | x)`` row-wise."""

    @abstractmethod
    def quantile(self, X, w: int, level: float) -> np.ndarray:
        """``level``-quantile of ``Y(w) | x`` row-wise."""


class MixtureConditionalModel(ConditionalModel):
    """Model whose arms are finite Gaussian mixtures given ``x``.

    Subclasses implement :meth:`arm_components` returning ``(weights, means,
    sds)`` arrays of shape (n, K).
    """

    @abstractmethod
    def arm_components(self, X: np.ndarray, w: int):
        ...

    def mean(self, X, w):
        weights, means, _ = self.arm_components(_as_2d(X), w)
        return np.sum(weights * means, axis=1)

    def cvar(self, X, w, zeta, sign=1):
        weights, means, sds = self.arm_components(_as_2d(X), w)
        if sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        if weights.shape[1] == 1:
            return normal_cvar(sign * means[:, 0], sds[:, 0], zeta)
        return mixture_cvar_rows(weights, sign * means, sds, zeta)

    def quantile(self, X, w, level):
        weights, means, sds = self.arm_components(_as_2d(X), w)
        if weights.shape[1] == 1:
            return means[:, 0] + sds[:, 0] * normal_ppf(level)
        return mixture_quantile_rows(weights, means, sds, level)


class GaussianMixtureModel(MixtureConditionalModel):
    """Mixture model defined by callables ``arm(X, w) -> (weights, means, sds)``."""

    def __init__(self, arm: Callable, n_features: Optional[int] = None):
        self.arm = arm
        self.n_features = n_features

    def arm_components(self, X, w):
        weights, means, sds = (np.asarray(a, dtype=np.float64) for a in self.arm(X, w))
        return np.broadcast_arrays(np.atleast_2d(weights), np.atleast_2d(means), np.atleast_2d(sds))


class EmpiricalConditionalModel(ConditionalModel):
    """Discrete covariate cells, each carrying finite outcome samples per arm.

    ``X`` passed to the methods holds integer cell indices in its first column.
    CVaRs follow the order-statistic convention of :mod:`robust_policy.risk`.
    """

    n_features = 1

    def __init__(self, y0_cells, y1_cells):
        if len(y0_cells) != len(y1_cells):
            raise ValueError("need the same number of cells for both arms")
        self._arms = (
            [EmpiricalDistribution(v) for v in y0_cells],
            [EmpiricalDistribution(v) for v in y1_cells],
        )

    @property
    def n_cells(self) -> int:
        return len(self._arms[0])

    def _cells(self, X):
        return _as_2d(X)[:, 0].astype(np.int64)

    def mean(self, X, w):
        return np.array([self._arms[w][c].mean() for c in self._cells(X)])

    def cvar(self, X, w, zeta, sign=1):
        out = []
        for c in self._cells(X):
            dist = self._arms[w][c]
            if sign == -1:
                dist = EmpiricalDistribution(-dist.values, dist.weights)
            out.append(dist.cvar(zeta))
        return np.array(out)

    def quantile(self, X, w, level):
        return np.array([self._arms[w][c].quantile(level) for c in self._cells(X)])

    def arm_values(self, cell: int, w: int) -> np.ndarray:
        return self._arms[w][cell].values


@dataclass(frozen=True)
class ThresholdSet:
    """Per-x CATE, arm CVaRs and the derived treatment thresholds (arrays)."""

    tau: np.ndarray
    c1p: np.ndarray
    c1m: np.ndarray
    c0p: np.ndarray
    c0m: np.ndarray
    h_gamma: np.ndarray
    h_plus: np.ndarray
    h_minus: np.ndarray
    g1: np.ndarray
    g0: np.ndarray


def cate(model: ConditionalModel, X) -> np.ndarray:
    return model.mean(X, 1) - model.mean(X, 0)


def thresholds(model: ConditionalModel, X, config: RobustnessConfig) -> ThresholdSet:
    X = _as_2d(X)
    gamma, zeta = config.gamma, config.zeta
    tau = cate(model, X)
    c1p = model.cvar(X, 1, zeta, 1)
    c1m = model.cvar(X, 1, zeta, -1)
    c0p = model.cvar(X, 0, zeta, 1)
    c0m = model.cvar(X, 0, zeta, -1)
    f = 1.0 - 1.0 / gamma
    return ThresholdSet(
        tau=tau, c1p=c1p, c1m=c1m, c0p=c0p, c0m=c0m,
        h_gamma=f * (c1p - c0p),
        h_plus=f * (c1p + c0m),
        h_minus=f * (-c1m - c0p),
        g1=gamma * tau + (1.0 - gamma) * (c1p + c0m),
        g0=-gamma * tau + (1.0 - gamma) * (c0p + c1m),
    )


def robust_arm_means(model: ConditionalModel, X, config: RobustnessConfig):
    """Worst-case conditional means ``gamma mu_w + (1 - gamma) CVaR_zeta(Y(w) | x)``."""
    X = _as_2d(X)
    g = config.gamma
    lower = []
    for w in (0, 1):
        lower.append(g * model.mean(X, w) + (1.0 - g) * model.cvar(X, w, config.zeta, 1))
    return lower[0], lower[1]


OBJECTIVES = ("nonrobust", "maxmin", "gain", "regret")


class OraclePolicy(Policy):
    """Threshold policy derived from a known model.

    Parameters
    ----------
    model : ConditionalModel
    config : RobustnessConfig
    objective : {"nonrobust", "maxmin", "gain", "regret"}
    baseline : Policy or str, optional
        Required for ``objective="gain"``.
    regret_form : {"midpoint", "g"}
        The two algebraically equal forms of the regret rule.
    """

    def __init__(self, model, config, objective="maxmin", baseline=None, regret_form="midpoint"):
        if objective not in OBJECTIVES:
            raise ValueError(f"unknown objective {objective!r}")
        if objective == "gain" and baseline is None:
            raise ValueError("the gain objective needs a baseline policy")
        if regret_form not in ("midpoint", "g"):
            raise ValueError("regret_form must be 'midpoint' or 'g'")
        self.model = model
        self.config = config
        self.objective = objective
        self.baseline = make_baseline(baseline) if baseline is not None else None
        self.regret_form = regret_form
        self.n_features = getattr(model, "n_features", None)
        self.name = f"oracle_{objective}"

    def margin(self, X) -> np.ndarray:
        """``tau(x) - threshold(x)``; the policy treats where this is >= 0."""
        X = _as_2d(X)
        if self.objective == "nonrobust":
            return cate(self.model, X)
        ts = thresholds(self.model, X, self.config)
        if self.objective == "maxmin":
            return ts.tau - ts.h_gamma
        if self.objective == "gain":
            b = self.baseline.decide(X)
            return ts.tau - np.where(b == 1, ts.h_minus, ts.h_plus)
        if self.regret_form == "g":
            return ts.g1 - ts.g0
        return ts.tau - 0.5 * (ts.h_plus + ts.h_minus)

    def _decide(self, X):
        return (self.margin(X) >= 0).astype(np.int64)


def nonrobust_policy(model) -> OraclePolicy:
    return OraclePolicy(model, RobustnessConfig(1.0), "nonrobust")


def maxmin_policy(model, config) -> OraclePolicy:
    return OraclePolicy(model, config, "maxmin")


def gain_policy(model, config, baseline) -> OraclePolicy:
    return OraclePolicy(model, config, "gain", baseline=baseline)


def regret_policy(model, config, form: str = "midpoint") -> OraclePolicy:
    return OraclePolicy(model, config, "regret", regret_form=form)


def lower_bound_policy(model, config) -> Policy:
    """Max-min rule written as a comparison of worst-case arm means."""
    def margin(X):
        lo0, lo1 = robust_arm_means(model, X, config)
        return lo1 - lo0

    return ThresholdPolicy(margin, lambda X: np.zeros(len(_as_2d(X))),
                           n_features=getattr(model, "n_features", None), name="lower_bound")


def decision_boundary(policy: OraclePolicy, lo: float = -3.0, hi: float = 3.0,
                      n_scan: int = 601, tol: float = 1e-8) -> np.ndarray:
    """Roots of the 1-d margin ``tau - threshold`` on ``[lo, hi]`` by bisection.

    Sign changes are located on an ``n_scan`` grid and each bracket is refined
    until its width is below ``tol``.
    """
    xs = np.linspace(lo, hi, n_scan)
    m = policy.margin(xs[:, None])
    roots = []
    for i in np.flatnonzero(np.sign(m[:-1]) != np.sign(m[1:])):
        a, b = xs[i], xs[i + 1]
        fa = m[i]
        while b - a > tol:
            c = 0.5 * (a + b)
            fc = policy.margin(np.array([[c]]))[0]
            if np.sign(fc) == np.sign(fa):
                a, fa = c, fc
            else:
                b = c
        roots.append(0.5 * (a + b))
    return np.array(roots)


GRID_COLUMNS = ("x", "decision", "tau", "h_gamma", "h_plus", "h_minus")


def policy_grid(policy: OraclePolicy, xs) -> dict:
    """Decisions and threshold curves over a 1-d grid, as columns."""
    xs = np.asarray(xs, dtype=np.float64).ravel()
    ts = thresholds(policy.model, xs[:, None], policy.config)
    return {
        "x": xs,
        "decision": policy.decide(xs[:, None]),
        "tau": ts.tau,
        "h_gamma": ts.h_gamma,
        "h_plus": ts.h_plus,
        "h_minus": ts.h_minus,
    }


def write_policy_grid(path, policy: OraclePolicy, xs) -> None:
    cols = policy_grid(policy, xs)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(GRID_COLUMNS)
        for i in range(len(cols["x"])):
            writer.writerow([
                repr(float(cols["x"][i])), int(cols["decision"][i]),
                *(repr(float(cols[k][i])) for k in GRID_COLUMNS[2:]),
            ])
