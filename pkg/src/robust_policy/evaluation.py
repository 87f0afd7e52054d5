"""Policy evaluation: target values, worst-case reweighting and LP oracles."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .core import ObservedData, Policy, PotentialOutcomes, RobustnessConfig
from .risk import zeta_of_gamma
from .values import v_obs


@dataclass(frozen=True)
class EvaluationReport:
    policy: str
    value: float
    treated_fraction: float
    n: int
    gamma: Optional[float] = None
    target: Optional[float] = None
    seed: Optional[int] = None
    sd: Optional[float] = None

    def __post_init__(self):
        if not 0 <= self.treated_fraction <= 1:
            raise ValueError("treated fraction must lie in [0, 1]")


def target_policy_value(policy: Policy, target: PotentialOutcomes, **labels) -> EvaluationReport:
    """Mean of ``Y(policy(X))`` over the target samples."""
    if len(target) == 0:
        raise ValueError("target sample is empty")
    z = policy.decide(target.X)
    y = np.where(z == 1, target.y1, target.y0)
    return EvaluationReport(
        policy=labels.pop("policy", policy.name),
        value=float(y.mean()),
        treated_fraction=float(z.mean()),
        n=len(target),
        **labels,
    )


def aggregate(reports: Sequence[EvaluationReport]) -> EvaluationReport:
    """Mean over seeds with the sample standard deviation (ddof=1) as ``sd``."""
    if not reports:
        raise ValueError("nothing to aggregate")
    values = np.array([r.value for r in reports])
    treated = np.array([r.treated_fraction for r in reports])
    first = reports[0]
    return EvaluationReport(
        policy=first.policy,
        value=float(values.mean()),
        treated_fraction=float(treated.mean()),
        n=int(sum(r.n for r in reports)),
        gamma=first.gamma,
        target=first.target,
        sd=float(values.std(ddof=1)) if len(values) > 1 else 0.0,
    )


# ---------------------------------------------------------------------------
# Worst-case reweighting
# ---------------------------------------------------------------------------

def worst_case_weights(v, q, gamma: float, cells=None, normalize: bool = True) -> np.ndarray:
    """Weights ``1/gamma`` where ``v >= q`` and ``gamma`` elsewhere.

    With ``normalize`` each cell's weights are rescaled to mean one; ``cells``
    defaults to a single cell covering every sample.
    """
    v = np.asarray(v, dtype=np.float64)
    q = np.broadcast_to(np.asarray(q, dtype=np.float64), v.shape)
    theta = np.where(v >= q, 1.0 / gamma, gamma)
    if not normalize:
        return theta
    cells = np.zeros(len(v), dtype=np.int64) if cells is None else np.asarray(cells)
    out = theta.copy()
    for c in np.unique(cells):
        mask = cells == c
        out[mask] /= theta[mask].mean()
    return out


def worst_case_reweighted_value(data: ObservedData, scores, kind, gamma: float, e: float,
                                quantile_provider: Callable, cells=None,
                                normalize: bool = True) -> float:
    """Mean of ``v`` under the worst-case Γ-box reweighting.

    ``quantile_provider(X, w, scores)`` must return, per sample, the
    ``zeta(gamma)``-quantile of ``v`` given ``(x, w)``. Normalization is done
    within ``cells`` (default: the two treatment arms).
    """
    if quantile_provider is None:
        raise ValueError("a conditional quantile provider is required")
    v = v_obs(kind, scores, data.X, data.y, data.w, e)
    if gamma == 1:
        return float(v.mean())
    q = np.asarray(quantile_provider(data.X, data.w, scores), dtype=np.float64)
    if q.shape != v.shape:
        raise ValueError("quantile provider returned the wrong shape")
    if cells is None:
        cells = data.w
    theta = worst_case_weights(v, q, gamma, cells, normalize)
    return float(np.mean(theta * v))


def analytic_quantile_provider(model, kind, gamma: float, e: float) -> Callable:
    """Quantiles of ``v`` from a known model.

    ``v`` is affine in ``y`` given ``(x, w, z)``: ``v = c + k y``. The
    ``zeta``-quantile of ``v`` is ``c + k q_zeta(Y(w) | x)`` for ``k >= 0`` and
    ``c + k q_{1 - zeta}(Y(w) | x)`` otherwise.
    """
    zeta = zeta_of_gamma(gamma)

    def provider(X, w, scores):
        w = np.asarray(w)
        c = v_obs(kind, scores, X, np.zeros(len(w)), w, e)
        k = v_obs(kind, scores, X, np.ones(len(w)), w, e) - c
        out = np.empty(len(w))
        for arm in (0, 1):
            m = w == arm
            if not m.any():
                continue
            lo = model.quantile(X[m], arm, zeta)
            hi = model.quantile(X[m], arm, 1.0 - zeta)
            out[m] = c[m] + k[m] * np.where(k[m] >= 0, lo, hi)
        return out

    return provider


def alpha_quantile_provider(model) -> Callable:
    """Quantiles of ``v`` from a trained auxiliary head: ``q = -alpha(x, w)``."""

    def provider(X, w, scores):
        return -model.alpha(X, w)

    return provider


# ---------------------------------------------------------------------------
# LP oracle
# ---------------------------------------------------------------------------

def lp_worst_case_oracle(values, gamma: float, return_weights: bool = False):
    """Minimize ``sum(theta v) / n`` over ``theta in [1/gamma, gamma]^n`` with mean one.

    Exact greedy solution: start every weight at ``1/gamma`` and spend the
    remaining budget ``n (1 - 1/gamma)`` raising weights to ``gamma`` from the
    smallest value upward.
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValueError("values must be nonempty")
    if not gamma >= 1:
        raise ValueError(f"gamma must be >= 1, got {gamma!r}")
    n = v.size
    theta = np.full(n, 1.0 / gamma)
    if gamma > 1:
        order = np.argsort(v, kind="stable")
        step = gamma - 1.0 / gamma
        slots = n * (1.0 - 1.0 / gamma) / step  # = n * zeta(gamma)
        full = int(np.floor(slots + 1e-9))
        theta[order[:full]] = gamma
        rest = (slots - full) * step
        if full < n and rest > 1e-12:
            theta[order[full]] += rest
    value = float(np.dot(theta, v) / n)
    if return_weights:
        return value, theta
    return value


# ---------------------------------------------------------------------------
# Regret brute force on discrete cells
# ---------------------------------------------------------------------------

def cell_regrets(model, config: RobustnessConfig):
    """Worst-case regret of treating / not treating in each cell.

    Uses the LP oracle on each arm's outcome sample; the arms are reweighted
    independently, which is the comonotone worst case for the contrast.
    Returns arrays ``(r_treat, r_control)``.
    """
    g = config.gamma
    r1, r0 = [], []
    for c in range(model.n_cells):
        y0, y1 = model.arm_values(c, 0), model.arm_values(c, 1)
        sup0 = -lp_worst_case_oracle(-y0, g)
        sup1 = -lp_worst_case_oracle(-y1, g)
        inf0 = lp_worst_case_oracle(y0, g)
        inf1 = lp_worst_case_oracle(y1, g)
        r1.append(max(0.0, sup0 - inf1))
        r0.append(max(0.0, sup1 - inf0))
    return np.array(r1), np.array(r0)


def brute_force_regret(model, config: RobustnessConfig, cell_weights=None):
    """Worst-case regret of every deterministic policy on the cells.

    Returns ``(policies, regrets)`` with ``policies`` an (2**k, k) 0/1 array.
    """
    r1, r0 = cell_regrets(model, config)
    k = len(r1)
    q = np.full(k, 1.0 / k) if cell_weights is None else np.asarray(cell_weights, dtype=np.float64)
    policies = np.array(list(itertools.product((0, 1), repeat=k)), dtype=np.int64)
    regrets = (policies * r1 + (1 - policies) * r0) @ q
    return policies, regrets
