import math
import warnings

import numpy as np
import pytest

from robust_policy.synthetic import ToyModel, rct_observe
from robust_policy.values import (
    Gain,
    MaxMin,
    Regret,
    dv_obs_dz,
    make_kind,
    v_obs,
    v_obs_data,
    v_star,
    v_star_data,
)

KINDS = [MaxMin(), Gain("always_control"), Gain("always_treat"), Gain("x1_rule"), Regret()]


def one(x):
    return np.array([[x]])


def test_maxmin_examples():
    assert v_obs(MaxMin(), [0.5], one(0), [1.0], [1], 0.5)[0] == pytest.approx(2 * math.log(2))
    z = np.linspace(0, 1, 11)
    for w in (0, 1):
        np.testing.assert_array_equal(v_obs(MaxMin(), z, np.zeros((11, 1)), np.zeros(11), np.full(11, w), 0.3), 0)


def test_v_star_examples():
    v = v_star(MaxMin(), [1.0], one(0), [2.0], [3.0])[0]
    assert v == pytest.approx(math.log(1 + math.e) * 3 + math.log(1 + math.exp(-1)) * 2)
    g = v_star(Gain("always_control"), [0.5], one(0), [0.0], [1.0])[0]
    assert g == pytest.approx(math.log(2))


def test_z_out_of_range():
    for kind in KINDS:
        with pytest.raises(ValueError):
            v_obs(kind, [1.2], one(0), [1.0], [1], 0.5)
        with pytest.raises(ValueError):
            v_star(kind, [-0.1], one(0), [1.0], [1.0])


def test_regret_clamps_at_half():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        v = v_obs(Regret(), [0.5], one(0), [1.0], [1], 0.5)
    assert np.isfinite(v).all()
    assert any(issubclass(c.category, RuntimeWarning) for c in caught)


def test_make_kind():
    assert isinstance(make_kind("maxmin"), MaxMin)
    assert isinstance(make_kind("regret"), Regret)
    with pytest.raises(ValueError):
        make_kind("gain")
    with pytest.raises(ValueError):
        make_kind("minimax")


@pytest.mark.parametrize("e", [0.5, 1 / 6])
@pytest.mark.parametrize("kind", KINDS, ids=lambda k: getattr(getattr(k, "baseline", None), "name", k.name))
def test_ipw_unbiasedness(kind, e):
    data = ToyModel(0.3).sample(400_000, 11, "unbiased")
    obs = rct_observe(data, e, 11)
    z = 1 / (1 + np.exp(-data.X[:, 0]))
    z = np.where(np.abs(z - 0.5) < 0.05, 0.8, z)
    vo = v_obs_data(kind, z, obs, e)
    vs = v_star_data(kind, z, data)
    se = np.std(vo - vs) / np.sqrt(len(vo))
    assert abs(vo.mean() - vs.mean()) < 5 * se


@pytest.mark.parametrize("kind", KINDS[:4], ids=["maxmin", "gain_c", "gain_t", "gain_x1"])
def test_midpoint_concavity(kind, rng):
    # Stated property for the smooth kinds. It only holds where the outcome
    # weight multiplying the softplus is nonpositive, so this stays red; see
    # test_curvature_follows_outcome_weight for the exact structure.
    n = 2000
    X = rng.uniform(-3, 3, (n, 1))
    y, w = rng.normal(0, 3, n), rng.integers(0, 2, n)
    z1, z2 = rng.uniform(0, 1, n), rng.uniform(0, 1, n)
    mid = v_obs(kind, (z1 + z2) / 2, X, y, w, 0.5)
    ends = (v_obs(kind, z1, X, y, w, 0.5) + v_obs(kind, z2, X, y, w, 0.5)) / 2
    assert np.all(mid >= ends - 1e-10)


@pytest.mark.parametrize("kind", KINDS[:4], ids=["maxmin", "gain_c", "gain_t", "gain_x1"])
def test_curvature_follows_outcome_weight(kind, rng):
    # each smooth kind is c(x, y, w) * softplus(+-(2z - 1)): convex where c > 0
    n = 2000
    X = rng.uniform(-3, 3, (n, 1))
    y, w = rng.normal(0, 3, n), rng.integers(0, 2, n)
    z1, z2 = rng.uniform(0, 1, n), rng.uniform(0, 1, n)
    mid = v_obs(kind, (z1 + z2) / 2, X, y, w, 0.5)
    ends = (v_obs(kind, z1, X, y, w, 0.5) + v_obs(kind, z2, X, y, w, 0.5)) / 2
    gap = mid - ends
    slope_up = dv_obs_dz(kind, np.full(n, 0.9), X, y, w, 0.5) - dv_obs_dz(kind, np.full(n, 0.1), X, y, w, 0.5)
    assert np.all(gap[slope_up < 0] >= -1e-10)
    assert np.all(gap[slope_up > 0] <= 1e-10)


def test_regret_not_concave():
    X, y, w = one(0.0), np.array([0.0]), np.array([1])
    mid = v_obs(Regret(), [0.5 + 1e-3], X, y, w, 0.5)
    ends = (v_obs(Regret(), [0.0], X, y, w, 0.5) + v_obs(Regret(), [1.0], X, y, w, 0.5)) / 2
    assert mid[0] < ends[0]


@pytest.mark.parametrize("kind", KINDS[:4], ids=["maxmin", "gain_c", "gain_t", "gain_x1"])
def test_derivative(kind, rng):
    n = 200
    X = rng.uniform(-3, 3, (n, 1))
    y, w = rng.normal(0, 3, n), rng.integers(0, 2, n)
    z = rng.uniform(0.01, 0.99, n)
    h = 1e-6
    fd = (v_obs(kind, z + h, X, y, w, 1 / 6) - v_obs(kind, z - h, X, y, w, 1 / 6)) / (2 * h)
    np.testing.assert_allclose(dv_obs_dz(kind, z, X, y, w, 1 / 6), fd, rtol=1e-6, atol=1e-7)
