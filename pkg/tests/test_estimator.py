import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from robust_policy import RUPolicyLearner
from robust_policy.synthetic import ToyModel, rct_observe


@pytest.fixture(scope="module")
def toy_records():
    obs = rct_observe(ToyModel(0.2).sample(3000, 0, "est"), 0.5, 0)
    return obs.X, obs.y, obs.w


def small(**kw):
    params = dict(max_epochs=3, batch_size=500, hidden_layer_sizes=(16, 16), random_state=1)
    params.update(kw)
    return RUPolicyLearner(**params)


def test_params_round_trip():
    est = RUPolicyLearner(gamma=2.0, objective="gain", baseline="always_treat")
    params = est.get_params()
    assert params["gamma"] == 2.0 and params["baseline"] == "always_treat"
    twin = clone(est)
    assert twin.get_params() == params
    assert est.set_params(gamma=3.0).gamma == 3.0


def test_fit_predict(toy_records):
    X, y, w = toy_records
    est = small(gamma=2.0).fit(X, y, w)
    assert est.n_features_in_ == 1
    assert len(est.history_) == 3 and 1 <= est.best_epoch_ <= 3
    pred = est.predict(X[:10])
    assert pred.dtype.kind == "i" and set(np.unique(pred)) <= {0, 1}
    s = est.decision_function(X[:10])
    np.testing.assert_array_equal(pred, (s >= 0.5).astype(int))
    assert est.predict_alpha(X[:10], w[:10]).shape == (10,)


def test_fit_is_deterministic(toy_records):
    X, y, w = toy_records
    a = small().fit(X, y, w).decision_function(X)
    b = small().fit(X, y, w).decision_function(X)
    np.testing.assert_array_equal(a, b)


def test_eval_set(toy_records):
    X, y, w = toy_records
    est = small(objective="gain", baseline="always_control").fit(X[:2000], y[:2000], w[:2000],
                                                                 eval_set=(X[2000:], y[2000:], w[2000:]))
    assert est.model_.meta["objective"] == "gain"


@pytest.mark.parametrize("bad", [
    dict(gamma=0.5), dict(e=1.0), dict(max_epochs=0), dict(objective="regret"),
    dict(learning_rate=-1.0), dict(validation_fraction=1.0),
])
def test_invalid_params(bad, toy_records):
    X, y, w = toy_records
    with pytest.raises(ValueError):
        small(**bad).fit(X, y, w)


def test_gain_needs_baseline(toy_records):
    X, y, w = toy_records
    with pytest.raises(ValueError):
        small(objective="gain").fit(X, y, w)


def test_input_validation(toy_records):
    X, y, w = toy_records
    with pytest.raises(ValueError):
        small().fit(X, y[:-1], w)
    with pytest.raises(ValueError):
        small().fit(np.full_like(X, np.nan), y, w)
    with pytest.raises(NotFittedError):
        small().predict(X)
    est = small().fit(X, y, w)
    with pytest.raises(ValueError):
        est.predict(np.zeros((3, 2)))
