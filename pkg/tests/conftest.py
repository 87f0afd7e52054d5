import functools

import numpy as np
import pytest

from robust_policy.ru import TrainConfig, train
from robust_policy.synthetic import ToyModel, rct_observe
from robust_policy.values import make_kind

ACCEPTANCE_LINES = []


@functools.lru_cache(maxsize=None)
def trained_toy(gamma, objective="maxmin", baseline=None, seed=0, epochs=50, learning_rate=1e-2):
    """RU model trained on the standard toy study split (cached per session)."""
    study = ToyModel(0.2)
    tr = rct_observe(study.sample(20000, seed, "train"), 0.5, seed, "assign/train")
    va = rct_observe(study.sample(10000, seed, "val"), 0.5, seed, "assign/val")
    cfg = TrainConfig(gamma=gamma, kind=make_kind(objective, baseline), e=0.5, seed=seed,
                      epochs_max=epochs, learning_rate=learning_rate)
    return train(tr, va, cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
