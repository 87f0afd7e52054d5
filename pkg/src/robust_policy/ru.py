"""RU Regression: joint training of a bounded score head and an auxiliary head.

The per-sample loss for value ``v`` and auxiliary output ``a`` is

    L = -v / gamma + (1 - 1/gamma) a + (gamma - 1/gamma) (-v - a)_+

Minimizing its mean over ``a`` alone yields
``E[-v] / gamma + (1 - 1/gamma) CVaR_{1 - zeta}(-v)`` with the minimizer at
the ``(1 - zeta)``-quantile of ``-v``.

Networks are plain numpy multilayer perceptrons. Parameters of both heads
live in one flat float64 vector, which keeps Adam, finite-difference checks
and checkpointing trivial.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import ObservedData, ScorePolicy, _as_2d
from .synthetic import stream_rng
from .values import Gain, MaxMin, Regret, dv_obs_dz, make_kind, v_obs

HIDDEN = (64, 64, 64)


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int, batch: int, loss: float):
        super().__init__(f"non-finite training loss {loss!r} at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch
        self.loss = loss


# ---------------------------------------------------------------------------
# Multilayer perceptron
# ---------------------------------------------------------------------------

class Mlp:
    """ReLU multilayer perceptron over a slice of a flat parameter vector.

    Layer ``i`` stores a row-major ``(sizes[i], sizes[i+1])`` weight matrix
    followed by its bias. The output layer is linear.
    """

    def __init__(self, sizes):
        self.sizes = tuple(int(s) for s in sizes)
        if len(self.sizes) < 2 or min(self.sizes) < 1:
            raise ValueError(f"invalid layer sizes {sizes}")
        self._slices = []
        off = 0
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            w = slice(off, off + fan_in * fan_out)
            off += fan_in * fan_out
            b = slice(off, off + fan_out)
            off += fan_out
            self._slices.append((w, b, fan_in, fan_out))
        self.n_params = off

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        """Uniform fan-in initialization ``U(-1/sqrt(fan_in), 1/sqrt(fan_in))``."""
        theta = np.empty(self.n_params)
        for w, b, fan_in, fan_out in self._slices:
            bound = 1.0 / math.sqrt(fan_in)
            theta[w] = rng.uniform(-bound, bound, size=fan_in * fan_out)
            theta[b] = rng.uniform(-bound, bound, size=fan_out)
        return theta

    def layers(self, theta):
        for w, b, fan_in, fan_out in self._slices:
            yield theta[w].reshape(fan_in, fan_out), theta[b]

    def forward(self, theta, X):
        """Return the output column and the activations needed by :meth:`backward`."""
        acts = [X]
        h = X
        n_layers = len(self._slices)
        for i, (W, b) in enumerate(self.layers(theta)):
            h = h @ W + b
            if i < n_layers - 1:
                h = np.maximum(h, 0.0)
            acts.append(h)
        return h[:, 0], acts

    def backward(self, theta, acts, dout):
        """Gradient of ``sum(dout * output)`` with respect to ``theta``."""
        grad = np.empty(self.n_params)
        delta = dout[:, None]
        layers = list(self.layers(theta))
        for i in range(len(self._slices) - 1, -1, -1):
            w, b, _, _ = self._slices[i]
            grad[w] = (acts[i].T @ delta).ravel()
            grad[b] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ layers[i][0].T) * (acts[i] > 0)
        return grad


def _sigmoid(t):
    return 0.5 * (1.0 + np.tanh(0.5 * t))


# ---------------------------------------------------------------------------
# RU model
# ---------------------------------------------------------------------------

@dataclass
class RuModel:
    """Score head ``h(x) in [0, 1]`` and auxiliary head ``alpha(x, w)``.

    ``params`` holds the score-head parameters followed by the auxiliary-head
    parameters. The auxiliary head sees ``w`` as an extra input column.
    """

    n_features: int
    hidden: tuple = HIDDEN
    params: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        self.h_net = Mlp((self.n_features, *self.hidden, 1))
        self.alpha_net = Mlp((self.n_features + 1, *self.hidden, 1))
        if self.params is None:
            self.params = np.zeros(self.n_params)
        self.params = np.asarray(self.params, dtype=np.float64)
        if self.params.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got {self.params.shape}")

    @property
    def n_params(self) -> int:
        return self.h_net.n_params + self.alpha_net.n_params

    def split(self, theta=None):
        theta = self.params if theta is None else theta
        k = self.h_net.n_params
        return theta[:k], theta[k:]

    def init(self, seed: int) -> "RuModel":
        rng = stream_rng(seed, "init")
        self.params = np.concatenate([self.h_net.init_params(rng), self.alpha_net.init_params(rng)])
        return self

    def _check_X(self, X):
        X = _as_2d(X)
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        return X

    def h(self, X, theta=None) -> np.ndarray:
        out, _ = self.h_net.forward(self.split(theta)[0], self._check_X(X))
        return _sigmoid(out)

    def alpha(self, X, w, theta=None) -> np.ndarray:
        X = self._check_X(X)
        XW = np.column_stack([X, np.asarray(w, dtype=np.float64)])
        out, _ = self.alpha_net.forward(self.split(theta)[1], XW)
        return out

    def copy(self) -> "RuModel":
        return RuModel(self.n_features, self.hidden, self.params.copy(), dict(self.meta))


def policy_from_model(model: RuModel) -> ScorePolicy:
    """Decision rule ``I(h(x) >= 1/2)``."""
    return ScorePolicy(model.h, n_features=model.n_features, name="ru")


# ---------------------------------------------------------------------------
# Loss
# ---------------------------------------------------------------------------

def ru_loss_from_values(v, a, gamma: float) -> np.ndarray:
    """Per-sample RU loss for values ``v`` and auxiliary outputs ``a``."""
    if not gamma >= 1:
        raise ValueError(f"gamma must be >= 1, got {gamma!r}")
    v = np.asarray(v, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    gi = 1.0 / gamma
    return -gi * v + (1.0 - gi) * a + (gamma - gi) * np.maximum(-v - a, 0.0)


def ru_loss(z, a, X, y, w, kind, gamma: float, e: float) -> np.ndarray:
    """Per-sample RU loss at scores ``z`` and auxiliary outputs ``a``."""
    return ru_loss_from_values(v_obs(kind, z, X, y, w, e), a, gamma)


def _check_trainable(kind):
    if isinstance(kind, Regret):
        raise ValueError("the regret value function is nonconcave and is not trainable")
    if not isinstance(kind, (MaxMin, Gain)):
        raise TypeError(f"unsupported value-function kind {kind!r}")


def loss_and_grad(model: RuModel, theta, X, y, w, kind, gamma: float, e: float,
                  with_grad: bool = True):
    """Mean RU loss over a batch and its gradient with respect to ``theta``."""
    _check_trainable(kind)
    th_h, th_a = model.split(theta)
    X = _as_2d(X)
    w = np.asarray(w, dtype=np.float64)
    out_h, acts_h = model.h_net.forward(th_h, X)
    z = _sigmoid(out_h)
    XW = np.column_stack([X, w])
    a, acts_a = model.alpha_net.forward(th_a, XW)
    v = v_obs(kind, z, X, y, w, e)
    gi = 1.0 / gamma
    slack = -v - a
    loss = float(np.mean(-gi * v + (1.0 - gi) * a + (gamma - gi) * np.maximum(slack, 0.0)))
    if not with_grad:
        return loss, None
    n = len(v)
    active = (slack > 0).astype(np.float64)
    dl_dv = (-gi - (gamma - gi) * active) / n
    dl_da = ((1.0 - gi) - (gamma - gi) * active) / n
    dl_dout = dl_dv * dv_obs_dz(kind, z, X, y, w, e) * z * (1.0 - z)
    grad = np.concatenate([
        model.h_net.backward(th_h, acts_h, dl_dout),
        model.alpha_net.backward(th_a, acts_a, dl_da),
    ])
    return loss, grad


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of one RU training run.

    ``kind`` is a value-function kind (:class:`MaxMin` or :class:`Gain`).
    """

    gamma: float
    kind: object = field(default_factory=MaxMin)
    e: float = 0.5
    epochs_max: int = 50
    batch_size: int = 4000
    learning_rate: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    hidden: tuple = HIDDEN
    seed: int = 0

    def __post_init__(self):
        if not (np.isfinite(self.gamma) and self.gamma >= 1):
            raise ValueError(f"gamma must be >= 1, got {self.gamma!r}")
        if not 0 < self.e < 1:
            raise ValueError(f"e must lie in (0, 1), got {self.e!r}")
        if self.epochs_max < 1 or self.batch_size < 1:
            raise ValueError("epochs_max and batch_size must be positive")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        _check_trainable(self.kind)

    @classmethod
    def for_objective(cls, gamma, objective="maxmin", baseline=None, **kwargs):
        return cls(gamma=gamma, kind=make_kind(objective, baseline), **kwargs)


class Adam:
    def __init__(self, n, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(n)
        self.v = np.zeros(n)
        self.t = 0

    def step(self, theta, grad):
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        return theta - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def _kind_meta(kind) -> dict:
    if isinstance(kind, Gain):
        return {"objective": "gain", "baseline": kind.baseline.name}
    return {"objective": "maxmin"}


def train(data_train: ObservedData, data_val: ObservedData, config: TrainConfig) -> RuModel:
    """Minibatch Adam on the mean RU loss; keeps the best-validation snapshot.

    The returned model carries ``meta["history"]``, a list of
    ``(epoch, mean_train_loss, val_loss)`` tuples, and ``meta["best_epoch"]``.
    """
    if len(data_train) == 0 or len(data_val) == 0:
        raise ValueError("training and validation data must be nonempty")
    if data_train.n_features != data_val.n_features:
        raise ValueError("training and validation covariates differ in dimension")
    model = RuModel(data_train.n_features, config.hidden).init(config.seed)
    model.meta.update(gamma=config.gamma, e=config.e, seed=config.seed, **_kind_meta(config.kind))
    theta = model.params
    opt = Adam(theta.size, config.learning_rate, config.beta1, config.beta2, config.eps)
    rng = stream_rng(config.seed, "shuffle")
    n = len(data_train)
    best_loss, best_theta, best_epoch = math.inf, theta.copy(), 0
    history = []
    args = (config.kind, config.gamma, config.e)
    for epoch in range(1, config.epochs_max + 1):
        order = rng.permutation(n)
        total = 0.0
        for b, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start:start + config.batch_size]
            loss, grad = loss_and_grad(model, theta, data_train.X[idx], data_train.y[idx],
                                       data_train.w[idx], *args)
            if not (math.isfinite(loss) and np.all(np.isfinite(grad))):
                raise TrainingDivergedError(epoch, b, loss)
            theta = opt.step(theta, grad)
            total += loss * len(idx)
        val_loss, _ = loss_and_grad(model, theta, data_val.X, data_val.y, data_val.w, *args,
                                    with_grad=False)
        if not math.isfinite(val_loss):
            raise TrainingDivergedError(epoch, -1, val_loss)
        history.append((epoch, total / n, val_loss))
        if val_loss < best_loss:
            best_loss, best_theta, best_epoch = val_loss, theta.copy(), epoch
    model.params = best_theta
    model.meta.update(history=history, best_epoch=best_epoch, best_val_loss=best_loss)
    return model


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

CHECKPOINT_MAGIC = "ru-checkpoint-v1"
_HEADER_KEYS = ("objective", "baseline", "gamma", "e", "seed", "best_epoch")


def save_checkpoint(path, model: RuModel) -> None:
    """One JSON header line, then every parameter as little-endian float64."""
    header = {
        "format": CHECKPOINT_MAGIC,
        "h_sizes": list(model.h_net.sizes),
        "alpha_sizes": list(model.alpha_net.sizes),
        "n_params": model.n_params,
    }
    header.update({k: model.meta[k] for k in _HEADER_KEYS if k in model.meta})
    with open(path, "wb") as fh:
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode("ascii"))
        fh.write(model.params.astype("<f8").tobytes())


def load_checkpoint(path) -> RuModel:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("ascii"))
        if header.get("format") != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not an RU checkpoint")
        params = np.frombuffer(fh.read(), dtype="<f8").astype(np.float64)
    h_sizes = header["h_sizes"]
    model = RuModel(h_sizes[0], tuple(h_sizes[1:-1]), params)
    if model.alpha_net.sizes != tuple(header["alpha_sizes"]) or model.n_params != header["n_params"]:
        raise ValueError(f"{path}: header does not match the stored parameters")
    model.meta.update({k: header[k] for k in _HEADER_KEYS if k in header})
    return model
