"""Shared helpers: random mixture models and a finite-difference gradient check."""
import numpy as np

from robust_policy.oracle import GaussianMixtureModel
from robust_policy.ru import loss_and_grad
from robust_policy.values import v_obs


def random_model(rng, max_components=3):
    """1-d model whose arms are x-dependent Gaussian mixtures."""
    arms = []
    for _ in range(2):
        k = int(rng.integers(1, max_components + 1))
        arms.append(dict(
            weights=rng.dirichlet(np.ones(k)),
            a=rng.normal(0, 2, k), b=rng.normal(0, 2, k), c=rng.uniform(0.2, 3, k),
            d=rng.normal(0, 1, k), s0=rng.uniform(0.05, 1.5, k), s1=rng.uniform(0, 0.5, k),
        ))

    def arm(X, w):
        p = arms[w]
        x = X[:, :1]
        means = p["a"] + p["b"] * np.sin(p["c"] * x) + p["d"] * x
        sds = p["s0"] + p["s1"] * np.abs(x)
        weights = np.broadcast_to(p["weights"], means.shape)
        return weights, means, sds

    return GaussianMixtureModel(arm, n_features=1)


def random_x(rng, n):
    return rng.uniform(-3, 3, size=(n, 1))


def kink_pattern(model, theta, X, y, w, kind, e, gamma):
    """Signs of every ReLU pre-activation and of the hinge slack."""
    th_h, th_a = model.split(theta)
    out_h, acts_h = model.h_net.forward(th_h, X)
    a, acts_a = model.alpha_net.forward(th_a, np.column_stack([X, w]))
    z = 0.5 * (1.0 + np.tanh(0.5 * out_h))
    slack = -v_obs(kind, z, X, y, w, e) - a
    parts = [act > 0 for act in acts_h[1:-1] + acts_a[1:-1]] + [slack > 0]
    return np.concatenate([p.ravel() for p in parts])


def gradient_error(model, X, y, w, kind, gamma, e, step=1e-5):
    """Compare analytic and central-difference gradients over every parameter.

    A parameter whose +-step perturbation flips a ReLU or the hinge has no
    derivative estimate there; such parameters are counted and left out.
    Returns ``(error, n_kinked)`` with ``error = |g - g_fd| / max(|g|, |g_fd|)``
    over the remaining parameters.
    """
    theta = model.params.copy()
    _, g = loss_and_grad(model, theta, X, y, w, kind, gamma, e)
    base = kink_pattern(model, theta, X, y, w, kind, e, gamma)
    fd = np.empty_like(theta)
    smooth = np.ones(theta.size, dtype=bool)
    for i in range(theta.size):
        old = theta[i]
        theta[i] = old + step
        up, _ = loss_and_grad(model, theta, X, y, w, kind, gamma, e, with_grad=False)
        flipped = np.any(kink_pattern(model, theta, X, y, w, kind, e, gamma) != base)
        theta[i] = old - step
        down, _ = loss_and_grad(model, theta, X, y, w, kind, gamma, e, with_grad=False)
        flipped |= np.any(kink_pattern(model, theta, X, y, w, kind, e, gamma) != base)
        theta[i] = old
        fd[i] = (up - down) / (2 * step)
        smooth[i] = not flipped
    g, fd = g[smooth], fd[smooth]
    err = float(np.linalg.norm(g - fd) / max(np.linalg.norm(g), np.linalg.norm(fd), 1e-300))
    return err, int((~smooth).sum())
