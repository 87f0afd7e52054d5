"""Seeded potential-outcome generators and the RCT observation mechanism.

Randomness comes from Philox counter-based generators keyed by
``SeedSequence([seed, crc32(stream)])``. A stream name identifies the
dataset role (``"train"``, ``"test/p=0.5"``, ...), so every dataset in an
experiment is reproducible in isolation and across platforms.
"""
from __future__ import annotations

import csv
import zlib
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import ObservedData, PotentialOutcomes, _as_2d
from .oracle import MixtureConditionalModel

HIGHDIM_A = (
    0.50067509, -0.67108696, -2.22006362, -0.37834265, 1.05841302,
    -0.4509034, 1.15857361, 0.62236239, -0.77458079, -0.74790281,
)


def stream_rng(seed: int, stream: str = "") -> np.random.Generator:
    """Independent Philox generator for ``(seed, stream)``."""
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    key = zlib.crc32(stream.encode("utf-8"))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), key])))


class _ShiftModel(MixtureConditionalModel):
    """``Y(0) ~ N(m(x), s^2)``, ``Y(1) ~ N(m(x) + 1.5 - U shift(x), s^2)``, ``U ~ Bern(p)``."""

    p: float
    sigma: float
    n_features: int

    def _validate(self):
        if not 0 <= self.p <= 1:
            raise ValueError(f"p must lie in [0, 1], got {self.p!r}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma!r}")

    def base_mean(self, X):
        raise NotImplementedError

    def shift(self, X):
        raise NotImplementedError

    def sample_covariates(self, rng, n):
        return rng.uniform(-3.0, 3.0, size=(n, self.n_features))

    def arm_components(self, X, w):
        X = _as_2d(X)
        m = self.base_mean(X)
        n = len(X)
        if w == 0:
            return np.ones((n, 1)), m[:, None], np.full((n, 1), self.sigma)
        if self.p in (0.0, 1.0):
            mu = m + 1.5 - self.p * self.shift(X)
            return np.ones((n, 1)), mu[:, None], np.full((n, 1), self.sigma)
        weights = np.tile([1.0 - self.p, self.p], (n, 1))
        means = np.column_stack([m + 1.5, m + 1.5 - self.shift(X)])
        return weights, means, np.full((n, 2), self.sigma)

    def sample(self, n: int, seed: int, stream: str = "") -> PotentialOutcomes:
        if n < 1:
            raise ValueError("n must be >= 1")
        rng = stream_rng(seed, stream)
        X = self.sample_covariates(rng, n)
        u = (rng.random(n) < self.p).astype(np.int64)
        eps0 = rng.standard_normal(n)
        eps1 = rng.standard_normal(n)
        m = self.base_mean(X)
        y0 = m + self.sigma * eps0
        y1 = m + 1.5 - u * self.shift(X) + self.sigma * eps1
        return PotentialOutcomes(X, y0, y1, u)


@dataclass(frozen=True)
class ToyModel(_ShiftModel):
    """One covariate ``X ~ U[-3, 3]``, mean ``sin x`` and shift ``(5x)_+``."""

    p: float
    sigma: float = 0.2
    n_features: int = field(default=1, init=False)

    def __post_init__(self):
        self._validate()

    def base_mean(self, X):
        return np.sin(_as_2d(X)[:, 0])

    def shift(self, X):
        return np.maximum(5.0 * _as_2d(X)[:, 0], 0.0)


@dataclass(frozen=True)
class HighDimModel(_ShiftModel):
    """Ten covariates, mean ``sin(a'x)`` and shift ``(2 (x1 + x2 + x3))_+``."""

    p: float
    sigma: float = 0.2
    a: tuple = HIGHDIM_A
    n_features: int = field(default=10, init=False)

    def __post_init__(self):
        self._validate()
        a = tuple(float(v) for v in self.a)
        if len(a) != 10:
            raise ValueError(f"a must have length 10, got {len(a)}")
        object.__setattr__(self, "a", a)

    def base_mean(self, X):
        return np.sin(_as_2d(X) @ np.asarray(self.a))

    def shift(self, X):
        return np.maximum(2.0 * _as_2d(X)[:, :3].sum(axis=1), 0.0)


def generate_toy(model: ToyModel, n: int, seed: int, stream: str = "") -> PotentialOutcomes:
    return model.sample(n, seed, stream)


def generate_highdim(model: HighDimModel, n: int, seed: int, stream: str = "") -> PotentialOutcomes:
    return model.sample(n, seed, stream)


def rct_observe(data: PotentialOutcomes, e: float, seed: int, stream: str = "assign") -> ObservedData:
    """Assign ``W ~ Bern(e)`` per unit and reveal ``Y = Y(W)``."""
    if not 0 < e < 1:
        raise ValueError(f"e must lie in (0, 1), got {e!r}")
    rng = stream_rng(seed, stream)
    w = (rng.random(len(data)) < e).astype(np.int64)
    return ObservedData(data.X, np.where(w == 1, data.y1, data.y0), w)


def csv_header(n_features: int) -> list:
    return [f"x_{j}" for j in range(n_features)] + ["y0", "y1", "u"]


def write_potential_outcomes(path, data: PotentialOutcomes) -> None:
    """Write ``x_0..x_{d-1},y0,y1,u`` rows; floats use round-trip repr."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(csv_header(data.n_features))
        u = data.u if data.u is not None else [None] * len(data)
        for x, a, b, k in zip(data.X, data.y0, data.y1, u):
            writer.writerow([*(repr(float(v)) for v in x), repr(float(a)), repr(float(b)),
                             "" if k is None else int(k)])


def read_potential_outcomes(path) -> PotentialOutcomes:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        d = len(header) - 3
        if header != csv_header(d):
            raise ValueError(f"unexpected header {header}")
        rows = list(reader)
    X = np.array([[float(v) for v in r[:d]] for r in rows]).reshape(len(rows), d)
    y0 = [float(r[d]) for r in rows]
    y1 = [float(r[d + 1]) for r in rows]
    u: Optional[list] = None
    if rows and all(r[d + 2] != "" for r in rows):
        u = [int(r[d + 2]) for r in rows]
    return PotentialOutcomes(X, y0, y1, u)
