"""
Stochastic Calculus - Core
Seeded discrete Brownian paths and the partition sums that define Ito
integrals, Stratonovich integrals and covariations on a uniform grid.

Each path is generated by a Philox counter-based generator keyed by
(master seed, path index), so a path never depends on which worker drew it
or in which order.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from src.core.exceptions import ArgumentError

logger = logging.getLogger(__name__)

GRID_TOL = 1e-9


def path_generator(master_seed: int, path_index: int) -> np.random.Generator:
    """Independent stream for one path, derived from the seed sequence tree."""
    seq = np.random.SeedSequence(int(master_seed), spawn_key=(int(path_index),))
    return np.random.Generator(np.random.Philox(seq))


def grid_steps(horizon: float, dt: float) -> int:
    """Number of uniform steps of size dt in [0, T]; dt must divide T."""
    if dt <= 0:
        raise ArgumentError("dt must be positive")
    if horizon < dt * (1.0 - GRID_TOL):
        raise ArgumentError("horizon must be at least one step")
    n = int(round(horizon / dt))
    if abs(n * dt - horizon) > 1e-12 * max(1.0, horizon) + GRID_TOL * dt:
        raise ArgumentError(f"dt={dt} does not divide T={horizon}")
    return n


@dataclass(frozen=True)
class BrownianPath:
    """
    Discrete d-dimensional Brownian path on t_k = k dt, k = 0..N.

    ``increments[k]`` is B_{t_{k+1}} - B_{t_k}.
    """
    increments: np.ndarray
    dt: float
    master_seed: Optional[int] = None
    path_index: Optional[int] = None

    @property
    def dimension(self) -> int:
        return self.increments.shape[1]

    @property
    def steps(self) -> int:
        return self.increments.shape[0]

    @property
    def horizon(self) -> float:
        return self.steps * self.dt

    @cached_property
    def times(self) -> np.ndarray:
        return np.arange(self.steps + 1) * self.dt

    @cached_property
    def values(self) -> np.ndarray:
        """B at grid nodes, shape (N+1, d), with B_0 = 0."""
        out = np.zeros((self.steps + 1, self.dimension))
        np.cumsum(self.increments, axis=0, out=out[1:])
        return out

    @property
    def is_silent(self) -> bool:
        return not np.any(self.increments)

    def index_of(self, t: float) -> int:
        """Grid index of a grid-aligned time."""
        k = int(round(t / self.dt))
        if k < 0 or k > self.steps or abs(k * self.dt - t) > GRID_TOL * max(self.dt, 1.0):
            raise ArgumentError(f"time {t} is not on the path grid (dt={self.dt})")
        return k

    def value_at(self, t: float) -> np.ndarray:
        """B_t with linear interpolation between grid nodes."""
        if t < 0 or t > self.horizon * (1 + GRID_TOL):
            raise ArgumentError(f"time {t} outside [0, {self.horizon}]")
        s = min(t / self.dt, float(self.steps))
        k = min(int(np.floor(s)), self.steps - 1)
        frac = s - k
        return (1.0 - frac) * self.values[k] + frac * self.values[k + 1]

    def component(self, j: int) -> "AdaptedSamplePath":
        return AdaptedSamplePath(self.values[:, j].copy(), self.dt)

    def silenced(self) -> "BrownianPath":
        """Same grid with all increments zero (noise switched off)."""
        return BrownianPath(np.zeros_like(self.increments), self.dt, self.master_seed, self.path_index)

    def coarsen(self, factor: int) -> "BrownianPath":
        """The same path observed on a grid coarser by ``factor``."""
        if factor < 1 or self.steps % factor:
            raise ArgumentError(f"cannot coarsen {self.steps} steps by {factor}")
        inc = self.increments.reshape(self.steps // factor, factor, self.dimension).sum(axis=1)
        return BrownianPath(inc, self.dt * factor, self.master_seed, self.path_index)

    @classmethod
    def silent(cls, horizon: float, dt: float, dimension: int) -> "BrownianPath":
        n = max(1, int(round(horizon / dt)))
        return cls(np.zeros((n, dimension)), horizon / n)


def sample_path(master_seed: int, path_index: int, horizon: float, dt: float, dimension: int) -> BrownianPath:
    """Regenerating with the same (seed, index) reproduces the increments bit for bit."""
    n = grid_steps(horizon, dt)
    rng = path_generator(master_seed, path_index)
    increments = rng.standard_normal((n, dimension)) * np.sqrt(dt)
    return BrownianPath(increments, dt, int(master_seed), int(path_index))


@dataclass(frozen=True)
class AdaptedSamplePath:
    """Samples X_{t_k}, k = 0..N, scalar (N+1,) or vector (N+1, m), on a path grid."""
    samples: np.ndarray
    dt: float

    @property
    def steps(self) -> int:
        return self.samples.shape[0] - 1


def _aligned(steps_x: int, dt_x: float, steps_y: int, dt_y: float) -> None:
    if steps_x != steps_y or abs(dt_x - dt_y) > GRID_TOL * max(dt_x, dt_y):
        raise ArgumentError(f"misaligned grids: {steps_x} steps of {dt_x} vs {steps_y} steps of {dt_y}")


def _cut(steps: int, dt: float, t: float):
    """Number of full steps up to t and the fraction of the partial last step."""
    if t < 0 or t > steps * dt * (1 + GRID_TOL):
        raise ArgumentError(f"time {t} outside [0, {steps * dt}]")
    s = min(t / dt, float(steps))
    full = int(np.floor(s + GRID_TOL))
    full = min(full, steps)
    frac = s - full if full < steps else 0.0
    return full, max(frac, 0.0)


def _increments_up_to(values: np.ndarray, full: int, frac: float) -> np.ndarray:
    inc = np.diff(values[: full + 1], axis=0)
    if frac > 0:
        partial = frac * (values[full + 1] - values[full])
        inc = np.concatenate([inc, partial[None, ...]], axis=0)
    return inc


def _pair(X: AdaptedSamplePath, B: BrownianPath, t: float):
    _aligned(X.steps, X.dt, B.steps, B.dt)
    full, frac = _cut(B.steps, B.dt, t)
    dB = _increments_up_to(B.values, full, frac)
    return full, frac, dB


def _contract(x: np.ndarray, dB: np.ndarray) -> np.ndarray:
    """sum_k x_k . dB_k; x scalar per step broadcasts over components."""
    if x.ndim == 1:
        return np.sum(x[:, None] * dB, axis=0) if dB.shape[1] > 1 else np.array(np.sum(x * dB[:, 0]))
    return np.sum(np.einsum('kj,kj->k', x, dB))


def ito_integral(X: AdaptedSamplePath, B: BrownianPath, t: float):
    """sum_k X_{t_k} (B_{t_{k+1} ^ t} - B_{t_k}) over t_k < t."""
    full, frac, dB = _pair(X, B, t)
    left = X.samples[: len(dB)]
    out = _contract(left, dB)
    return float(out) if np.ndim(out) == 0 else out


def stratonovich_integral(X: AdaptedSamplePath, B: BrownianPath, t: float):
    """Midpoint sum with weights (X_{t_k} + X_{t_{k+1}})/2; X interpolated linearly on a partial step."""
    full, frac, dB = _pair(X, B, t)
    xs = X.samples
    right = xs[1: full + 1]
    if frac > 0:
        right = np.concatenate([right, (xs[full] + frac * (xs[full + 1] - xs[full]))[None, ...]], axis=0)
    mid = 0.5 * (xs[: len(dB)] + right)
    out = _contract(mid, dB)
    return float(out) if np.ndim(out) == 0 else out


def covariation(X: AdaptedSamplePath, Y: AdaptedSamplePath, t: float) -> float:
    """sum_k (X_{k+1} - X_k)(Y_{k+1} - Y_k) up to t."""
    _aligned(X.steps, X.dt, Y.steps, Y.dt)
    full, frac = _cut(X.steps, X.dt, t)
    dX = _increments_up_to(X.samples, full, frac)
    dY = _increments_up_to(Y.samples, full, frac)
    return float(np.sum(dX * dY))


def running_ito(integrand: np.ndarray, dB: np.ndarray) -> np.ndarray:
    """Running Ito sums at every grid node for integrand (N+1, m) against dB (N, m)."""
    steps = np.einsum('km,km->k', integrand[:-1], dB)
    return np.concatenate([[0.0], np.cumsum(steps)])


def running_stratonovich(integrand: np.ndarray, dB: np.ndarray) -> np.ndarray:
    mid = 0.5 * (integrand[:-1] + integrand[1:])
    steps = np.einsum('km,km->k', mid, dB)
    return np.concatenate([[0.0], np.cumsum(steps)])


def running_covariation(process: np.ndarray, dB: np.ndarray) -> np.ndarray:
    """Running sum_k dX_k . dB_k for process (N+1, m)."""
    steps = np.einsum('km,km->k', np.diff(process, axis=0), dB)
    return np.concatenate([[0.0], np.cumsum(steps)])
