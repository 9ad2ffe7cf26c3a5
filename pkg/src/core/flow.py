"""
Flow - Core
Forward characteristics X_{s,t}(x), time-reversed characteristics Y_{s,t}(y)
and the stopped backward process with its exit time tau(t, x).

Additive noise makes the Euler step the same in Ito and Stratonovich form:
    X_{k+1} = X_k + b(t_k, X_k) dt + dB_k
    Y_k     = Y_{k+1} - b(t_{k+1}, Y_{k+1}) dt - dB_k
All routines are vectorized over a batch of starting points sharing one path.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np

from src.core.drift import DriftField
from src.core.exceptions import ArgumentError
from src.core.geometry import Domain, as_points
from src.core.stochastic_calculus import BrownianPath

logger = logging.getLogger(__name__)

BISECTION_STEPS = 60


@dataclass(frozen=True)
class FlowTrajectory:
    """Positions (k_t - k_s + 1, n, d) on grid nodes from s to t, in time order."""
    direction: str
    s: float
    t: float
    times: np.ndarray
    positions: np.ndarray
    path: BrownianPath

    @property
    def start(self) -> np.ndarray:
        return self.positions[0] if self.direction == 'forward' else self.positions[-1]

    @property
    def end(self) -> np.ndarray:
        return self.positions[-1] if self.direction == 'forward' else self.positions[0]


@dataclass(frozen=True)
class StoppedCharacteristic:
    """
    Outcome of the stopped backward process for a batch of query points.

    ``exited[i]`` False means tau = 0 and the terminal point is Y_{0,t}(x);
    True means the terminal point lies on the boundary and 0 < tau <= t.
    """
    t: float
    points: np.ndarray
    exited: np.ndarray
    tau: np.ndarray
    terminal: np.ndarray
    residual: np.ndarray

    def __len__(self) -> int:
        return len(self.exited)

    @property
    def exit_fraction(self) -> float:
        return float(np.mean(self.exited)) if len(self.exited) else 0.0


def _steps(path: BrownianPath, s: float, t: float):
    if s > t + 1e-12:
        raise ArgumentError(f"flow requires s <= t, got s={s}, t={t}")
    return path.index_of(s), path.index_of(t)


def _check_dt(path: BrownianPath, dt: Optional[float]) -> None:
    if dt is not None and abs(dt - path.dt) > 1e-9 * max(dt, 1.0):
        raise ArgumentError(f"dt={dt} does not match the path grid dt={path.dt}")


def forward_flow(field: DriftField, path: BrownianPath, s: float, t: float, x: Any,
                 dt: Optional[float] = None) -> FlowTrajectory:
    """Euler-Maruyama forward from (s, x) to t."""
    _check_dt(path, dt)
    ks, kt = _steps(path, s, t)
    pts, _ = as_points(x, field.dimension)
    out = np.empty((kt - ks + 1,) + pts.shape)
    out[0] = pts
    current = pts.copy()
    for j, k in enumerate(range(ks, kt)):
        current = current + field.velocity_batch(path.times[k], current) * path.dt + path.increments[k]
        out[j + 1] = current
    return FlowTrajectory('forward', s, t, path.times[ks: kt + 1], out, path)


def backward_flow(field: DriftField, path: BrownianPath, s: float, t: float, y: Any,
                  dt: Optional[float] = None) -> FlowTrajectory:
    """Reverse-time Euler from (t, y) down to s using the stored increments."""
    _check_dt(path, dt)
    ks, kt = _steps(path, s, t)
    pts, _ = as_points(y, field.dimension)
    out = np.empty((kt - ks + 1,) + pts.shape)
    out[-1] = pts
    current = pts.copy()
    for k in range(kt - 1, ks - 1, -1):
        current = current - field.velocity_batch(path.times[k + 1], current) * path.dt - path.increments[k]
        out[k - ks] = current
    return FlowTrajectory('backward', s, t, path.times[ks: kt + 1], out, path)


def _refine_crossing(domain: Domain, inside_pt: np.ndarray, outside_pt: np.ndarray):
    """Bisection on the segment for the first non-interior point; lam measured from inside_pt."""
    lo = np.zeros(len(inside_pt))
    hi = np.ones(len(inside_pt))
    seg = outside_pt - inside_pt
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        crossed = domain.level(inside_pt + mid[:, None] * seg) > -domain.tol
        hi = np.where(crossed, mid, hi)
        lo = np.where(crossed, lo, mid)
    return hi, inside_pt + hi[:, None] * seg


def stopped_backward(field: DriftField, domain: Domain, path: BrownianPath, t: float, x: Any,
                     dt: Optional[float] = None) -> StoppedCharacteristic:
    """
    Walk backward from (t, x); tau is the first crossing met (sup of exit
    times). Crossings inside a step are localized by bisection on the
    linearly interpolated segment and the exterior excursion is discarded.
    """
    _check_dt(path, dt)
    pts, _ = as_points(x, domain.dimension)
    if np.any(~domain.interior_mask(pts)):
        raise ArgumentError("stopped_backward requires interior query points")
    kt = path.index_of(t)
    n = len(pts)
    exited = np.zeros(n, dtype=bool)
    tau = np.zeros(n)
    terminal = pts.copy()
    residual = np.zeros(n)
    current = pts.copy()
    active = np.ones(n, dtype=bool)
    for k in range(kt - 1, -1, -1):
        if not np.any(active):
            break
        idx = np.flatnonzero(active)
        prev = current[idx]
        nxt = prev - field.velocity_batch(path.times[k + 1], prev) * path.dt - path.increments[k]
        left = domain.level(nxt) > -domain.tol
        if np.any(left):
            hit = idx[left]
            lam, crossing = _refine_crossing(domain, prev[left], nxt[left])
            exited[hit] = True
            tau[hit] = path.times[k + 1] - lam * path.dt
            terminal[hit] = crossing
            residual[hit] = np.abs(domain.level(crossing))
            active[hit] = False
        stay = idx[~left]
        current[stay] = nxt[~left]
    terminal[active] = current[active]
    if np.any(domain.classify(terminal) > 0):
        raise AssertionError("stopped backward terminal point left the closure of the domain")
    return StoppedCharacteristic(float(t), pts, exited, tau, terminal, residual)
