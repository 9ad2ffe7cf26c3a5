"""
Parabolic Oracle - Analysis
Finite-difference solution of  d_t w + b.grad w = 1/2 Lap w  with w(0) = u0
and Dirichlet values u_b on the whole boundary: the expectation of the
representation solution has this law. Crank-Nicolson in time, central
second differences and upwinded advection in space.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Sequence

import numpy as np
from scipy import sparse
from scipy.interpolate import RegularGridInterpolator
from scipy.sparse.linalg import splu

from src.core.drift import DriftField
from src.core.exceptions import ArgumentError, SchemeError, UnsupportedDomainError
from src.core.geometry import Domain
from src.solver.data import DataFunction

logger = logging.getLogger(__name__)

# growth beyond this multiple of the data bound is treated as instability
BLOW_UP_FACTOR = 10.0


@dataclass
class OracleSolution:
    """Gridded w at the requested times, sampled by multilinear interpolation."""
    axes: tuple
    times: np.ndarray
    values: np.ndarray
    dt_grid: float
    parameters: Dict[str, Any] = field(default_factory=dict)

    def _index(self, t: float) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise ArgumentError(f"oracle has no snapshot at t={t} (stored: {self.times.tolist()})")
        return k

    def evaluate(self, t: float, points: np.ndarray) -> np.ndarray:
        interp = RegularGridInterpolator(self.axes, self.values[self._index(t)], method='linear')
        return interp(np.atleast_2d(points))

    def __call__(self, t: float, points: np.ndarray) -> np.ndarray:
        return self.evaluate(t, points)


def _operator(drift: DriftField, t: float, points: np.ndarray, shape: tuple, h: np.ndarray) -> sparse.csr_matrix:
    """1/2 Lap_h - upwind(b.grad) on the full tensor grid; edge rows only see existing neighbours."""
    n = points.shape[0]
    d = len(shape)
    b = drift.velocity_batch(t, points)
    idx = np.arange(n).reshape(shape)
    rows, cols, vals = [], [], []
    diag = np.zeros(n)
    for j in range(d):
        lo = [slice(None)] * d
        hi = [slice(None)] * d
        lo[j], hi[j] = slice(0, -1), slice(1, None)
        left, right = idx[tuple(lo)].ravel(), idx[tuple(hi)].ravel()
        diff = 0.5 / h[j] ** 2
        # diffusion between neighbours
        rows += [left, right]
        cols += [right, left]
        vals += [np.full(len(left), diff), np.full(len(right), diff)]
        diag[left] -= diff
        diag[right] -= diff
        # upwind advection: -b_j (w_i - w_{i-1})/h if b_j > 0, -b_j (w_{i+1} - w_i)/h otherwise
        bj_right = b[right, j]
        pos = bj_right > 0
        rows.append(right[pos])
        cols.append(left[pos])
        vals.append(bj_right[pos] / h[j])
        diag[right[pos]] -= bj_right[pos] / h[j]
        bj_left = b[left, j]
        neg = bj_left < 0
        rows.append(left[neg])
        cols.append(right[neg])
        vals.append(-bj_left[neg] / h[j])
        diag[left[neg]] += bj_left[neg] / h[j]
    rows.append(np.arange(n))
    cols.append(np.arange(n))
    vals.append(diag)
    return sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))


def parabolic_oracle(drift: DriftField, domain: Domain, initial: DataFunction, boundary: DataFunction,
                     resolution: int, dt_grid: float, times: Sequence[float]) -> OracleSolution:
    """
    Solve on the vertex grid of the bounding box with resolution cells per
    axis. Non-interior nodes carry u_b(t, nearest boundary point); on boxes
    and intervals the edge nodes lie on the boundary itself.
    """
    d = domain.dimension
    if d >= 3:
        raise UnsupportedDomainError("the finite-difference oracle supports d = 1, 2")
    if resolution < 4:
        raise ArgumentError("oracle resolution must be >= 4")
    times = np.sort(np.asarray(times, dtype=float))
    if dt_grid <= 0 or np.any(times < 0):
        raise ArgumentError("oracle needs dt_grid > 0 and non-negative times")
    checkpoints = np.rint(times / dt_grid).astype(int)
    if np.any(np.abs(checkpoints * dt_grid - times) > 1e-9 * max(1.0, float(times.max()))):
        raise ArgumentError(f"oracle times must be multiples of dt_grid={dt_grid}")
    lo, hi = domain.bbox
    axes = tuple(np.linspace(lo[k], hi[k], resolution + 1) for k in range(d))
    h = np.array([a[1] - a[0] for a in axes])
    shape = tuple(len(a) for a in axes)
    mesh = np.meshgrid(*axes, indexing='ij')
    points = np.stack([m.ravel() for m in mesh], axis=1)
    inner = domain.interior_mask(points)
    if not np.any(inner):
        raise ArgumentError("oracle grid has no interior nodes")
    outer = ~inner
    anchors, _, _ = domain.nearest_boundary(points[outer])

    def dirichlet(t: float) -> np.ndarray:
        return boundary(t, anchors)

    bound = max(float(np.max(np.abs(initial(0.0, points[inner])))), 1e-300)
    w = np.empty(len(points))
    w[inner] = initial(0.0, points[inner])
    w[outer] = dirichlet(0.0)
    bound = max(bound, float(np.max(np.abs(w[outer]))) if np.any(outer) else 0.0)

    def split(t: float):
        L = _operator(drift, t, points, shape, h)
        return L[inner][:, inner].tocsc(), L[inner][:, outer].tocsr()

    eye = sparse.identity(int(inner.sum()), format='csc')
    cached = None
    snapshots = {}
    steps = int(checkpoints.max())
    if 0 in checkpoints:
        snapshots[0] = w.reshape(shape).copy()
    for n in range(steps):
        t0, t1 = n * dt_grid, (n + 1) * dt_grid
        if cached is None or drift.time_dependent:
            L_ii, L_ib = split(t0 + 0.5 * dt_grid)
            lu = splu((eye - 0.5 * dt_grid * L_ii).tocsc())
            explicit = (eye + 0.5 * dt_grid * L_ii).tocsr()
            cached = (L_ib, lu, explicit)
        L_ib, lu, explicit = cached
        g0, g1 = dirichlet(t0), dirichlet(t1)
        rhs = explicit @ w[inner] + 0.5 * dt_grid * (L_ib @ (g0 + g1))
        w[inner] = lu.solve(rhs)
        w[outer] = g1
        if not np.all(np.isfinite(w)) or np.max(np.abs(w)) > BLOW_UP_FACTOR * max(bound, 1.0):
            raise SchemeError(f"oracle blew up at t={t1:.4g} (max |w| = {np.max(np.abs(w)):.3g})")
        if n + 1 in checkpoints:
            snapshots[n + 1] = w.reshape(shape).copy()
    values = np.stack([snapshots[int(k)] for k in checkpoints])
    logger.info(f"parabolic oracle: {int(inner.sum())} unknowns, {steps} steps of {dt_grid}")
    return OracleSolution(axes, times, values, dt_grid,
                          {'resolution': resolution, 'dt_grid': dt_grid, 'drift': drift.name})


def oracle_for(problem, resolution: int, dt_grid: float, times: Sequence[float]) -> OracleSolution:
    """Oracle with the domain, drift and data of a transport problem."""
    return parabolic_oracle(problem.drift, problem.domain, problem.initial, problem.boundary,
                            resolution, dt_grid, times)
