"""
Renormalization - Analysis
v(t, x) = E[beta(u(t, x))] on a regular interior grid, and the residual of
the interior parabolic equation  d_t v + b.grad v - 1/2 Lap v = 0  with a
noise-floor model for Monte Carlo input.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from src.core.drift import DriftField
from src.core.exceptions import ArgumentError
from src.core.geometry import Domain
from src.solver.parallel import mean_and_se
from src.solver.problem import TransportProblem
from src.solver.representation import pathwise_samples
from src.verification.test_functions import BetaFunction

logger = logging.getLogger(__name__)

CLEARANCE_SPACINGS = 2


@dataclass(frozen=True)
class InteriorGrid:
    """Tensor grid given by one coordinate axis per dimension."""
    axes: tuple

    @property
    def dimension(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple:
        return tuple(len(a) for a in self.axes)

    @property
    def spacing(self) -> np.ndarray:
        return np.array([a[1] - a[0] for a in self.axes])

    @property
    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing='ij')
        return np.stack([m.ravel() for m in mesh], axis=1)

    def clearance(self, domain: Domain) -> float:
        return float(np.min(domain.distance_to_boundary(self.points)))


def interior_grid(domain: Domain, points_per_axis: int = 17, extent: Optional[float] = None) -> InteriorGrid:
    """Centred cube of half-width extent (default 0.6 inradius / sqrt(d)) with clearance checked."""
    if points_per_axis < 3:
        raise ArgumentError("an interior grid needs at least 3 points per axis")
    d = domain.dimension
    half = 0.6 * domain.inradius / np.sqrt(d) if extent is None else float(extent)
    c = domain.center
    grid = InteriorGrid(tuple(np.linspace(c[k] - half, c[k] + half, points_per_axis) for k in range(d)))
    check_clearance(domain, grid)
    return grid


def check_clearance(domain: Domain, grid: InteriorGrid) -> None:
    pts = grid.points
    if np.any(~domain.interior_mask(pts)):
        raise ArgumentError("interior grid has nodes outside the domain")
    need = CLEARANCE_SPACINGS * float(np.max(grid.spacing))
    if grid.clearance(domain) < need:
        raise ArgumentError(f"grid clearance {grid.clearance(domain):.4g} below {CLEARANCE_SPACINGS} spacings")


@dataclass
class ExpectationField:
    """v = E[beta(u)] on grid nodes at each time, with standard errors."""
    beta: str
    times: np.ndarray
    grid: InteriorGrid
    values: np.ndarray
    se: np.ndarray
    n_paths: int = 0
    dt: float = 0.0
    seed: int = 0

    @classmethod
    def from_function(cls, fn: Callable[[float, np.ndarray], np.ndarray], grid: InteriorGrid,
                      times: Sequence[float], beta: str = 'exact') -> "ExpectationField":
        """An exactly sampled field with zero standard error."""
        times = np.asarray(times, dtype=float)
        values = np.stack([fn(float(t), grid.points) for t in times])
        return cls(beta, times, grid, values, np.zeros_like(values))

    def frame(self, k: int) -> np.ndarray:
        return self.values[k].reshape(self.grid.shape)

    def rows(self) -> List[Dict[str, Any]]:
        pts = self.grid.points
        out = []
        for k, t in enumerate(self.times):
            for i, p in enumerate(pts):
                row = {'t': float(t)}
                row.update({f'x{j + 1}': float(v) for j, v in enumerate(p)})
                row.update({'value': float(self.values[k, i]), 'se': float(self.se[k, i]),
                            'n_paths': self.n_paths, 'dt': self.dt, 'seed': self.seed})
                out.append(row)
        return out


def renormalized_expectation(problem: TransportProblem, beta: BetaFunction, grid: InteriorGrid,
                             times: Sequence[float], n_paths: int, dt: float, seed: int,
                             workers: Optional[int] = None) -> ExpectationField:
    check_clearance(problem.domain, grid)
    times = np.asarray(times, dtype=float)
    values, ses = [], []
    for t in times:
        stack = pathwise_samples(problem, float(t), grid.points, n_paths, dt, seed, beta, workers)
        mean, se = mean_and_se(stack)
        values.append(mean)
        ses.append(se)
    logger.info(f"E[{beta.name}(u)] on {len(grid.points)} nodes x {len(times)} times, {n_paths} paths")
    return ExpectationField(beta.name, times, grid, np.stack(values), np.stack(ses), n_paths, dt, seed)


@dataclass
class ParabolicResidual:
    """d_t v + b.grad v - 1/2 Lap v on inner grid nodes, with the predicted MC noise floor."""
    nodes: np.ndarray
    times: np.ndarray
    values: np.ndarray
    noise_floor: np.ndarray
    spacing: np.ndarray
    dt_grid: float
    signal: float
    parameters: Dict[str, Any] = field(default_factory=dict)

    @property
    def aggregate(self) -> float:
        """Root mean square of the node residuals."""
        return float(np.sqrt(np.mean(self.values ** 2)))

    @property
    def floor_aggregate(self) -> float:
        return float(np.sqrt(np.mean(self.noise_floor ** 2)))

    @property
    def noise_dominated(self) -> bool:
        return self.floor_aggregate > self.signal

    @property
    def within_floor(self) -> bool:
        return self.aggregate <= 3.0 * self.floor_aggregate

    def to_dict(self) -> Dict[str, Any]:
        return {'aggregate': self.aggregate, 'noise_floor': self.floor_aggregate, 'signal': self.signal,
                'noise_dominated': self.noise_dominated, 'within_floor': self.within_floor,
                'spacing': self.spacing.tolist(), 'dt_grid': self.dt_grid, **self.parameters}


def _shift(a: np.ndarray, axis: int, step: int) -> np.ndarray:
    """Inner-node view of a shifted by step along axis."""
    index = [slice(1, -1)] * a.ndim
    index[axis] = slice(1 + step, a.shape[axis] - 1 + step)
    return a[tuple(index)]


def parabolic_residual(v: ExpectationField, field: DriftField) -> ParabolicResidual:
    """Forward difference in time, central differences in space, on inner nodes."""
    if len(v.times) < 2:
        raise ArgumentError("parabolic_residual needs at least two times")
    steps = np.diff(v.times)
    if not np.allclose(steps, steps[0], rtol=1e-9):
        raise ArgumentError("parabolic_residual needs a uniform time grid")
    dt_grid = float(steps[0])
    h = v.grid.spacing
    d = v.grid.dimension
    shape = v.grid.shape
    inner = np.zeros(shape, dtype=bool)
    inner[tuple([slice(1, -1)] * d)] = True
    nodes = v.grid.points[inner.ravel()]
    out, floors, lap_parts = [], [], []
    for k in range(len(v.times) - 1):
        now = v.frame(k)
        nxt = v.frame(k + 1)
        center = now[tuple([slice(1, -1)] * d)]
        dvdt = (nxt[tuple([slice(1, -1)] * d)] - center) / dt_grid
        grad = np.stack([(_shift(now, j, 1) - _shift(now, j, -1)) / (2.0 * h[j]) for j in range(d)], axis=-1)
        lap = sum((_shift(now, j, 1) - 2.0 * center + _shift(now, j, -1)) / h[j] ** 2 for j in range(d))
        b = field.velocity_batch(float(v.times[k]), nodes).reshape(center.shape + (d,))
        residual = dvdt + np.sum(b * grad, axis=-1) - 0.5 * lap
        se = np.maximum(v.se[k], v.se[k + 1]).reshape(shape)[tuple([slice(1, -1)] * d)]
        speed = np.linalg.norm(b, axis=-1)
        hmin = float(np.min(h))
        floors.append((se * (2.0 * d / hmin ** 2 + 2.0 * speed / hmin + 1.0 / dt_grid)).ravel())
        out.append(residual.ravel())
        lap_parts.append((0.5 * lap).ravel())
    signal = float(np.sqrt(np.mean(np.concatenate(lap_parts) ** 2)))
    report = ParabolicResidual(nodes, v.times[:-1], np.stack(out), np.stack(floors), h, dt_grid, signal,
                               {'beta': v.beta, 'n_paths': v.n_paths, 'dt': v.dt, 'seed': v.seed})
    if report.noise_dominated:
        logger.warning(f"parabolic residual is noise dominated: floor {report.floor_aggregate:.3e} "
                       f"exceeds signal {signal:.3e}")
    return report


@dataclass
class MassTrend:
    """int_U E[beta(u(t))] dx over time."""
    times: np.ndarray
    mass: np.ndarray
    se: np.ndarray

    @property
    def non_increasing(self) -> bool:
        """Monotone within 3 SE of each increment."""
        band = 3.0 * np.sqrt(self.se[1:] ** 2 + self.se[:-1] ** 2) + 1e-12
        return bool(np.all(np.diff(self.mass) <= band))


def renormalized_mass(problem: TransportProblem, beta: BetaFunction, times: Sequence[float], resolution: int,
                      n_paths: int, dt: float, seed: int, workers: Optional[int] = None) -> MassTrend:
    """Per-path masses on the interior quadrature, so the SE accounts for node correlation."""
    times = np.asarray(times, dtype=float)
    quad = problem.domain.interior_quadrature(resolution)
    per_path = np.stack([pathwise_samples(problem, float(t), quad.points, n_paths, dt, seed, beta, workers)
                         @ quad.weights for t in times], axis=1)
    mass, se = mean_and_se(per_path)
    return MassTrend(times, mass, se)
