"""
Representation Formula - Solver
Pathwise solution values through the stopped backward characteristic:

    u(t, x) = u0(Y_{0,t}(x))               if the characteristic never exits
    u(t, x) = u_b(tau, Y_{tau,t}(x))       if it exits at time tau > 0

plus Monte Carlo expectations over seeded paths and the noise-free oracle.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from src.core.exceptions import ArgumentError, UsageError
from src.core.flow import stopped_backward
from src.core.geometry import as_points
from src.core.stochastic_calculus import BrownianPath, sample_path
from src.solver.parallel import map_paths, mean_and_se
from src.solver.problem import TransportProblem

logger = logging.getLogger(__name__)

Functional = Callable[[np.ndarray], np.ndarray]

# fine-step divisor of the noise-free oracle
ORACLE_REFINEMENT = 16


@dataclass(frozen=True)
class McEstimate:
    """Monte Carlo estimate of E[F(u(t, x))] at one point."""
    t: float
    point: np.ndarray
    mean: float
    se: float
    n_paths: int
    seed: int
    dt: float

    def to_dict(self) -> dict:
        return {'t': self.t, 'point': self.point.tolist(), 'mean': self.mean, 'se': self.se,
                'n_paths': self.n_paths, 'seed': self.seed, 'dt': self.dt}


@dataclass(frozen=True)
class FieldSnapshot:
    """Estimates on interior quadrature nodes at one time."""
    t: float
    points: np.ndarray
    weights: np.ndarray
    mean: np.ndarray
    se: np.ndarray
    n_paths: int
    seed: int
    dt: float

    def rows(self) -> List[Dict[str, Any]]:
        out = []
        for i, p in enumerate(self.points):
            row = {'t': self.t}
            row.update({f'x{k + 1}': float(v) for k, v in enumerate(p)})
            row.update({'mean': float(self.mean[i]), 'se': float(self.se[i]),
                        'n_paths': self.n_paths, 'dt': self.dt, 'seed': self.seed})
            out.append(row)
        return out


def _driving_path(problem: TransportProblem, path: BrownianPath) -> BrownianPath:
    return path if problem.noise else path.silenced()


def _check_bound(problem: TransportProblem, values: np.ndarray) -> None:
    M = problem.data_bound
    if np.any(np.abs(values) > M * (1.0 + 1e-12) + 1e-12):
        raise AssertionError(f"pathwise value exceeds the data bound M={M}")


def evaluate_pathwise(problem: TransportProblem, path: BrownianPath, t: float, x: Any,
                      dt: Optional[float] = None):
    """u(t, x; omega) for the path omega; batch input gives an array."""
    points, single = as_points(x, problem.dimension)
    if t < 0 or t > problem.horizon * (1 + 1e-12):
        raise ArgumentError(f"t={t} outside [0, T={problem.horizon}]")
    if t == 0:
        values = problem.u0(points)
    else:
        char = stopped_backward(problem.drift, problem.domain, _driving_path(problem, path), t, points, dt)
        values = np.empty(len(points))
        if np.any(~char.exited):
            values[~char.exited] = problem.u0(char.terminal[~char.exited])
        if np.any(char.exited):
            values[char.exited] = problem.ub(char.tau[char.exited], char.terminal[char.exited])
    _check_bound(problem, values)
    return float(values[0]) if single else values


def path_for(problem: TransportProblem, seed: int, index: int, dt: float) -> BrownianPath:
    """The index-th path of the seed family on the problem's time grid."""
    return sample_path(seed, index, problem.horizon, dt, problem.dimension)


def pathwise_samples(problem: TransportProblem, t: float, points: np.ndarray, n_paths: int, dt: float,
                     seed: int, functional: Optional[Functional] = None,
                     workers: Optional[int] = None) -> np.ndarray:
    """Stack (n_paths, n_points) of F(u(t, x; omega_i)) in path-index order."""
    points, _ = as_points(points, problem.dimension)

    def one(i: int) -> np.ndarray:
        values = evaluate_pathwise(problem, path_for(problem, seed, i, dt), t, points, dt)
        return functional(values) if functional is not None else values

    if not problem.noise:
        # every path is silenced, so the pathwise value is shared
        first = one(0)
        return np.repeat(first[None, :], n_paths, axis=0)
    return np.stack(map_paths(one, range(n_paths), workers))


def mc_expectation(problem: TransportProblem, t: float, points: Sequence, n_paths: int, dt: float,
                   seed: int, functional: Optional[Functional] = None,
                   workers: Optional[int] = None) -> List[McEstimate]:
    points = np.asarray(points, dtype=float)
    if points.ndim < 2:
        points = points.reshape(-1, problem.dimension)
    if n_paths < 1:
        raise ArgumentError("n_paths must be >= 1")
    if np.any(~problem.domain.interior_mask(points)):
        raise ArgumentError("mc_expectation requires interior points")
    stack = pathwise_samples(problem, t, points, n_paths, dt, seed, functional, workers)
    mean, se = mean_and_se(stack)
    return [McEstimate(float(t), points[i].copy(), float(mean[i]), float(se[i]), n_paths, seed, dt)
            for i in range(len(points))]


def mc_field(problem: TransportProblem, t: float, resolution: int, n_paths: int, dt: float, seed: int,
             functional: Optional[Functional] = None, workers: Optional[int] = None) -> FieldSnapshot:
    quad = problem.domain.interior_quadrature(resolution)
    stack = pathwise_samples(problem, t, quad.points, n_paths, dt, seed, functional, workers)
    mean, se = mean_and_se(stack)
    logger.info(f"mc_field t={t}: {len(quad)} nodes x {n_paths} paths")
    return FieldSnapshot(float(t), quad.points, quad.weights, mean, se, n_paths, seed, dt)


def deterministic_solution(problem: TransportProblem, t: float, x: Any, dt: float = 1e-3):
    """Noise-free characteristics at the fine step dt/16 with bisection exit refinement."""
    if problem.noise:
        raise UsageError("deterministic_solution requires the noise switch off")
    points, single = as_points(x, problem.dimension)
    if t == 0:
        values = problem.u0(points)
    else:
        fine = BrownianPath.silent(t, dt / ORACLE_REFINEMENT, problem.dimension)
        values = evaluate_pathwise(problem, fine, fine.horizon, points)
    return float(values[0]) if single else values
