"""
Stochastic Trace - Verification
Boundary values gamma u of the pathwise solution, estimated by the inward
deformation limit u(t, r - tau n) or by shifted mollification as eps -> 0,
plus the renormalized trace identity, the commutators R_eps and P_eps, the
trace bound and estimator stability.
"""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.core.drift import DriftField, ShiftedMollifier, shifted_mollifier
from src.core.exceptions import ArgumentError, DependencyError
from src.core.geometry import H_BAND_HALF_WIDTH, BoundaryPoint, BoundaryQuadrature, Domain
from src.core.stochastic_calculus import BrownianPath
from src.solver.parallel import map_paths, mean_and_se
from src.solver.problem import TransportProblem
from src.solver.representation import evaluate_pathwise, path_for
from src.verification.test_functions import BetaFunction, TestFunction
from src.verification.weakform import (DEFAULT_BOUNDARY_RESOLUTION, DEFAULT_INTERIOR_RESOLUTION, BoundaryTrace,
                                       TraceSource, WeakFormReport, check_times, loglog_slope, run_identity)

logger = logging.getLogger(__name__)

SpatialFn = Callable[[np.ndarray], np.ndarray]

EXTRAPOLATION_POINTS = 3
BOUND_TOLERANCE = 1e-9


def _validated_schedule(values: Sequence[float], name: str, upper: float) -> np.ndarray:
    schedule = np.asarray(values, dtype=float)
    if schedule.size < 2:
        raise ArgumentError(f"{name} schedule needs at least two values")
    if np.any(np.diff(schedule) >= 0):
        raise ArgumentError(f"{name} schedule must be strictly decreasing")
    if schedule[-1] <= 0 or schedule[0] > upper * (1 + 1e-12):
        raise ArgumentError(f"{name} schedule must lie in (0, {upper}]")
    return schedule


def _extrapolate(h: np.ndarray, raw: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Least-squares line through the last points of the schedule along axis -2
    of raw (..., n_schedule, n_nodes). Returns (value at h = 0, slope, max fit
    residual). The limit is not clipped to the data bound.
    """
    x = h[-EXTRAPOLATION_POINTS:]
    y = raw[..., -EXTRAPOLATION_POINTS:, :]
    xc = x - x.mean()
    slope = np.einsum('s,...sn->...n', xc, y - y.mean(axis=-2, keepdims=True)) / np.sum(xc ** 2)
    intercept = y.mean(axis=-2) - slope * x.mean()
    fit = intercept[..., None, :] + slope[..., None, :] * x[:, None]
    residual = np.max(np.abs(y - fit), axis=-2)
    return intercept, slope, residual


class TraceEstimator(ABC):
    """A schedule-indexed family of boundary approximations of u extrapolated to the limit."""

    parameter_name = 'h'

    def __init__(self, schedule: Sequence[float]):
        self.schedule = np.asarray(schedule, dtype=float)

    @abstractmethod
    def raw_values(self, problem: TransportProblem, path: BrownianPath, t: float,
                   quad: BoundaryQuadrature) -> np.ndarray:
        """Approximations (n_schedule, n_nodes) of gamma u(t) on one path."""

    def describe(self) -> Dict[str, Any]:
        return {'estimator': self.__class__.__name__.replace('Trace', '').lower(),
                self.parameter_name: self.schedule.tolist()}

    def estimate(self, problem: TransportProblem, path: BrownianPath, times: Sequence[float],
                 quad: BoundaryQuadrature):
        """(raw (n_t, n_schedule, n_nodes), values, slope, residual) for one path."""
        raw = np.stack([self.raw_values(problem, path, float(t), quad) for t in times])
        values, slope, residual = _extrapolate(self.schedule, raw)
        return raw, values, slope, residual

    def boundary_trace(self, problem: TransportProblem, path: BrownianPath, path_index: int,
                       times: np.ndarray, quad: BoundaryQuadrature) -> BoundaryTrace:
        _, values, slope, residual = self.estimate(problem, path, times, quad)
        return BoundaryTrace(values, self._normal_slope(slope), residual)

    def _normal_slope(self, slope: np.ndarray) -> Optional[np.ndarray]:
        return None


class DeformationTrace(TraceEstimator):
    """gamma u(t, r) = lim u(t, r - tau n(r)) as tau -> 0."""

    parameter_name = 'tau'

    def raw_values(self, problem, path, t, quad):
        domain = problem.domain
        _validated_schedule(self.schedule, 'tau', domain.delta_star)
        pts = np.concatenate([domain.deform_nodes(quad, float(tau)) for tau in self.schedule])
        if t == 0:
            values = problem.u0(pts)
        else:
            values = evaluate_pathwise(problem, path, t, pts)
        return values.reshape(len(self.schedule), len(quad))

    def _normal_slope(self, slope):
        # d/dtau u(r - tau n) at tau = 0
        return slope


class MollificationTrace(TraceEstimator):
    """gamma u(t, r) = lim (rho_eps *_n u)(t, r) as eps -> 0."""

    parameter_name = 'epsilon'

    def __init__(self, schedule: Sequence[float], lam: Optional[float] = None):
        super().__init__(schedule)
        self.lam = lam
        self._mollifiers: Dict[Tuple[int, float], ShiftedMollifier] = {}

    def _mollifier(self, domain: Domain, epsilon: float) -> ShiftedMollifier:
        key = (id(domain), epsilon)
        if key not in self._mollifiers:
            self._mollifiers[key] = shifted_mollifier(domain, epsilon, self.lam)
        return self._mollifiers[key]

    def raw_values(self, problem, path, t, quad):
        domain = problem.domain
        _validated_schedule(self.schedule, 'epsilon', domain.delta_star)
        out = np.empty((len(self.schedule), len(quad)))
        for j, eps in enumerate(self.schedule):
            mollifier = self._mollifier(domain, float(eps))
            mollifier.check(quad.positions)
            stencil = mollifier.stencil(quad.positions)
            n, k, d = stencil.shape
            flat = stencil.reshape(-1, d)
            values = problem.u0(flat) if t == 0 else evaluate_pathwise(problem, path, t, flat)
            out[j] = values.reshape(n, k) @ mollifier.kernel.lattice[1]
        return out


@dataclass
class TraceTable:
    """Precomputed gamma u on the full path grid for a fixed path family."""
    seed: int
    dt: float
    times: np.ndarray
    positions: np.ndarray
    values: np.ndarray
    slope: Optional[np.ndarray]
    residual: np.ndarray
    parameters: Dict[str, Any] = field(default_factory=dict)

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    def boundary_trace(self, problem: TransportProblem, path: BrownianPath, path_index: int,
                       times: np.ndarray, quad: BoundaryQuadrature) -> BoundaryTrace:
        if path.master_seed != self.seed or abs(path.dt - self.dt) > 1e-12 * max(self.dt, 1.0):
            raise DependencyError(f"trace table built for seed={self.seed}, dt={self.dt}; "
                                  f"got seed={path.master_seed}, dt={path.dt}")
        if path_index >= self.n_paths:
            raise DependencyError(f"trace table holds {self.n_paths} paths, index {path_index} requested")
        k = len(times)
        if k > len(self.times) or not np.allclose(times, self.times[:k], atol=1e-12):
            raise DependencyError("trace table time grid does not cover the requested times")
        if quad.positions.shape != self.positions.shape or not np.allclose(quad.positions, self.positions):
            raise DependencyError("trace table boundary nodes differ from the requested quadrature")
        slope = None if self.slope is None else self.slope[path_index, :k]
        return BoundaryTrace(self.values[path_index, :k], slope, self.residual[path_index, :k])


def trace_table(problem: TransportProblem, estimator: TraceEstimator, n_paths: int, dt: float,
                seed: int, until: float, boundary_resolution: int = DEFAULT_BOUNDARY_RESOLUTION,
                workers: Optional[int] = None) -> TraceTable:
    """gamma u for paths 0..n_paths-1 on every grid time in [0, until]."""
    K = int(check_times(problem.horizon, dt, [until])[0])
    grid = np.arange(K + 1) * dt
    quad = problem.domain.boundary_quadrature(boundary_resolution)

    def one(i: int):
        path = path_for(problem, seed, i, dt)
        trace = estimator.boundary_trace(problem, path, i, grid, quad)
        return trace.values, trace.slope, trace.residual

    results = map_paths(one, range(n_paths), workers) if problem.noise else [one(0)] * n_paths
    slope = None if results[0][1] is None else np.stack([r[1] for r in results])
    return TraceTable(seed, dt, grid, quad.positions.copy(), np.stack([r[0] for r in results]), slope,
                      np.stack([r[2] for r in results]), {'n_paths': n_paths, **estimator.describe()})


# -- trace samples ------------------------------------------------------------

@dataclass
class TraceSample:
    """gamma u at one boundary node and time, per path."""
    node: BoundaryPoint
    t: float
    per_path: np.ndarray
    raw: np.ndarray
    schedule: np.ndarray
    residual: np.ndarray
    data_bound: float
    method: str = 'deformation'

    @property
    def mean(self) -> float:
        return float(mean_and_se(self.per_path[:, None])[0][0])

    @property
    def se(self) -> float:
        return float(mean_and_se(self.per_path[:, None])[1][0])

    @property
    def margin(self) -> float:
        return float(self.data_bound - np.max(np.abs(self.per_path)))

    @property
    def overshoot(self) -> float:
        """Largest excess of |gamma u| over M on any path; zero inside the bound."""
        return max(0.0, -self.margin)

    def row(self, dt: float, seed: int) -> Dict[str, Any]:
        row = {'t': self.t, 'node_id': self.node.node_id}
        row.update({f'r{k + 1}': float(v) for k, v in enumerate(self.node.position)})
        row.update({'mean_trace': self.mean, 'se': self.se, 'M_margin': self.margin, 'M_overshoot': self.overshoot,
                    'n_paths': len(self.per_path), 'dt': dt, 'seed': seed})
        return row


def _resolve_nodes(domain: Domain, nodes: Union[BoundaryQuadrature, int, None]) -> BoundaryQuadrature:
    if isinstance(nodes, BoundaryQuadrature):
        return nodes
    return domain.boundary_quadrature(32 if nodes is None else int(nodes))


def default_tau_schedule(domain: Domain) -> np.ndarray:
    return domain.delta_star * np.array([0.16, 0.08, 0.04, 0.02])


def default_epsilon_schedule(domain: Domain) -> np.ndarray:
    return domain.delta_star * np.array([0.16, 0.08, 0.04])


def _trace_samples(problem: TransportProblem, estimator: TraceEstimator, times: Sequence[float],
                   quad: BoundaryQuadrature, n_paths: int, dt: float, seed: int,
                   workers: Optional[int], method: str) -> List[TraceSample]:
    times = np.asarray(times, dtype=float)
    check_times(problem.horizon, dt, times)

    def one(i: int):
        raw, values, _, residual = estimator.estimate(problem, path_for(problem, seed, i, dt), times, quad)
        return raw, values, residual

    results = map_paths(one, range(n_paths), workers) if problem.noise else [one(0)] * n_paths
    raw = np.stack([r[0] for r in results])
    values = np.stack([r[1] for r in results])
    residual = np.stack([r[2] for r in results])
    M = problem.data_bound
    samples = []
    for a, t in enumerate(times):
        for b in range(len(quad)):
            samples.append(TraceSample(quad[b], float(t), values[:, a, b], raw[:, a, :, b],
                                       estimator.schedule.copy(), residual[:, a, b], M, method))
    logger.info(f"{method} trace: {len(samples)} samples over {n_paths} paths")
    return samples


def trace_by_deformation(problem: TransportProblem, times: Sequence[float],
                         nodes: Union[BoundaryQuadrature, int, None] = None,
                         taus: Optional[Sequence[float]] = None, n_paths: int = 16, dt: float = 0.01,
                         seed: int = 0, workers: Optional[int] = None) -> List[TraceSample]:
    domain = problem.domain
    schedule = _validated_schedule(default_tau_schedule(domain) if taus is None else taus,
                                   'tau', domain.delta_star)
    return _trace_samples(problem, DeformationTrace(schedule), times, _resolve_nodes(domain, nodes),
                          n_paths, dt, seed, workers, 'deformation')


def trace_by_mollification(problem: TransportProblem, times: Sequence[float],
                           nodes: Union[BoundaryQuadrature, int, None] = None,
                           epsilons: Optional[Sequence[float]] = None, n_paths: int = 16, dt: float = 0.01,
                           seed: int = 0, lam: Optional[float] = None,
                           workers: Optional[int] = None) -> List[TraceSample]:
    domain = problem.domain
    schedule = _validated_schedule(default_epsilon_schedule(domain) if epsilons is None else epsilons,
                                   'epsilon', domain.delta_star)
    return _trace_samples(problem, MollificationTrace(schedule, lam), times, _resolve_nodes(domain, nodes),
                          n_paths, dt, seed, workers, 'mollification')


def trace_weakform_check(problem: TransportProblem, trace_source: Optional[TraceSource], beta: BetaFunction,
                         phi: TestFunction, n_paths: int, dt: float, times: Sequence[float], seed: int = 0,
                         interior_resolution: int = DEFAULT_INTERIOR_RESOLUTION,
                         boundary_resolution: int = DEFAULT_BOUNDARY_RESOLUTION,
                         workers: Optional[int] = None) -> WeakFormReport:
    """
    Residual of the beta-renormalized identity with the boundary terms
    -int int beta(gamma u) phi b.n and -int int beta(gamma u) phi n_i o dB^i.
    """
    if trace_source is None:
        raise DependencyError("trace_weakform_check needs a trace source")
    report = run_identity('trace_renormalized', problem, phi, n_paths, dt, times, seed, trace_source,
                          interior_resolution, boundary_resolution, workers, transform=beta)
    report.parameters['beta'] = beta.name
    return report


# -- commutators --------------------------------------------------------------

@dataclass
class CommutatorField:
    """R_eps or P_eps on probe nodes with its L1 norm over the probe."""
    kind: str
    epsilon: float
    probe_points: np.ndarray
    probe_weights: np.ndarray
    values: np.ndarray
    l1_norm: float

    def to_dict(self) -> Dict[str, Any]:
        return {'kind': self.kind, 'epsilon': self.epsilon, 'l1_norm': self.l1_norm,
                'probe_nodes': len(self.probe_weights)}


@dataclass(frozen=True)
class ProbeRegion:
    points: np.ndarray
    weights: np.ndarray


def probe_region(domain: Domain, kind: str = 'interior', resolution: int = 32) -> ProbeRegion:
    """
    'interior': nodes where h is saturated, so *_n is a plain convolution.
    'collar': nodes within delta* of the boundary, where the shift is active.
    """
    quad = domain.interior_quadrature(resolution)
    dist = domain.distance_to_boundary(quad.points)
    deep = (1.0 + 2.0 * H_BAND_HALF_WIDTH) * domain.delta_star
    if kind == 'interior':
        keep = dist >= deep
    elif kind == 'collar':
        keep = dist <= (1.0 - 2.0 * H_BAND_HALF_WIDTH) * domain.delta_star
    else:
        raise ArgumentError(f"unknown probe region {kind!r}")
    if not np.any(keep):
        raise ArgumentError(f"probe region {kind!r} is empty at resolution {resolution}")
    return ProbeRegion(quad.points[keep], quad.weights[keep])


def _probe(domain: Domain, probe: Union[ProbeRegion, str, None], resolution: int) -> ProbeRegion:
    if isinstance(probe, ProbeRegion):
        return probe
    return probe_region(domain, probe or 'interior', resolution)


def _stencil_values(mollifier: ShiftedMollifier, u: SpatialFn, points: np.ndarray):
    mollifier.check(points)
    stencil = mollifier.stencil(points)
    n, k, d = stencil.shape
    flat = stencil.reshape(-1, d)
    return stencil, flat, u(flat).reshape(n, k)


def commutator_R(field: DriftField, u: SpatialFn, domain: Domain, epsilon: float,
                 probe: Union[ProbeRegion, str, None] = None, t: float = 0.0, lam: Optional[float] = None,
                 resolution: int = 32) -> CommutatorField:
    """
    R_eps = (b.grad)(rho_eps *_n u) - rho_eps *_n ((b.grad) u), the second
    term taken distributionally on the kernel:
        sum_k u(z_k) [b(y).J^T grad rho_k - b(z_k).grad rho_k + div b(z_k) rho_k]
    with z_k = y^eps - zeta_k and J = I + lam eps Hess h.
    """
    region = _probe(domain, probe, resolution)
    mollifier = shifted_mollifier(domain, epsilon, lam)
    _, weights, grad_weights = mollifier.kernel.lattice
    stencil, flat, uz = _stencil_values(mollifier, u, region.points)
    n, k, d = stencil.shape
    bz = field.velocity_batch(t, flat).reshape(n, k, d)
    divz = field.divergence_batch(t, flat).reshape(n, k)
    by = field.velocity_batch(t, region.points)
    jac = mollifier.jacobian(region.points)
    # b(y).J^T grad rho_k = (J b(y)).grad rho_k
    jb = np.einsum('nij,nj->ni', jac, by)
    first = uz @ grad_weights
    values = np.einsum('ni,ni->n', jb, first) \
        - np.einsum('nk,nki,ki->n', uz, bz, grad_weights) \
        + np.einsum('nk,nk,k->n', uz, divz, weights)
    l1 = float(np.sum(region.weights * np.abs(values)))
    logger.debug(f"R_eps eps={epsilon}: L1 = {l1:.3e} over {n} probe nodes")
    return CommutatorField('R', float(epsilon), region.points, region.weights, values, l1)


def commutator_P(u: SpatialFn, domain: Domain, epsilon: float, probe: Union[ProbeRegion, str, None] = None,
                 lam: Optional[float] = None, resolution: int = 32) -> CommutatorField:
    """P_eps = grad(rho_eps *_n u) - rho_eps *_n grad u = (J - I)^T g, g the kernel-gradient sum."""
    region = _probe(domain, probe, resolution)
    mollifier = shifted_mollifier(domain, epsilon, lam)
    _, _, grad_weights = mollifier.kernel.lattice
    _, _, uz = _stencil_values(mollifier, u, region.points)
    g = uz @ grad_weights
    jac = mollifier.jacobian(region.points)
    eye = np.eye(domain.dimension)[None, :, :]
    values = np.einsum('nji,nj->ni', jac - eye, g)
    l1 = float(np.sum(region.weights * np.linalg.norm(values, axis=1)))
    return CommutatorField('P', float(epsilon), region.points, region.weights, values, l1)


def commutator_decay(norms: Sequence[Union[float, CommutatorField]],
                     epsilons: Optional[Sequence[float]] = None) -> float:
    """Log-log slope of the commutator L1 norm against eps."""
    values = [n.l1_norm if isinstance(n, CommutatorField) else float(n) for n in norms]
    if epsilons is None:
        epsilons = [n.epsilon for n in norms]
    return loglog_slope(np.asarray(epsilons, dtype=float), np.asarray(values, dtype=float))


def pathwise_field(problem: TransportProblem, path: BrownianPath, t: float) -> SpatialFn:
    """u(t, .; omega) as a spatial closure."""
    if t == 0:
        return problem.u0
    return lambda pts: evaluate_pathwise(problem, path, t, pts)


# -- bound and stability -----------------------------------------------------------

@dataclass
class TraceBoundReport:
    passed: bool
    data_bound: float
    checked: int
    violations: List[Dict[str, Any]] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {'passed': self.passed, 'data_bound': self.data_bound, 'checked': self.checked,
                'violations': self.violations[:20]}


def trace_bound_check(samples: Sequence[TraceSample], data_bound: Optional[float] = None) -> TraceBoundReport:
    """
    Pass iff every per-path value lies in [-M - tol, M + tol] with
    tol = 1e-9 + the fit residual of the extrapolation. Values are the raw
    extrapolated limits, so an overshoot of M beyond the fit error fails.
    """
    violations = []
    checked = 0
    M = None
    for sample in samples:
        M = sample.data_bound if data_bound is None else float(data_bound)
        tol = BOUND_TOLERANCE + sample.residual
        bad = np.flatnonzero(np.abs(sample.per_path) > M + tol)
        checked += len(sample.per_path)
        for i in bad:
            violations.append({'node_id': sample.node.node_id, 'position': sample.node.position.tolist(),
                               't': sample.t, 'path_index': int(i), 'value': float(sample.per_path[i]),
                               'overshoot': float(abs(sample.per_path[i]) - M)})
    if violations:
        logger.warning(f"trace bound violated at {len(violations)} samples, first at node "
                       f"{violations[0]['node_id']} t={violations[0]['t']}")
    return TraceBoundReport(not violations, float(M if M is not None else data_bound or 0.0), checked, violations)


@dataclass
class StabilityReport:
    """Discrepancy between two trace estimators on the same paths and nodes."""
    discrepancy: float
    pathwise_discrepancy: float
    pooled_se: float
    parameters: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.discrepancy <= 3.0 * self.pooled_se + 1e-12

    def to_dict(self) -> Dict[str, Any]:
        return {'discrepancy': self.discrepancy, 'pathwise_discrepancy': self.pathwise_discrepancy,
                'pooled_se': self.pooled_se, 'passed': self.passed, **self.parameters}


def trace_stability(problem: TransportProblem, first: TraceEstimator, second: TraceEstimator,
                    times: Sequence[float], n_paths: int, dt: float, seed: int = 0,
                    nodes: Union[BoundaryQuadrature, int, None] = None,
                    workers: Optional[int] = None) -> StabilityReport:
    """
    Empirical L2 distance over nodes x times between the trace estimates of
    two estimators (two schedules, or deformation against mollification).
    """
    quad = _resolve_nodes(problem.domain, nodes)
    times = np.asarray(times, dtype=float)
    check_times(problem.horizon, dt, times)

    def one(i: int):
        path = path_for(problem, seed, i, dt)
        a = first.estimate(problem, path, times, quad)[1]
        b = second.estimate(problem, path, times, quad)[1]
        return a, b

    results = map_paths(one, range(n_paths), workers) if problem.noise else [one(0)] * n_paths
    a = np.stack([r[0] for r in results]).reshape(n_paths, -1)
    b = np.stack([r[1] for r in results]).reshape(n_paths, -1)
    w = np.tile(quad.weights / quad.total_measure, len(times)) / len(times)
    mean_a, se_a = mean_and_se(a)
    mean_b, se_b = mean_and_se(b)
    discrepancy = float(np.sqrt(np.sum(w * (mean_a - mean_b) ** 2)))
    pathwise = float(np.sqrt(np.sum(w * mean_and_se((a - b) ** 2)[0])))
    pooled = float(np.sqrt(np.sum(w * (se_a ** 2 + se_b ** 2))))
    params = {'first': first.describe(), 'second': second.describe(), 'n_paths': n_paths, 'dt': dt, 'seed': seed}
    logger.info(f"trace stability: discrepancy {discrepancy:.3e}, pooled SE {pooled:.3e}")
    return StabilityReport(discrepancy, pathwise, pooled, params)
