"""
Weak Forms - Verification
Per-path residuals of the weak identities satisfied by the representation
solution, with every integral reported as its own term:

    stratonovich      interior distributional form, phi compact in U
    ito               the same in Ito form, with the 1/2 Laplacian term
    boundary          global phi, outflux/influx split and boundary noise term
    ito_boundary      boundary form with measured Ito corrections

All terms of one path come from the same cached samples of u on the path
grid and from the same Brownian increments. Time integrals use the
trapezoid rule on the path grid.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Callable, Dict, List, Optional, Protocol, Sequence, Tuple

import numpy as np
from scipy import integrate

from src.core.exceptions import ArgumentError, DependencyError
from src.core.geometry import BoundaryQuadrature, Domain, InteriorQuadrature
from src.core.stochastic_calculus import (BrownianPath, grid_steps, running_covariation, running_ito,
                                          running_stratonovich)
from src.solver.parallel import map_paths, mean_and_se
from src.solver.problem import TransportProblem
from src.solver.representation import evaluate_pathwise, path_for
from src.verification.test_functions import TestFunction

logger = logging.getLogger(__name__)

DEFAULT_INTERIOR_RESOLUTION = 48
DEFAULT_BOUNDARY_RESOLUTION = 64

Transform = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class BoundaryTrace:
    """gamma u on the path grid (K+1, n_nodes); slope is d/dtau u(Psi_tau(r)) at tau = 0."""
    values: np.ndarray
    slope: Optional[np.ndarray] = None
    residual: Optional[np.ndarray] = None


class TraceSource(Protocol):
    def boundary_trace(self, problem: TransportProblem, path: BrownianPath, path_index: int,
                       times: np.ndarray, quad: BoundaryQuadrature) -> BoundaryTrace:
        ...


@dataclass
class WeakFormReport:
    """Residual of one identity per (path, checked time), with every term kept."""
    identity: str
    times: np.ndarray
    per_path: np.ndarray
    mean: np.ndarray
    se: np.ndarray
    terms: Dict[str, np.ndarray] = field(default_factory=dict)
    diagnostics: Dict[str, np.ndarray] = field(default_factory=dict)
    parameters: Dict[str, Any] = field(default_factory=dict)

    @property
    def n_paths(self) -> int:
        return self.per_path.shape[0]

    def term_mean(self, name: str) -> np.ndarray:
        table = self.terms.get(name, self.diagnostics.get(name))
        if table is None:
            raise KeyError(name)
        return mean_and_se(table)[0]

    def max_abs_mean(self) -> float:
        return float(np.max(np.abs(self.mean)))

    def within_band(self, n_se: float = 3.0, bias: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.mean) <= n_se * self.se + bias))

    def rows(self) -> List[Dict[str, Any]]:
        """CSV rows: one per (time, term), the residual included."""
        p = self.parameters
        tables = dict(self.terms)
        tables.update(self.diagnostics)
        tables['residual'] = self.per_path
        out = []
        for name, table in tables.items():
            mean, se = mean_and_se(table)
            for k, t in enumerate(self.times):
                out.append({'time': float(t), 'term_name': name, 'mean': float(mean[k]), 'se': float(se[k]),
                            'n_paths': self.n_paths, 'dt': p.get('dt'), 'quad_res': p.get('interior_resolution'),
                            'seed': p.get('seed')})
        return out

    def summary(self) -> Dict[str, Any]:
        return {
            'identity': self.identity,
            'times': self.times.tolist(),
            'mean_residual': self.mean.tolist(),
            'se': self.se.tolist(),
            'within_3se': self.within_band(),
            'parameters': self.parameters,
        }


# -- setup shared by all paths -------------------------------------------------

def check_times(horizon: float, dt: float, times: Sequence[float]) -> np.ndarray:
    """Grid indices of the checked times; they must lie on the dt grid."""
    grid_steps(horizon, dt)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if times.size == 0:
        raise ArgumentError("at least one checked time is required")
    idx = np.rint(times / dt).astype(int)
    if np.any(times < 0) or np.any(times > horizon * (1 + 1e-12)) or \
            np.any(np.abs(idx * dt - times) > 1e-9 * max(dt, 1.0)):
        raise ArgumentError(f"checked times {times.tolist()} are not on the dt={dt} grid in [0, {horizon}]")
    return idx


@dataclass
class _Setup:
    problem: TransportProblem
    phi: TestFunction
    dt: float
    check_idx: np.ndarray
    interior: InteriorQuadrature
    boundary: Optional[BoundaryQuadrature]
    times: np.ndarray
    w_phi: np.ndarray
    w_grad: np.ndarray
    w_lap: np.ndarray
    w_transport: np.ndarray
    b_flux: Optional[np.ndarray] = None
    b_flux_out: Optional[np.ndarray] = None
    b_flux_in: Optional[np.ndarray] = None
    w_normal: Optional[np.ndarray] = None
    w_grad_normal: Optional[np.ndarray] = None
    w_curvature: Optional[np.ndarray] = None
    w_phi_boundary: Optional[np.ndarray] = None

    @property
    def steps(self) -> int:
        return int(self.check_idx.max())


def _build_setup(problem: TransportProblem, phi: TestFunction, dt: float, times: Sequence[float],
                 interior_resolution: int, boundary_resolution: Optional[int]) -> _Setup:
    check_idx = check_times(problem.horizon, dt, times)
    K = int(check_idx.max())
    grid = np.arange(K + 1) * dt
    quad = problem.domain.interior_quadrature(interior_resolution)
    x, w = quad.points, quad.weights
    phi_x, grad_x = phi.value(x), phi.gradient(x)
    w_transport = np.empty((K + 1, len(w)))
    for k, t in enumerate(grid):
        b = problem.drift.velocity_batch(t, x)
        div = problem.drift.divergence_batch(t, x)
        w_transport[k] = w * (np.sum(b * grad_x, axis=1) + div * phi_x)
    setup = _Setup(problem, phi, dt, check_idx, quad, None, grid, w * phi_x, w[:, None] * grad_x,
                   w * phi.laplacian(x), w_transport)
    if boundary_resolution is None:
        return setup
    bq = problem.domain.boundary_quadrature(boundary_resolution)
    r, n, om = bq.positions, bq.normals, bq.weights
    phi_r = phi.value(r)
    flux = np.stack([np.sum(problem.drift.velocity_batch(t, r) * n, axis=1) for t in grid])
    ub = np.stack([problem.ub(t, r) for t in grid])
    setup.boundary = bq
    setup.w_phi_boundary = om * phi_r
    setup.b_flux = om * phi_r * flux
    setup.b_flux_out = om * phi_r * np.maximum(flux, 0.0)
    setup.b_flux_in = om * phi_r * np.maximum(-flux, 0.0) * ub
    setup.w_normal = (om * phi_r)[:, None] * n
    setup.w_grad_normal = om * np.sum(phi.gradient(r) * n, axis=1)
    setup.w_curvature = om * phi_r * bq.curvatures
    return setup


def _trap(process: np.ndarray, dt: float) -> np.ndarray:
    return np.concatenate([[0.0], np.cumsum(0.5 * (process[:-1] + process[1:])) * dt])


def _interior_samples(setup: _Setup, path: BrownianPath) -> np.ndarray:
    """u on interior nodes at every grid time up to the last checked one."""
    problem, x = setup.problem, setup.interior.points
    U = np.empty((setup.steps + 1, len(x)))
    U[0] = problem.u0(x)
    for k in range(1, setup.steps + 1):
        U[k] = evaluate_pathwise(problem, path, setup.times[k], x)
    return U


def _increments(setup: _Setup, path: BrownianPath) -> np.ndarray:
    dB = path.increments[:setup.steps]
    return dB if setup.problem.noise else np.zeros_like(dB)


def _path_terms(setup: _Setup, path: BrownianPath, index: int, source: Optional[TraceSource],
                transform: Optional[Transform] = None) -> Dict[str, np.ndarray]:
    """Running processes of one path, indexed on the full grid; transform renormalizes u."""
    dt = setup.dt
    U = _interior_samples(setup, path)
    if transform is not None:
        U = transform(U)
    dB = _increments(setup, path)
    G = U @ setup.w_grad
    out = {
        'lhs': U @ setup.w_phi,
        'transport': _trap(np.sum(U * setup.w_transport, axis=1), dt),
        'strat_G': running_stratonovich(G, dB),
        'ito_G': running_ito(G, dB),
        'cov_G': running_covariation(G, dB),
        'lap': _trap(U @ setup.w_lap, dt),
    }
    out['initial'] = np.full(setup.steps + 1, out['lhs'][0])
    if setup.boundary is None:
        return out
    trace = source.boundary_trace(setup.problem, path, index, setup.times, setup.boundary)
    UB = np.asarray(trace.values, dtype=float)
    if UB.shape != (setup.steps + 1, len(setup.boundary)):
        raise DependencyError(f"trace values have shape {UB.shape}, expected "
                              f"{(setup.steps + 1, len(setup.boundary))}")
    if transform is not None:
        UB = transform(UB)
    Kp = UB @ setup.w_normal
    out.update({
        'outflux': -_trap(np.sum(UB * setup.b_flux_out, axis=1), dt),
        'boundary_flux': -_trap(np.sum(UB * setup.b_flux, axis=1), dt),
        'influx': _trap(np.sum(setup.b_flux_in, axis=1), dt),
        'strat_K': running_stratonovich(Kp, dB),
        'ito_K': running_ito(Kp, dB),
        'cov_K': running_covariation(Kp, dB),
        'normal_grad': _trap(UB @ setup.w_grad_normal, dt),
        'curv': _trap(UB @ setup.w_curvature, dt),
    })
    if trace.slope is not None:
        out['i2_closed'] = _trap(np.asarray(trace.slope) @ setup.w_phi_boundary, dt)
    return out


# identity name -> [(term name, process key, sign)]
_IDENTITIES: Dict[str, List[Tuple[str, str, float]]] = {
    'stratonovich': [('initial', 'initial', 1.0), ('transport', 'transport', 1.0),
                     ('martingale', 'strat_G', 1.0)],
    'ito': [('initial', 'initial', 1.0), ('transport', 'transport', 1.0),
            ('martingale', 'ito_G', 1.0), ('half_laplacian', 'lap', 0.5)],
    'boundary': [('initial', 'initial', 1.0), ('transport', 'transport', 1.0),
                 ('outflux', 'outflux', 1.0), ('influx', 'influx', 1.0),
                 ('martingale', 'strat_G', 1.0), ('boundary_martingale', 'strat_K', -1.0)],
    'ito_boundary': [('initial', 'initial', 1.0), ('transport', 'transport', 1.0),
                     ('outflux', 'outflux', 1.0), ('influx', 'influx', 1.0),
                     ('martingale', 'ito_G', 1.0), ('boundary_martingale', 'ito_K', -1.0),
                     ('half_I1', 'cov_G', 0.5), ('half_I2', 'cov_K', -0.5)],
    'trace_renormalized': [('initial', 'initial', 1.0), ('transport', 'transport', 1.0),
                           ('boundary_flux', 'boundary_flux', 1.0), ('martingale', 'strat_G', 1.0),
                           ('boundary_martingale', 'strat_K', -1.0)],
}


def _identity_terms(identity: str, proc: Dict[str, np.ndarray], d: int) -> Tuple[np.ndarray, Dict, Dict]:
    lhs = proc['lhs']
    terms = {'lhs': lhs}
    for name, key, sign in _IDENTITIES[identity]:
        terms[name] = sign * proc[key]
    residual = lhs - sum(v for k, v in terms.items() if k != 'lhs')
    diagnostics = {}
    if identity == 'ito':
        diagnostics['half_covariation'] = 0.5 * proc['cov_G']
    if identity == 'ito_boundary':
        base = lhs - sum(terms[k] for k in ('initial', 'transport', 'outflux', 'influx',
                                            'martingale', 'boundary_martingale'))
        half_i1_closed = 0.5 * (proc['lap'] - proc['normal_grad'])
        diagnostics['uncorrected_residual'] = base
        diagnostics['half_I1_closed'] = half_i1_closed
        diagnostics['normal_gradient'] = -proc['normal_grad']
        diagnostics['curvature'] = 0.5 * (d - 1) * proc['curv']
        diagnostics['half_laplacian'] = 0.5 * proc['lap']
        diagnostics['literal_residual'] = base - diagnostics['normal_gradient'] - diagnostics['curvature'] \
            - diagnostics['half_laplacian']
        if 'i2_closed' in proc:
            diagnostics['half_I2_closed'] = -0.5 * proc['i2_closed']
            diagnostics['closed_form_residual'] = base - half_i1_closed - diagnostics['half_I2_closed']
    return residual, terms, diagnostics


def run_identity(identity: str, problem: TransportProblem, phi: TestFunction, n_paths: int, dt: float,
                 times: Sequence[float], seed: int, trace_source: Optional[TraceSource],
                 interior_resolution: int, boundary_resolution: Optional[int],
                 workers: Optional[int], transform: Optional[Transform] = None) -> WeakFormReport:
    """Per-path residual of the named identity, reduced in path-index order."""
    if n_paths < 1:
        raise ArgumentError("n_paths must be >= 1")
    setup = _build_setup(problem, phi, dt, times, interior_resolution, boundary_resolution)
    idx = setup.check_idx
    d = problem.dimension

    def one(i: int):
        path = path_for(problem, seed, i, dt)
        proc = _path_terms(setup, path, i, trace_source, transform)
        residual, terms, diagnostics = _identity_terms(identity, proc, d)
        return residual[idx], {k: v[idx] for k, v in terms.items()}, {k: v[idx] for k, v in diagnostics.items()}

    if problem.noise:
        results = map_paths(one, range(n_paths), workers)
    else:
        results = [one(0)] * n_paths
    per_path = np.stack([r[0] for r in results])
    terms = {k: np.stack([r[1][k] for r in results]) for k in results[0][1]}
    diagnostics = {k: np.stack([r[2][k] for r in results]) for k in results[0][2]}
    mean, se = mean_and_se(per_path)
    params = {'dt': dt, 'n_paths': n_paths, 'seed': seed, 'interior_resolution': interior_resolution,
              'boundary_resolution': boundary_resolution, 'test_function': phi.describe()}
    logger.info(f"{identity} residual: max |mean| = {np.max(np.abs(mean)):.3e} over {len(idx)} times, "
                f"{n_paths} paths")
    return WeakFormReport(identity, idx * dt, per_path, mean, se, terms, diagnostics, params)


def stratonovich_residual(problem: TransportProblem, phi: TestFunction, n_paths: int, dt: float,
                          times: Sequence[float], seed: int = 0,
                          interior_resolution: int = DEFAULT_INTERIOR_RESOLUTION,
                          workers: Optional[int] = None) -> WeakFormReport:
    """Residual of the interior Stratonovich identity for phi compactly supported in U."""
    phi.check_support(problem.domain)
    if not phi.compact:
        raise ArgumentError(f"stratonovich_residual needs a compactly supported test function, got {phi.name!r}")
    return run_identity('stratonovich', problem, phi, n_paths, dt, times, seed, None,
                        interior_resolution, None, workers)


def ito_residual(problem: TransportProblem, phi: TestFunction, n_paths: int, dt: float,
                 times: Sequence[float], seed: int = 0,
                 interior_resolution: int = DEFAULT_INTERIOR_RESOLUTION,
                 workers: Optional[int] = None) -> WeakFormReport:
    phi.check_support(problem.domain)
    if not phi.compact:
        raise ArgumentError(f"ito_residual needs a compactly supported test function, got {phi.name!r}")
    return run_identity('ito', problem, phi, n_paths, dt, times, seed, None,
                        interior_resolution, None, workers)


def _require_trace(trace_source: Optional[TraceSource]) -> TraceSource:
    if trace_source is None:
        raise DependencyError("boundary identities need a trace source for gamma u")
    return trace_source


def boundary_weakform_residual(problem: TransportProblem, phi: TestFunction,
                               trace_source: Optional[TraceSource], n_paths: int, dt: float,
                               times: Sequence[float], seed: int = 0,
                               interior_resolution: int = DEFAULT_INTERIOR_RESOLUTION,
                               boundary_resolution: int = DEFAULT_BOUNDARY_RESOLUTION,
                               workers: Optional[int] = None) -> WeakFormReport:
    """Residual of the boundary-inclusive Stratonovich identity for a global phi."""
    source = _require_trace(trace_source)
    return run_identity('boundary', problem, phi, n_paths, dt, times, seed, source,
                        interior_resolution, boundary_resolution, workers)


def ito_boundary_residual(problem: TransportProblem, phi: TestFunction,
                          trace_source: Optional[TraceSource], n_paths: int, dt: float,
                          times: Sequence[float], seed: int = 0,
                          interior_resolution: int = DEFAULT_INTERIOR_RESOLUTION,
                          boundary_resolution: int = DEFAULT_BOUNDARY_RESOLUTION,
                          workers: Optional[int] = None) -> WeakFormReport:
    """
    Ito form of the boundary identity. The residual uses the measured
    corrections 1/2 [G, B] and -1/2 [K, B]. Diagnostics carry the closed-form
    residual (normal-gradient and trace-slope corrections, checked by
    closed_form_ito_boundary_check), the curvature term and the literal
    residual with the full normal-gradient and curvature terms.
    """
    source = _require_trace(trace_source)
    return run_identity('ito_boundary', problem, phi, n_paths, dt, times, seed, source,
                        interior_resolution, boundary_resolution, workers)


def closed_form_ito_boundary_residual(report: WeakFormReport) -> np.ndarray:
    """Per-path residual with the closed-form corrections, (n_paths, n_times)."""
    if 'closed_form_residual' not in report.diagnostics:
        raise DependencyError("closed-form residual needs an ito_boundary report with trace slopes")
    return report.diagnostics['closed_form_residual']


def closed_form_ito_boundary_check(report: WeakFormReport, n_se: float = 3.0, band: float = 0.0) -> Dict[str, Any]:
    """
    |mean| <= n_se * se + band for the closed-form residual at every checked
    time. The literal residual and the curvature term ride along unchecked:
    for u = c on a disk the curvature term is (d - 1)/2 * c * |Gamma| / R * t
    while every correction it is paired with vanishes.
    """
    mean, se = mean_and_se(closed_form_ito_boundary_residual(report))
    within = bool(np.all(np.abs(mean) <= n_se * se + band))
    if not within:
        logger.warning(f"closed-form Ito boundary residual outside {n_se} SE + {band:g}: "
                       f"max |mean| = {np.max(np.abs(mean)):.3e}")
    return {
        'mean': mean.tolist(),
        'se': se.tolist(),
        'band': band,
        'within_band': within,
        'literal_mean': report.term_mean('literal_residual').tolist(),
        'curvature_mean': report.term_mean('curvature').tolist(),
    }


# -- conversion corrections ---------------------------------------------------

@dataclass
class ConversionCorrections:
    """I1, I2 measured as discrete covariations and from their closed forms."""
    times: np.ndarray
    i1_measured: np.ndarray
    i1_closed: np.ndarray
    i2_measured: np.ndarray
    i2_closed: np.ndarray
    parameters: Dict[str, Any] = field(default_factory=dict)

    def stats(self) -> Dict[str, Tuple[np.ndarray, np.ndarray]]:
        return {name: mean_and_se(getattr(self, name))
                for name in ('i1_measured', 'i1_closed', 'i2_measured', 'i2_closed')}

    def rows(self) -> List[Dict[str, Any]]:
        out = []
        n = self.i1_measured.shape[0]
        for name, (mean, se) in self.stats().items():
            for k, t in enumerate(self.times):
                out.append({'time': float(t), 'term_name': name, 'mean': float(mean[k]), 'se': float(se[k]),
                            'n_paths': n, 'dt': self.parameters.get('dt'),
                            'quad_res': self.parameters.get('interior_resolution'),
                            'seed': self.parameters.get('seed')})
        return out


def conversion_corrections(problem: TransportProblem, phi: TestFunction,
                           trace_source: Optional[TraceSource], n_paths: int, dt: float,
                           times: Sequence[float], seed: int = 0,
                           interior_resolution: int = DEFAULT_INTERIOR_RESOLUTION,
                           boundary_resolution: int = DEFAULT_BOUNDARY_RESOLUTION,
                           workers: Optional[int] = None) -> ConversionCorrections:
    """
    I1 = sum_j [int u d_j phi, B^j] and I2 = sum_j [int_Gamma gamma u phi n_j, B^j].
    For phi compact in U no trace is needed and I2 = 0.
    """
    compact = phi.compact
    if compact:
        phi.check_support(problem.domain)
    else:
        _require_trace(trace_source)
    setup = _build_setup(problem, phi, dt, times, interior_resolution,
                         None if compact else boundary_resolution)
    idx = setup.check_idx

    def one(i: int):
        proc = _path_terms(setup, path_for(problem, seed, i, dt), i, trace_source)
        zeros = np.zeros(len(idx))
        i1c = proc['lap'] if compact else proc['lap'] - proc['normal_grad']
        i2m = zeros if compact else proc['cov_K'][idx]
        if compact:
            i2c = zeros
        elif 'i2_closed' in proc:
            i2c = proc['i2_closed'][idx]
        else:
            i2c = np.full(len(idx), np.nan)
        return proc['cov_G'][idx], i1c[idx], i2m, i2c

    results = map_paths(one, range(n_paths), workers) if problem.noise else [one(0)] * n_paths
    stacks = [np.stack([r[j] for r in results]) for j in range(4)]
    params = {'dt': dt, 'n_paths': n_paths, 'seed': seed, 'interior_resolution': interior_resolution,
              'boundary_resolution': None if compact else boundary_resolution}
    return ConversionCorrections(idx * dt, *stacks, parameters=params)


# -- boundary limits through collar layers -------------------------------------

@lru_cache(maxsize=1)
def _bump_profile(samples: int = 4097) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Normalized 1-D bump density on [-1, 1] and its cumulative distribution."""
    s = np.linspace(-1.0, 1.0, samples)
    density = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    density[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    cdf = integrate.cumulative_trapezoid(density, s, initial=0.0)
    total = cdf[-1]
    return s, density / total, cdf / total


def collar_profile(mu: float, tau: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    (zeta'_mu, zeta''_mu) at distances tau: the indicator of [mu/8, 7mu/8]
    smoothed at scale mu/8, normalized to unit mass, supported in [0, mu].
    """
    s, density, cdf = _bump_profile()
    inner = mu / 8.0
    a = (tau - inner) / inner
    b = (tau - 7.0 * inner) / inner
    c = 4.0 / (3.0 * mu)
    first = c * (np.interp(a, s, cdf, left=0.0, right=1.0) - np.interp(b, s, cdf, left=0.0, right=1.0))
    second = c / inner * (np.interp(a, s, density, left=0.0, right=0.0)
                          - np.interp(b, s, density, left=0.0, right=0.0))
    return first, second


def _layer_nodes(mu: float, panels: int = 8, order: int = 8) -> Tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, mu, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


@dataclass
class CoareaTable:
    """Collar volume integrals against the direct boundary integral, per mu."""
    component: int
    mu: np.ndarray
    volume: np.ndarray
    direct: float
    limit: float
    slope: float
    j1: np.ndarray
    j2: np.ndarray
    j3: np.ndarray
    j1_limit: float
    j23_limit: float

    @property
    def errors(self) -> np.ndarray:
        return np.abs(self.volume - self.direct)

    @property
    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.errors) < 0))

    @property
    def j23_errors(self) -> np.ndarray:
        return np.abs(self.j2 + self.j3 - self.j23_limit)

    def rows(self) -> List[Dict[str, Any]]:
        return [{'mu': float(m), 'volume': float(v), 'direct': self.direct, 'error': float(e),
                 'j1': float(a), 'j2': float(b), 'j3': float(c), 'j23': float(b + c)}
                for m, v, e, a, b, c in zip(self.mu, self.volume, self.errors, self.j1, self.j2, self.j3)]

    def to_dict(self) -> Dict[str, Any]:
        return {'component': self.component, 'direct': self.direct, 'limit': self.limit, 'slope': self.slope,
                'monotone': self.monotone, 'j1_limit': self.j1_limit, 'j23_limit': self.j23_limit}


def default_mu_schedule(domain: Domain) -> np.ndarray:
    return domain.delta_star * np.array([0.64, 0.32, 0.16, 0.08, 0.04])


def richardson_limit(h: np.ndarray, values: np.ndarray, points: int = 3) -> Tuple[float, float]:
    """First-order extrapolation to h = 0 by a least-squares line through the last points."""
    h, values = np.asarray(h, dtype=float)[-points:], np.asarray(values, dtype=float)[-points:]
    slope, intercept = np.polyfit(h, values, 1)
    residual = float(np.max(np.abs(values - (intercept + slope * h))))
    return float(intercept), residual


def loglog_slope(h: np.ndarray, errors: np.ndarray) -> float:
    h, errors = np.asarray(h, dtype=float), np.asarray(errors, dtype=float)
    keep = errors > 0
    if keep.sum() < 2:
        return float('nan')
    return float(np.polyfit(np.log(h[keep]), np.log(errors[keep]), 1)[0])


def coarea_boundary_limit(u, phi: TestFunction, domain: Domain, component: int = 0,
                          mu: Optional[Sequence[float]] = None, resolution: int = 128) -> CoareaTable:
    """
    int_U u phi d_j zeta_mu(dist) dx on collar layers for each mu, against
    -int_Gamma u phi n_j dr; u maps (n, d) points to (n,) values. The J1,
    J2, J3 pairings of the Ito boundary conversion ride along.
    """
    mus = default_mu_schedule(domain) if mu is None else np.asarray(mu, dtype=float)
    if np.any(mus <= 0) or np.any(mus > domain.delta_star * (1 + 1e-12)):
        raise ArgumentError(f"mu values must lie in (0, delta*={domain.delta_star}]")
    if np.any(np.diff(mus) >= 0):
        raise ArgumentError("mu schedule must be strictly decreasing")
    if not 0 <= component < domain.dimension:
        raise ArgumentError(f"component {component} out of range")
    quad = domain.boundary_quadrature(resolution)
    r, n, om = quad.positions, quad.normals, quad.weights
    nb = len(om)
    ur, phr = u(r), phi.value(r)
    direct = float(-np.sum(om * ur * phr * n[:, component]))
    j1_limit = float(-np.sum(om * ur * np.sum(phi.gradient(r) * n, axis=1)))
    eta = 1e-4 * domain.delta_star
    f = [u(r - k * eta * n) * phi.value(r - k * eta * n) for k in range(3)]
    j23_limit = float(np.sum(om * (3.0 * f[0] - 4.0 * f[1] + f[2]) / (2.0 * eta)))

    volume, j1, j2, j3 = (np.empty(len(mus)) for _ in range(4))
    for m, value in enumerate(mus):
        tau, wt = _layer_nodes(float(value))
        pts = (r[None, :, :] - tau[:, None, None] * n[None, :, :]).reshape(-1, domain.dimension)
        jac = np.stack([domain.jacobian_nodes(quad, float(t)) for t in tau])
        dz, d2z = collar_profile(float(value), tau)
        weight = (wt[:, None] * jac * om[None, :]).reshape(-1)
        up = u(pts) * weight
        php = phi.value(pts)
        lap_dist = np.trace(domain.distance_hessian(pts), axis1=1, axis2=2)
        normals = np.tile(n, (len(tau), 1))
        dz_flat = np.repeat(dz, nb)
        volume[m] = np.sum(up * php * dz_flat * (-normals[:, component]))
        j1[m] = np.sum(up * dz_flat * np.sum(phi.gradient(pts) * (-normals), axis=1))
        j2[m] = np.sum(up * php * dz_flat * lap_dist)
        p0, _ = collar_profile(float(value), np.zeros(1))
        j3[m] = np.sum(up * php * np.repeat(d2z, nb)) + float(p0[0]) * np.sum(om * ur * phr)
    limit, _ = richardson_limit(mus, volume)
    slope = loglog_slope(mus, np.abs(volume - direct))
    logger.debug(f"coarea limit component {component}: limit={limit:.6g} direct={direct:.6g} slope={slope:.3f}")
    return CoareaTable(component, mus, volume, direct, limit, slope, j1, j2, j3, j1_limit, j23_limit)
