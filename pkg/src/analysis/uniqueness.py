"""
Uniqueness - Analysis
Desk-scale checks around uniqueness of the constructed solution: hypothesis
report on the drift and data, independence of the estimate from the
mollification schedule, and pathwise comparison of ordered data.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from src.core.drift import MollifierKernel, flux_parts, mollify_field, uniqueness_bounds
from src.core.exceptions import ArgumentError, UnsupportedDomainError
from src.solver.data import DataFunction
from src.solver.problem import TransportProblem
from src.solver.representation import mc_field, pathwise_samples

logger = logging.getLogger(__name__)

PASS, WARN, FAIL = 'pass', 'warn', 'fail'

COMPATIBILITY_TOLERANCE = 1e-9


# -- hypotheses -------------------------------------------------------------

@dataclass(frozen=True)
class HypothesisCheck:
    name: str
    status: str
    detail: str

    def to_dict(self) -> Dict[str, Any]:
        return {'name': self.name, 'status': self.status, 'detail': self.detail}


@dataclass
class HypothesisReport:
    checks: List[HypothesisCheck]
    bounds: Dict[str, Any] = field(default_factory=dict)
    influx_mass: float = float('nan')

    @property
    def passed(self) -> bool:
        return all(c.status != FAIL for c in self.checks)

    @property
    def warnings(self) -> List[str]:
        return [c.name for c in self.checks if c.status == WARN]

    def status_of(self, name: str) -> str:
        for c in self.checks:
            if c.name == name:
                return c.status
        raise KeyError(name)

    def rows(self) -> List[Dict[str, Any]]:
        return [c.to_dict() for c in self.checks]

    def to_dict(self) -> Dict[str, Any]:
        return {'passed': self.passed, 'warnings': self.warnings, 'influx_mass': self.influx_mass,
                'bounds': self.bounds, 'checks': self.rows()}


def _influx_mass(problem: TransportProblem, resolution: int, n_times: int) -> float:
    """mu^-(Gamma_T) = int_0^T int_Gamma (b.n)^- dr dt by midpoint in time."""
    quad = problem.domain.boundary_quadrature(resolution)
    dt = problem.horizon / n_times
    total = 0.0
    for k in range(n_times):
        _, _, negative = flux_parts(problem.drift, (k + 0.5) * dt, quad)
        total += float(negative @ quad.weights) * dt
    return total


def hypothesis_report(problem: TransportProblem, resolution: int = 64, n_times: int = 16) -> HypothesisReport:
    drift = problem.drift
    bounds = uniqueness_bounds(drift, problem.domain, problem.horizon, resolution)
    summary = bounds.to_dict()
    checks = [
        HypothesisCheck('bounded_drift', PASS if np.all(np.isfinite(bounds.alpha)) else FAIL,
                        f"sup |b| envelope max {summary['alpha_max']:.4g}"),
        HypothesisCheck('divergence_upper_bound', PASS if np.all(np.isfinite(bounds.gamma)) else FAIL,
                        f"div b <= gamma(t), gamma max {summary['gamma_max']:.4g}"),
        HypothesisCheck('integrability', WARN if bounds.integrable_marginal else PASS,
                        '; '.join(bounds.notes) or f"alpha L1 {bounds.alpha_l1:.4g}, gamma L1 {bounds.gamma_l1:.4g}"),
    ]
    if drift.unbounded_divergence:
        checks.append(HypothesisCheck('bv_regularity', WARN, f"{drift.name} has unbounded divergence near a point"))
    elif drift.discontinuity:
        checks.append(HypothesisCheck('bv_regularity', PASS, f"piecewise smooth, jump set {drift.discontinuity}"))
    else:
        checks.append(HypothesisCheck('bv_regularity', PASS, 'smooth'))

    try:
        mass = _influx_mass(problem, resolution, n_times)
        checks.append(HypothesisCheck('influx_mass', PASS, f"mu^- mass {mass:.4g}"))
    except UnsupportedDomainError:
        mass = float('nan')
        checks.append(HypothesisCheck('influx_mass', WARN, 'no boundary quadrature for this domain'))

    defect = problem.compatibility_defect(resolution)
    if np.isnan(defect):
        checks.append(HypothesisCheck('compatibility', WARN, 'not checked'))
    elif defect > COMPATIBILITY_TOLERANCE:
        checks.append(HypothesisCheck('compatibility', WARN, f"|u0 - u_b(0)| = {defect:.3g} on the influx boundary"))
    else:
        checks.append(HypothesisCheck('compatibility', PASS, f"defect {defect:.3g}"))

    violations = problem.data_bound_violations()
    checks.append(HypothesisCheck('data_bound', FAIL if violations else PASS,
                                  '; '.join(violations) or f"M = {problem.data_bound:.4g}"))
    report = HypothesisReport(checks, summary, mass)
    for c in checks:
        if c.status != PASS:
            logger.warning(f"hypothesis {c.name}: {c.status} ({c.detail})")
    return report


# -- mollifier independence ---------------------------------------------------

def mollify_data(data: DataFunction, epsilon: float, dimension: int) -> DataFunction:
    """rho_eps * f in space; constants are returned unchanged."""
    if data.constant_value is not None:
        return data
    kernel = MollifierKernel(epsilon, dimension)
    base = data.fn

    def smoothed(t, p):
        return kernel.convolve(lambda q: base(t, q), p)

    params = dict(data.parameters)
    params['mollified_epsilon'] = epsilon
    return replace(data, name=f"{data.name}_eps", fn=smoothed, parameters=params)


def mollified_problem(problem: TransportProblem, epsilon: float) -> TransportProblem:
    """(b, u0, u_b) mollified at one radius; the data bound is kept from the original."""
    d = problem.dimension
    return replace(problem, drift=mollify_field(problem.drift, epsilon),
                   initial=mollify_data(problem.initial, epsilon, d),
                   boundary=mollify_data(problem.boundary, epsilon, d),
                   data_bound_override=problem.data_bound)


@dataclass
class IndependenceTable:
    """Distance between mc_field estimates under two mollification schedules, level by level."""
    schedule_a: np.ndarray
    schedule_b: np.ndarray
    sup: np.ndarray
    l1: np.ndarray
    pooled_se: np.ndarray
    t: float
    n_paths: int
    dt: float
    seed: int

    @property
    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.sup) <= 1e-12))

    @property
    def final_within_se(self) -> bool:
        return bool(self.sup[-1] <= 3.0 * self.pooled_se[-1] + 1e-12)

    def rows(self) -> List[Dict[str, Any]]:
        return [{'level': k, 'eps_a': float(a), 'eps_b': float(b), 'sup': float(s), 'l1': float(m),
                 'pooled_se': float(p), 't': self.t, 'n_paths': self.n_paths, 'dt': self.dt, 'seed': self.seed}
                for k, (a, b, s, m, p) in enumerate(zip(self.schedule_a, self.schedule_b, self.sup,
                                                        self.l1, self.pooled_se))]


def _check_schedule(name: str, schedule: np.ndarray) -> None:
    if schedule.size == 0 or np.any(schedule <= 0) or np.any(np.diff(schedule) >= 0):
        raise ArgumentError(f"{name} must be positive and strictly decreasing")


def mollifier_independence(problem: TransportProblem, schedule_a: Sequence[float],
                           schedule_b: Optional[Sequence[float]] = None, t: Optional[float] = None,
                           resolution: int = 16, n_paths: int = 256, dt: float = 0.01, seed: int = 0,
                           workers: Optional[int] = None) -> IndependenceTable:
    """schedule_b defaults to schedule_a / 2."""
    a = np.asarray(schedule_a, dtype=float)
    b = a / 2.0 if schedule_b is None else np.asarray(schedule_b, dtype=float)
    _check_schedule('schedule_a', a)
    _check_schedule('schedule_b', b)
    if a.shape != b.shape:
        raise ArgumentError("mollification schedules differ in length")
    t = problem.horizon if t is None else float(t)
    sup, l1, pooled = [], [], []
    for ea, eb in zip(a, b):
        first = mc_field(mollified_problem(problem, ea), t, resolution, n_paths, dt, seed, workers=workers)
        second = mc_field(mollified_problem(problem, eb), t, resolution, n_paths, dt, seed, workers=workers)
        gap = np.abs(first.mean - second.mean)
        se = np.sqrt(first.se ** 2 + second.se ** 2)
        sup.append(float(np.max(gap)))
        l1.append(float(gap @ first.weights))
        pooled.append(float(np.max(se)))
        logger.debug(f"mollifier independence eps {ea:.4g}/{eb:.4g}: sup {sup[-1]:.3e}, l1 {l1[-1]:.3e}")
    table = IndependenceTable(a, b, np.array(sup), np.array(l1), np.array(pooled), t, n_paths, dt, seed)
    logger.info(f"mollifier independence over {len(a)} levels: final sup {sup[-1]:.3e}, monotone={table.monotone}")
    return table


# -- comparison ---------------------------------------------------------------

@dataclass(frozen=True)
class ComparisonReport:
    """Pathwise order check u_lower <= u_upper along shared paths."""
    violations: int
    checked: int
    max_excess: float
    t: float

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> Dict[str, Any]:
        return {'violations': self.violations, 'checked': self.checked, 'max_excess': self.max_excess,
                't': self.t, 'passed': self.passed}


def _ordered_data(lower: TransportProblem, upper: TransportProblem, resolution: int) -> bool:
    pts = lower.domain.interior_quadrature(resolution).points
    if np.any(lower.u0(pts) > upper.u0(pts) + 1e-12):
        return False
    try:
        nodes = lower.domain.boundary_quadrature(resolution).positions
    except UnsupportedDomainError:
        return True
    for s in np.linspace(0.0, lower.horizon, 5):
        if np.any(lower.ub(s, nodes) > upper.ub(s, nodes) + 1e-12):
            return False
    return True


def comparison_check(lower: TransportProblem, upper: TransportProblem, t: float, resolution: int = 16,
                     n_paths: int = 64, dt: float = 0.01, seed: int = 0,
                     workers: Optional[int] = None) -> ComparisonReport:
    """Both problems share domain, drift and noise; only the data differ."""
    if lower.domain is not upper.domain and lower.domain.describe() != upper.domain.describe():
        raise ArgumentError("comparison needs a shared domain")
    if lower.drift.describe() != upper.drift.describe() or lower.noise != upper.noise:
        raise ArgumentError("comparison needs a shared drift and noise switch")
    if not _ordered_data(lower, upper, resolution):
        raise ArgumentError("comparison needs u0 and u_b of the first problem below those of the second")
    pts = lower.domain.interior_quadrature(resolution).points
    lo = pathwise_samples(lower, t, pts, n_paths, dt, seed, workers=workers)
    hi = pathwise_samples(upper, t, pts, n_paths, dt, seed, workers=workers)
    excess = lo - hi
    violations = int(np.sum(excess > 1e-12))
    report = ComparisonReport(violations, int(excess.size), float(max(np.max(excess), 0.0)), float(t))
    if violations:
        logger.warning(f"comparison: {violations} of {excess.size} pathwise values out of order")
    return report
