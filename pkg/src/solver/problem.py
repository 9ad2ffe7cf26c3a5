"""
Transport Problem - Solver
The initial-boundary value problem: domain, drift, horizon, data and the
noise switch. Boundary data is defined on all of the lateral boundary
because noisy characteristics may exit anywhere on it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Any, Dict, List, Optional

import numpy as np

from src.core.drift import DriftField, field_from_descriptor, flux_parts
from src.core.exceptions import ArgumentError, UnsupportedDomainError
from src.core.geometry import Domain, DomainFactory
from src.solver.data import DataFunction, data_from_descriptor

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TransportProblem:
    """du + b.grad u dt + grad u o dB = 0 in U_T, u = u0 at t = 0, u = u_b on the boundary."""
    domain: Domain
    drift: DriftField
    horizon: float
    initial: DataFunction
    boundary: DataFunction
    noise: bool = True
    data_bound_override: Optional[float] = None

    def __post_init__(self):
        if self.horizon <= 0:
            raise ArgumentError("horizon must be positive")
        if self.drift.dimension != self.domain.dimension:
            raise ArgumentError("drift and domain dimensions differ")

    @property
    def dimension(self) -> int:
        return self.domain.dimension

    @property
    def data_bound(self) -> float:
        """M = max(sup |u0|, sup |u_b|) unless overridden."""
        if self.data_bound_override is not None:
            return float(self.data_bound_override)
        return max(self.initial.bound(self.domain, self.horizon),
                   self.boundary.bound(self.domain, self.horizon))

    @property
    def constant_value(self) -> Optional[float]:
        """c when u0 = u_b = c, else None."""
        a, b = self.initial.constant_value, self.boundary.constant_value
        return a if a is not None and a == b else None

    def with_data(self, initial: Optional[DataFunction] = None,
                  boundary: Optional[DataFunction] = None) -> "TransportProblem":
        return replace(self, initial=initial or self.initial, boundary=boundary or self.boundary)

    def with_drift(self, drift: DriftField) -> "TransportProblem":
        return replace(self, drift=drift)

    def with_noise(self, noise: bool) -> "TransportProblem":
        return replace(self, noise=noise)

    def u0(self, points: np.ndarray) -> np.ndarray:
        return self.initial(0.0, points)

    def ub(self, t, points: np.ndarray) -> np.ndarray:
        """Boundary datum; t may be a scalar or one time per point."""
        t_arr = np.asarray(t, dtype=float)
        if t_arr.ndim == 0:
            return self.boundary(float(t_arr), points)
        out = np.empty(len(points))
        for tv in np.unique(t_arr):
            sel = t_arr == tv
            out[sel] = self.boundary(float(tv), points[sel])
        return out

    def compatibility_defect(self, resolution: int = 64) -> float:
        """sup |u0(r) - u_b(0, r)| over influx boundary nodes at t = 0."""
        try:
            quad = self.domain.boundary_quadrature(resolution)
        except UnsupportedDomainError:
            return float('nan')
        flux, _, _ = flux_parts(self.drift, 0.0, quad)
        influx = flux < 0.0
        if not np.any(influx):
            return 0.0
        r = quad.positions[influx]
        return float(np.max(np.abs(self.u0(r) - self.ub(0.0, r))))

    def data_bound_violations(self, resolution: int = 32, n_times: int = 5) -> List[str]:
        """Sampled check that |u0| <= M inside and |u_b| <= M on the boundary."""
        M = self.data_bound * (1.0 + 1e-12) + 1e-12
        problems = []
        interior = self.domain.interior_quadrature(resolution).points
        if np.any(np.abs(self.u0(interior)) > M):
            problems.append("initial datum exceeds the data bound")
        try:
            nodes = self.domain.boundary_quadrature(resolution).positions
            for t in np.linspace(0.0, self.horizon, n_times):
                if np.any(np.abs(self.ub(t, nodes)) > M):
                    problems.append(f"boundary datum exceeds the data bound at t={t:.3g}")
                    break
        except UnsupportedDomainError:
            pass
        return problems

    def describe(self) -> Dict[str, Any]:
        return {
            'domain': self.domain.describe(),
            'drift': self.drift.describe(),
            'horizon': self.horizon,
            'initial': self.initial.describe(),
            'boundary': self.boundary.describe(),
            'noise': self.noise,
            'data_bound': self.data_bound,
        }

    @classmethod
    def from_descriptor(cls, descriptor: Dict[str, Any]) -> "TransportProblem":
        """Build from the problem section of an experiment config."""
        domain = DomainFactory.create(descriptor['domain'])
        horizon = float(descriptor.get('horizon', 1.0))
        drift = field_from_descriptor(descriptor.get('drift', {'name': 'zero'}), domain.dimension, horizon)
        return cls(
            domain=domain,
            drift=drift,
            horizon=horizon,
            initial=data_from_descriptor(descriptor.get('initial', {'name': 'constant'})),
            boundary=data_from_descriptor(descriptor.get('boundary', {'name': 'constant'})),
            noise=bool(descriptor.get('noise', True)),
            data_bound_override=descriptor.get('data_bound'),
        )
