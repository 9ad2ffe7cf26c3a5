"""
Drift - Core
Time-dependent drift fields b(t, x) = m(t) v(x) from a named registry, the
influx/outflux split of b.n on the boundary, mollification by a symmetric
bump kernel, the boundary-aware shifted mollification and the sampled
envelopes used by the uniqueness hypotheses.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy import integrate

from src.core.exceptions import ArgumentError, StencilEscapeError, UnsupportedDomainError
from src.core.geometry import BoundaryPoint, BoundaryQuadrature, Domain, as_points

logger = logging.getLogger(__name__)

SpatialFn = Callable[[np.ndarray], np.ndarray]

# stencil shift multipliers tried in order when none is given
SHIFT_CANDIDATES = (1.0, 2.0, 4.0)


def _no_modulation(t: float) -> float:
    return 1.0


def time_modulation(name: str, horizon: float, **params) -> Callable[[float], float]:
    """Scalar time factor m(t) of a separable field."""
    if name in (None, 'none'):
        return _no_modulation
    if name == 'sin':
        amplitude = float(params.get('amplitude', 0.5))
        period = float(params.get('period', horizon))
        return lambda t: 1.0 + amplitude * math.sin(2.0 * math.pi * t / period)
    if name == 'inverse_horizon':
        return lambda t: 1.0 / (horizon - t) if t < horizon else math.inf
    raise ArgumentError(f"unknown time modulation: {name!r}")


@dataclass(frozen=True)
class DriftField:
    """
    Separable drift b(t, x) = m(t) v(x) with its analytic divergence.

    ``discontinuity`` describes the declared jump set of piecewise fields.
    """
    name: str
    dimension: int
    spatial: SpatialFn
    spatial_divergence: SpatialFn
    smoothness: str = "smooth"
    discontinuity: Optional[str] = None
    unbounded_divergence: bool = False
    divergence_free: bool = False
    modulation: Callable[[float], float] = _no_modulation
    modulation_name: str = "none"
    parameters: Dict[str, Any] = field(default_factory=dict)
    is_zero: bool = False

    @property
    def time_dependent(self) -> bool:
        return self.modulation_name != 'none'

    def velocity_batch(self, t: float, points: np.ndarray) -> np.ndarray:
        """b(t, .) on a batch (n, d)."""
        if self.is_zero:
            return np.zeros_like(points)
        m = self.modulation(t)
        v = self.spatial(points)
        return v if m == 1.0 else m * v

    def divergence_batch(self, t: float, points: np.ndarray) -> np.ndarray:
        if self.is_zero or self.divergence_free:
            return np.zeros(len(points))
        m = self.modulation(t)
        return m * self.spatial_divergence(points)

    def eval(self, t: float, x: Any) -> np.ndarray:
        points, single = as_points(x, self.dimension)
        out = self.velocity_batch(t, points)
        return out[0] if single else out

    def divergence(self, t: float, x: Any):
        points, single = as_points(x, self.dimension)
        out = self.divergence_batch(t, points)
        return float(out[0]) if single else out

    def describe(self) -> Dict[str, Any]:
        return {'name': self.name, 'parameters': self.parameters,
                'time_modulation': self.modulation_name, 'smoothness': self.smoothness}


# -- registry -------------------------------------------------------------

def _zeros(points):
    return np.zeros(len(points))


def _zero_family(d, **_):
    return dict(spatial=lambda p: np.zeros_like(p), spatial_divergence=_zeros,
                divergence_free=True, is_zero=True)


def _constant_family(d, vector=None, **_):
    vec = np.zeros(d) if vector is None else np.asarray(vector, dtype=float).ravel()
    if vec.size != d:
        raise ArgumentError("constant field vector does not match dimension")
    return dict(spatial=lambda p: np.broadcast_to(vec, p.shape).copy(), spatial_divergence=_zeros,
                divergence_free=True, is_zero=bool(np.all(vec == 0)))


def _require_plane(d, name):
    if d < 2:
        raise ArgumentError(f"{name} field requires d >= 2")


def _rotation_family(d, rate=1.0, center=None, **_):
    _require_plane(d, 'rotation')
    c = np.zeros(d) if center is None else np.asarray(center, dtype=float)

    def spatial(p):
        out = np.zeros_like(p)
        out[:, 0] = -rate * (p[:, 1] - c[1])
        out[:, 1] = rate * (p[:, 0] - c[0])
        return out
    return dict(spatial=spatial, spatial_divergence=_zeros, divergence_free=True)


def _shear_family(d, rate=1.0, **_):
    _require_plane(d, 'shear')

    def spatial(p):
        out = np.zeros_like(p)
        out[:, 0] = rate * p[:, 1]
        return out
    return dict(spatial=spatial, spatial_divergence=_zeros, divergence_free=True)


def _strain_family(d, rate=1.0, center=None, **_):
    _require_plane(d, 'strain')
    c = np.zeros(d) if center is None else np.asarray(center, dtype=float)

    def spatial(p):
        out = np.zeros_like(p)
        out[:, 0] = rate * (p[:, 0] - c[0])
        out[:, 1] = -rate * (p[:, 1] - c[1])
        return out
    return dict(spatial=spatial, spatial_divergence=_zeros, divergence_free=True)


def _radial_family(d, scale=1.0, center=None, **_):
    c = np.zeros(d) if center is None else np.asarray(center, dtype=float)
    return dict(spatial=lambda p: scale * (p - c),
                spatial_divergence=lambda p: np.full(len(p), scale * d),
                divergence_free=(scale == 0.0))


def _compressive_family(d, rate=1.0, center=None, **_):
    return _radial_family(d, scale=-abs(rate), center=center)


def _linear_family(d, matrix=None, offset=None, **_):
    A = np.eye(d) if matrix is None else np.asarray(matrix, dtype=float).reshape(d, d)
    c = np.zeros(d) if offset is None else np.asarray(offset, dtype=float)
    tr = float(np.trace(A))
    return dict(spatial=lambda p: p @ A.T + c, spatial_divergence=lambda p: np.full(len(p), tr),
                divergence_free=(tr == 0.0))


def _unit_radial_family(d, center=None, **_):
    c = np.zeros(d) if center is None else np.asarray(center, dtype=float)

    def spatial(p):
        r = p - c
        rho = np.linalg.norm(r, axis=1)
        out = np.zeros_like(p)
        nz = rho > 0
        out[nz] = r[nz] / rho[nz, None]
        return out

    def divergence(p):
        rho = np.linalg.norm(p - c, axis=1)
        with np.errstate(divide='ignore'):
            return np.where(rho > 0, (d - 1) / rho, np.inf)
    return dict(spatial=spatial, spatial_divergence=divergence, smoothness='piecewise-smooth',
                discontinuity='x = center', unbounded_divergence=True)


def _piecewise_constant_family(d, left=1.0, right=2.0, jump=0.5, axis=0, **_):
    lv = np.broadcast_to(np.asarray(left, dtype=float), (d,)).copy()
    rv = np.broadcast_to(np.asarray(right, dtype=float), (d,)).copy()
    if np.ndim(left) == 0 and d > 1:
        lv = np.eye(d)[axis] * float(left)
        rv = np.eye(d)[axis] * float(right)

    def spatial(p):
        mask = (p[:, axis] < jump)[:, None]
        return np.where(mask, lv, rv)
    return dict(spatial=spatial, spatial_divergence=_zeros, smoothness='piecewise-smooth',
                discontinuity=f"x{axis + 1} = {jump}", divergence_free=True)


FIELD_REGISTRY: Dict[str, Callable[..., Dict[str, Any]]] = {
    'zero': _zero_family,
    'constant': _constant_family,
    'rotation': _rotation_family,
    'shear': _shear_family,
    'strain': _strain_family,
    'radial': _radial_family,
    'compressive': _compressive_family,
    'linear': _linear_family,
    'unit_radial': _unit_radial_family,
    'piecewise_constant': _piecewise_constant_family,
}


def make_field(name: str, dimension: int, parameters: Optional[Dict[str, Any]] = None,
               time_modulation_name: str = 'none', horizon: float = 1.0,
               modulation_parameters: Optional[Dict[str, Any]] = None) -> DriftField:
    """Build a registered field family."""
    if name not in FIELD_REGISTRY:
        raise ArgumentError(f"unknown drift field: {name!r} (known: {sorted(FIELD_REGISTRY)})")
    params = dict(parameters or {})
    parts = FIELD_REGISTRY[name](dimension, **params)
    modulation = time_modulation(time_modulation_name, horizon, **(modulation_parameters or {}))
    return DriftField(name=name, dimension=dimension, modulation=modulation,
                      modulation_name=time_modulation_name or 'none', parameters=params, **parts)


def field_from_descriptor(descriptor: Dict[str, Any], dimension: int, horizon: float) -> DriftField:
    return make_field(
        descriptor.get('name', 'zero'), dimension,
        parameters=descriptor.get('parameters'),
        time_modulation_name=descriptor.get('time_modulation', 'none'),
        horizon=horizon,
        modulation_parameters=descriptor.get('modulation_parameters'),
    )


# -- flux -----------------------------------------------------------------

@dataclass(frozen=True)
class FluxDecomposition:
    """b.n at a boundary point split into outflux and influx parts."""
    flux: float
    positive: float
    negative: float
    influx: bool

    def to_dict(self) -> dict:
        return {'flux': self.flux, 'positive': self.positive,
                'negative': self.negative, 'influx': self.influx}


def flux_parts(field: DriftField, t: float, quad: BoundaryQuadrature) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized (b.n, (b.n)^+, (b.n)^-) on boundary nodes."""
    flux = np.sum(field.velocity_batch(t, quad.positions) * quad.normals, axis=1)
    return flux, np.maximum(flux, 0.0), np.maximum(-flux, 0.0)


def flux_decomposition(field: DriftField, domain: Domain, t: float, r: BoundaryPoint) -> FluxDecomposition:
    flux = float(np.dot(field.eval(t, r.position), r.normal))
    return FluxDecomposition(flux=flux, positive=max(flux, 0.0), negative=max(-flux, 0.0), influx=flux < 0.0)


# -- mollification --------------------------------------------------------

def _bump(s: np.ndarray) -> np.ndarray:
    out = np.zeros_like(s)
    inside = s < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


def _bump_derivative(s: np.ndarray) -> np.ndarray:
    out = np.zeros_like(s)
    inside = s < 1.0
    si = s[inside]
    out[inside] = np.exp(-1.0 / (1.0 - si ** 2)) * (-2.0 * si / (1.0 - si ** 2) ** 2)
    return out


def _unit_sphere_area(d: int) -> float:
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


@dataclass(frozen=True)
class MollifierKernel:
    """
    Normalized bump rho_eps(z) = C eps^-d exp(-1/(1-|z/eps|^2)), with a
    cached cell-centred lattice of spacing eps/lattice_ratio for convolution.
    """
    radius: float
    dimension: int
    lattice_ratio: int = 8

    def __post_init__(self):
        if self.radius <= 0:
            raise ArgumentError("mollifier radius must be positive")

    @cached_property
    def normalization(self) -> float:
        d = self.dimension
        radial, _ = integrate.quad(lambda r: r ** (d - 1) * math.exp(-1.0 / (1.0 - r * r)), 0.0, 1.0,
                                   epsabs=1e-14, epsrel=1e-12)
        return 1.0 / (_unit_sphere_area(d) * radial)

    def value(self, z: np.ndarray) -> np.ndarray:
        z = np.atleast_2d(z)
        s = np.linalg.norm(z, axis=1) / self.radius
        return self.normalization * self.radius ** (-self.dimension) * _bump(s)

    def gradient(self, z: np.ndarray) -> np.ndarray:
        z = np.atleast_2d(z)
        norm = np.linalg.norm(z, axis=1)
        s = norm / self.radius
        scale = self.normalization * self.radius ** (-self.dimension) * _bump_derivative(s) / self.radius
        safe = np.where(norm > 0, norm, 1.0)
        return (scale / safe)[:, None] * z

    @cached_property
    def lattice(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(offsets (K, d), weights (K,), gradient weights (K, d)); weights sum to one."""
        m = self.lattice_ratio
        h = self.radius / m
        axis = (np.arange(-m, m) + 0.5) * h
        mesh = np.meshgrid(*([axis] * self.dimension), indexing='ij')
        offsets = np.stack([g.ravel() for g in mesh], axis=1)
        offsets = offsets[np.linalg.norm(offsets, axis=1) < self.radius]
        cell = h ** self.dimension
        raw = self.value(offsets) * cell
        scale = 1.0 / np.sum(raw)
        return offsets, raw * scale, self.gradient(offsets) * cell * scale

    def convolve(self, fn: SpatialFn, centers: np.ndarray) -> np.ndarray:
        """sum_k w_k fn(centers - zeta_k); fn maps (m, d) to (m,) or (m, d)."""
        offsets, weights, _ = self.lattice
        n, d = centers.shape
        stencil = (centers[:, None, :] - offsets[None, :, :]).reshape(-1, d)
        values = fn(stencil)
        values = values.reshape(n, len(offsets), *values.shape[1:])
        return np.tensordot(weights, values, axes=([0], [1]))

    def convolve_gradient(self, fn: SpatialFn, centers: np.ndarray) -> np.ndarray:
        """sum_k fn(centers - zeta_k) grad rho(zeta_k), i.e. grad of (rho * fn) for scalar fn."""
        offsets, _, grad_weights = self.lattice
        n, d = centers.shape
        stencil = (centers[:, None, :] - offsets[None, :, :]).reshape(-1, d)
        values = fn(stencil).reshape(n, len(offsets))
        return values @ grad_weights


def mollify_field(field: DriftField, epsilon: float) -> DriftField:
    """b_eps = b * rho_eps by lattice quadrature; the divergence uses the kernel gradient."""
    kernel = MollifierKernel(epsilon, field.dimension)
    if field.is_zero:
        return field
    spatial = field.spatial
    _, _, grad_weights = kernel.lattice

    def smoothed(points):
        return kernel.convolve(spatial, points)

    def smoothed_divergence(points):
        offsets = kernel.lattice[0]
        n, d = points.shape
        stencil = (points[:, None, :] - offsets[None, :, :]).reshape(-1, d)
        values = spatial(stencil).reshape(n, len(offsets), d)
        return np.einsum('nkd,kd->n', values, grad_weights)

    params = dict(field.parameters)
    params['mollified_epsilon'] = epsilon
    return DriftField(
        name=f"{field.name}_eps", dimension=field.dimension, spatial=smoothed,
        spatial_divergence=smoothed_divergence, smoothness='smooth', discontinuity=None,
        unbounded_divergence=False, divergence_free=False, modulation=field.modulation,
        modulation_name=field.modulation_name, parameters=params,
    )


@dataclass(frozen=True)
class ShiftedMollifier:
    """
    Boundary-aware convolution (rho_eps *_n u)(y) = sum_k w_k u(y^eps - zeta_k)
    with the stencil centre pushed inward, y^eps = y + lam eps grad h(y).
    """
    domain: Domain
    kernel: MollifierKernel
    lam: float

    @property
    def epsilon(self) -> float:
        return self.kernel.radius

    def centers(self, points: np.ndarray) -> np.ndarray:
        grad_h = self.domain.level_function_h().gradient(points)
        return points + self.lam * self.epsilon * grad_h

    def stencil(self, points: np.ndarray) -> np.ndarray:
        offsets = self.kernel.lattice[0]
        return self.centers(points)[:, None, :] - offsets[None, :, :]

    def escapes(self, points: np.ndarray) -> np.ndarray:
        """Per point: True if any stencil node is not interior."""
        st = self.stencil(points)
        n, k, d = st.shape
        inside = self.domain.interior_mask(st.reshape(-1, d)).reshape(n, k)
        return ~np.all(inside, axis=1)

    def check(self, points: np.ndarray) -> None:
        bad = self.escapes(points)
        if np.any(bad):
            first = points[np.argmax(bad)]
            raise StencilEscapeError(
                f"shifted stencil (eps={self.epsilon}, lam={self.lam}) leaves the domain near {first.tolist()}"
            )

    def jacobian(self, points: np.ndarray) -> np.ndarray:
        """d y^eps / d y = I + lam eps Hess h."""
        d = self.domain.dimension
        hess = self.domain.level_function_h().hessian(points)
        return np.eye(d)[None, :, :] + self.lam * self.epsilon * hess

    def apply(self, fn: SpatialFn, points: np.ndarray, check: bool = True) -> np.ndarray:
        if check:
            self.check(points)
        return self.kernel.convolve(fn, self.centers(points))

    def kernel_gradient_sum(self, fn: SpatialFn, points: np.ndarray) -> np.ndarray:
        """integral of fn(z) grad rho(y^eps - z) dz on the shifted stencil."""
        return self.kernel.convolve_gradient(fn, self.centers(points))


def _containment_sample(domain: Domain) -> np.ndarray:
    try:
        quad = domain.boundary_quadrature(32)
    except UnsupportedDomainError:
        lo, hi = domain.bbox
        grid = np.linspace(0, 1, 9)
        mesh = np.meshgrid(*([grid] * domain.dimension), indexing='ij')
        pts = lo + np.stack([m.ravel() for m in mesh], axis=1) * (hi - lo)
        return pts[domain.interior_mask(pts)]
    collar = [quad.positions] + [domain.deform_nodes(quad, f * domain.delta_star) for f in (0.25, 0.5, 0.9)]
    return np.vstack(collar)


def shifted_mollifier(domain: Domain, epsilon: float, lam: Optional[float] = None) -> ShiftedMollifier:
    """Pick the smallest admissible shift multiplier unless one is given."""
    kernel = MollifierKernel(epsilon, domain.dimension)
    sample = _containment_sample(domain)
    candidates = (lam,) if lam is not None else SHIFT_CANDIDATES
    for candidate in candidates:
        mollifier = ShiftedMollifier(domain, kernel, float(candidate))
        if not np.any(mollifier.escapes(sample)):
            if lam is None and candidate != SHIFT_CANDIDATES[0]:
                logger.warning(f"shift multiplier raised to {candidate} for eps={epsilon}")
            return mollifier
    raise StencilEscapeError(f"no shift multiplier in {candidates} keeps the eps={epsilon} stencil inside")


class ShiftedMollification:
    """Callable result of shifted_mollify, defined on the closure of U."""

    def __init__(self, sample: SpatialFn, mollifier: ShiftedMollifier):
        self.sample = sample
        self.mollifier = mollifier

    def __call__(self, x: Any):
        points, single = as_points(x, self.mollifier.domain.dimension)
        out = self.mollifier.apply(self.sample, points)
        return float(out[0]) if single else out


def shifted_mollify(sample: SpatialFn, domain: Domain, epsilon: float,
                    lam: Optional[float] = None) -> ShiftedMollification:
    return ShiftedMollification(sample, shifted_mollifier(domain, epsilon, lam))


# -- uniqueness hypotheses --------------------------------------------------

@dataclass
class UniquenessBounds:
    """Sampled envelopes alpha(t) >= |b|, gamma(t) >= div b (clipped at 0)."""
    times: np.ndarray
    alpha: np.ndarray
    gamma: np.ndarray
    satisfied: bool
    integrable_marginal: bool = False
    alpha_l1: float = 0.0
    gamma_l1: float = 0.0
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            'satisfied': self.satisfied,
            'integrable_marginal': self.integrable_marginal,
            'alpha_max': float(np.max(self.alpha)),
            'gamma_max': float(np.max(self.gamma)),
            'alpha_l1': self.alpha_l1,
            'gamma_l1': self.gamma_l1,
            'notes': list(self.notes),
        }


def _envelopes(field: DriftField, points: np.ndarray, horizon: float, resolution: int):
    times = (np.arange(resolution) + 0.5) * horizon / resolution
    alpha = np.empty(resolution)
    gamma = np.empty(resolution)
    for i, t in enumerate(times):
        alpha[i] = np.max(np.linalg.norm(field.velocity_batch(t, points), axis=1))
        div = field.divergence_batch(t, points)
        gamma[i] = max(float(np.max(div)), 0.0)
    return times, alpha, gamma


def uniqueness_bounds(field: DriftField, domain: Domain, horizon: float,
                      resolution: int = 64) -> UniquenessBounds:
    if resolution < 2:
        raise ArgumentError("uniqueness_bounds resolution must be >= 2")
    points = domain.interior_quadrature(max(resolution // 2, 8)).points
    try:
        points = np.vstack([points, domain.boundary_quadrature(max(resolution, 8)).positions])
    except UnsupportedDomainError:
        pass
    times, alpha, gamma = _envelopes(field, points, horizon, resolution)
    satisfied = bool(np.all(np.isfinite(alpha)) and np.all(np.isfinite(gamma)))
    dt = horizon / resolution
    alpha_l1, gamma_l1 = float(np.sum(alpha) * dt), float(np.sum(gamma) * dt)
    notes = []
    marginal = False
    if satisfied:
        _, alpha2, gamma2 = _envelopes(field, points, horizon, 2 * resolution)
        a2, g2 = float(np.sum(alpha2) * dt / 2), float(np.sum(gamma2) * dt / 2)
        growth = max(abs(a2 - alpha_l1) / max(alpha_l1, 1e-300), abs(g2 - gamma_l1) / max(gamma_l1, 1e-300)
                     if gamma_l1 > 0 else 0.0)
        if growth > 0.05:
            marginal = True
            notes.append(f"L1 envelope grows {100 * growth:.1f}% under time refinement")
    else:
        notes.append("non-finite envelope")
    logger.debug(f"uniqueness bounds for {field.name}: alpha_l1={alpha_l1:.4g} gamma_l1={gamma_l1:.4g}")
    return UniquenessBounds(times, alpha, gamma, satisfied, marginal, alpha_l1, gamma_l1, notes)
