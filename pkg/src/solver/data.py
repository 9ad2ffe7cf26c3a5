"""
Data Registry - Solver
Named closures for the initial datum u0(x) and the boundary datum u_b(t, r),
each with an analytic bound used for the data bound M.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from src.core.exceptions import ArgumentError
from src.core.geometry import Domain

logger = logging.getLogger(__name__)

ValueFn = Callable[[float, np.ndarray], np.ndarray]
BoundFn = Callable[[Domain, float], float]


@dataclass(frozen=True)
class DataFunction:
    """Bounded datum f(t, x) on a batch of points; u0 ignores t."""
    name: str
    fn: ValueFn
    bound_fn: BoundFn
    parameters: Dict[str, Any] = field(default_factory=dict)
    constant_value: Optional[float] = None

    def __call__(self, t: float, points: np.ndarray) -> np.ndarray:
        return self.fn(t, np.atleast_2d(points))

    def bound(self, domain: Domain, horizon: float) -> float:
        return float(self.bound_fn(domain, horizon))

    def describe(self) -> Dict[str, Any]:
        return {'name': self.name, 'parameters': self.parameters}


def _corner_max(domain: Domain, fn: Callable[[np.ndarray], float]) -> float:
    lo, hi = domain.bbox
    return fn(np.maximum(np.abs(lo), np.abs(hi)))


def _constant(value=0.0, **_):
    c = float(value)
    return dict(fn=lambda t, p: np.full(len(p), c), bound_fn=lambda dom, T: abs(c), constant_value=c)


def _indicator_halfspace(axis=0, threshold=0.5, inside=1.0, outside=0.0, **_):
    a, v_in, v_out = int(axis), float(inside), float(outside)
    return dict(fn=lambda t, p: np.where(p[:, a] > threshold, v_in, v_out),
                bound_fn=lambda dom, T: max(abs(v_in), abs(v_out)))


def _smooth_bump(center=None, radius=0.5, amplitude=1.0, **_):
    amp = float(amplitude)

    def fn(t, p):
        c = np.zeros(p.shape[1]) if center is None else np.asarray(center, dtype=float)
        s2 = np.sum((p - c) ** 2, axis=1) / radius ** 2
        out = np.zeros(len(p))
        inside = s2 < 1.0
        out[inside] = amp * np.exp(1.0 - 1.0 / (1.0 - s2[inside]))
        return out
    return dict(fn=fn, bound_fn=lambda dom, T: abs(amp))


def _linear(coefficients=None, offset=0.0, **_):
    def coef(d):
        a = np.ones(d) if coefficients is None else np.asarray(coefficients, dtype=float).ravel()
        if a.size != d:
            raise ArgumentError("linear datum coefficients do not match dimension")
        return a

    def fn(t, p):
        return offset + p @ coef(p.shape[1])

    return dict(fn=fn, bound_fn=lambda dom, T: abs(offset) + _corner_max(
        dom, lambda m: float(np.sum(np.abs(coef(dom.dimension)) * m))))


def _sine_product(frequency=1.0, amplitude=1.0, **_):
    amp = float(amplitude)
    return dict(fn=lambda t, p: amp * np.prod(np.sin(np.pi * frequency * p), axis=1),
                bound_fn=lambda dom, T: abs(amp))


def _radial_quadratic(center=None, scale=1.0, offset=0.0, **_):
    def fn(t, p):
        c = np.zeros(p.shape[1]) if center is None else np.asarray(center, dtype=float)
        return offset + scale * np.sum((p - c) ** 2, axis=1)

    def bound(dom, T):
        lo, hi = dom.bbox
        c = np.zeros(dom.dimension) if center is None else np.asarray(center, dtype=float)
        far = np.maximum(np.abs(lo - c), np.abs(hi - c))
        return abs(offset) + abs(scale) * float(np.sum(far ** 2))
    return dict(fn=fn, bound_fn=bound)


def _time_ramp(rate=1.0, offset=0.0, **_):
    return dict(fn=lambda t, p: np.full(len(p), offset + rate * float(t)),
                bound_fn=lambda dom, T: max(abs(offset), abs(offset + rate * T)))


DATA_REGISTRY: Dict[str, Callable[..., Dict[str, Any]]] = {
    'constant': _constant,
    'indicator_halfspace': _indicator_halfspace,
    'smooth_bump': _smooth_bump,
    'linear': _linear,
    'sine_product': _sine_product,
    'radial_quadratic': _radial_quadratic,
    'time_ramp': _time_ramp,
}


def make_data(name: str, parameters: Optional[Dict[str, Any]] = None) -> DataFunction:
    if name not in DATA_REGISTRY:
        raise ArgumentError(f"unknown datum: {name!r} (known: {sorted(DATA_REGISTRY)})")
    params = dict(parameters or {})
    return DataFunction(name=name, parameters=params, **DATA_REGISTRY[name](**params))


def data_from_descriptor(descriptor: Dict[str, Any]) -> DataFunction:
    return make_data(descriptor.get('name', 'constant'), descriptor.get('parameters'))


def constant_data(value: float) -> DataFunction:
    return make_data('constant', {'value': value})


def get_available_data() -> List[str]:
    return sorted(DATA_REGISTRY.keys())
