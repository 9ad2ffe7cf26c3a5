"""
Geometry - Core
Bounded domains described by level functions, with the boundary machinery the
solver and the verification layers need: nearest-point projection, outward
normals, mean curvature, the collar level function h, the inward deformation
Psi_tau and interior/boundary quadrature.

All point arguments accept a single point of shape (d,) or a batch (n, d).
"""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Any, Dict, List, NamedTuple, Sequence, Tuple, Type

import numpy as np
from scipy.optimize import brentq

from src.core.exceptions import (
    ArgumentError,
    DomainError,
    ProjectionError,
    UnsupportedDomainError,
)

logger = logging.getLogger(__name__)

# half width (in units of delta*) of the smoothing band at the clip of h
H_BAND_HALF_WIDTH = 0.05


class PointClass(str, Enum):
    """Position of a point relative to the domain."""
    INTERIOR = "interior"
    BOUNDARY = "boundary"
    EXTERIOR = "exterior"


class Curvature(NamedTuple):
    """Mean curvature value; ``degenerate`` is set in dimension one."""
    value: float
    degenerate: bool = False


@dataclass(frozen=True)
class BoundaryPoint:
    """A point of the boundary with its outward normal and quadrature weight."""
    position: np.ndarray
    normal: np.ndarray
    weight: float = 0.0
    curvature: float = 0.0
    node_id: int = -1

    def to_dict(self) -> dict:
        return {
            'node_id': self.node_id,
            'position': self.position.tolist(),
            'normal': self.normal.tolist(),
            'weight': self.weight,
            'curvature': self.curvature,
        }


@dataclass(frozen=True)
class BoundaryQuadrature:
    """Boundary nodes stored column-wise; indexing yields BoundaryPoint."""
    positions: np.ndarray
    normals: np.ndarray
    weights: np.ndarray
    curvatures: np.ndarray

    def __len__(self) -> int:
        return len(self.weights)

    def __getitem__(self, i: int) -> BoundaryPoint:
        return BoundaryPoint(
            position=self.positions[i].copy(),
            normal=self.normals[i].copy(),
            weight=float(self.weights[i]),
            curvature=float(self.curvatures[i]),
            node_id=int(i),
        )

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @property
    def total_measure(self) -> float:
        return float(np.sum(self.weights))


@dataclass(frozen=True)
class InteriorQuadrature:
    """Weighted interior nodes (cell midpoints of a clipped regular grid)."""
    points: np.ndarray
    weights: np.ndarray
    spacing: float

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def total_measure(self) -> float:
        return float(np.sum(self.weights))


def as_points(x: Any, dimension: int) -> Tuple[np.ndarray, bool]:
    """Return ``(points (n, d), single)`` for a point or a batch of points."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim <= 1:
        if arr.size != dimension:
            raise ArgumentError(f"expected a point of dimension {dimension}, got shape {arr.shape}")
        return arr.reshape(1, dimension), True
    if arr.ndim != 2 or arr.shape[1] != dimension:
        raise ArgumentError(f"expected points of shape (n, {dimension}), got {arr.shape}")
    return arr, False


def _smooth_clip(s: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """C1 clip of s at 1 with a quadratic blend; returns g, g', g''."""
    a = H_BAND_HALF_WIDTH
    g = np.where(s <= 1.0 - a, s, 1.0)
    dg = np.where(s <= 1.0 - a, 1.0, 0.0)
    d2g = np.zeros_like(s)
    band = (s > 1.0 - a) & (s < 1.0 + a)
    sb = s[band] - 1.0 + a
    g[band] = s[band] - sb ** 2 / (4.0 * a)
    dg[band] = 1.0 - sb / (2.0 * a)
    d2g[band] = -1.0 / (2.0 * a)
    return g, dg, d2g


@dataclass(frozen=True)
class LevelFunctionH:
    """
    Clipped scaled distance h = min(dist, delta*)/delta* with a C1 blend at
    the clip. h vanishes outside the domain and equals one deep inside.
    """
    domain: "Domain"
    width: float

    def _scaled(self, points: np.ndarray):
        inside = self.domain.level(points) <= self.domain.tol
        dist = np.zeros(len(points))
        grad_dist = np.zeros_like(points)
        if np.any(inside):
            pos, normals, d = self.domain.nearest_boundary(points[inside])
            dist[inside] = d
            grad_dist[inside] = -normals
        return inside, dist / self.width, grad_dist

    def value(self, x: Any):
        points, single = as_points(x, self.domain.dimension)
        inside, s, _ = self._scaled(points)
        g, _, _ = _smooth_clip(s)
        out = np.where(inside, g, 0.0)
        return float(out[0]) if single else out

    def gradient(self, x: Any) -> np.ndarray:
        points, single = as_points(x, self.domain.dimension)
        inside, s, grad_dist = self._scaled(points)
        _, dg, _ = _smooth_clip(s)
        out = (np.where(inside, dg, 0.0) / self.width)[:, None] * grad_dist
        return out[0] if single else out

    def hessian(self, x: Any) -> np.ndarray:
        points, single = as_points(x, self.domain.dimension)
        inside, s, grad_dist = self._scaled(points)
        _, dg, d2g = _smooth_clip(s)
        d = self.domain.dimension
        out = np.zeros((len(points), d, d))
        active = inside & (dg > 0.0)
        if np.any(active):
            hess_dist = self.domain.distance_hessian(points[active])
            gd = grad_dist[active]
            out[active] = (
                (d2g[active] / self.width ** 2)[:, None, None] * np.einsum('ni,nj->nij', gd, gd)
                + (dg[active] / self.width)[:, None, None] * hess_dist
            )
        return out[0] if single else out


class Domain(ABC):
    """
    Bounded open set U = {phi < 0} with boundary Gamma = {phi = 0}.

    Subclasses supply the level function, nearest-point projection,
    curvature and boundary quadrature; everything else is shared.
    Instances are immutable after construction.
    """

    kind = "domain"

    def __init__(self, dimension: int):
        if dimension < 1 or dimension > 3:
            raise ArgumentError(f"dimension must be 1, 2 or 3, got {dimension}")
        self.dimension = int(dimension)

    # -- primitives -------------------------------------------------------

    @abstractmethod
    def level(self, points: np.ndarray) -> np.ndarray:
        """Level function phi on a batch (n, d); negative inside."""

    @abstractmethod
    def level_gradient(self, points: np.ndarray) -> np.ndarray:
        """Gradient of phi on a batch (n, d)."""

    @property
    @abstractmethod
    def bbox(self) -> Tuple[np.ndarray, np.ndarray]:
        """Bounding box corners (lo, hi)."""

    @property
    @abstractmethod
    def center(self) -> np.ndarray:
        """Declared interior center point."""

    @property
    @abstractmethod
    def inradius(self) -> float:
        """Lower estimate of the distance from the center to Gamma."""

    @abstractmethod
    def nearest_boundary(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Nearest boundary positions, outward normals there and distances."""

    @abstractmethod
    def curvature_at(self, positions: np.ndarray, normals: np.ndarray) -> np.ndarray:
        """Mean curvature at boundary positions (positive for convex)."""

    @abstractmethod
    def boundary_quadrature(self, resolution: int) -> BoundaryQuadrature:
        """Nodes and weights for the (d-1)-dimensional surface measure."""

    def distance_hessian(self, points: np.ndarray) -> np.ndarray:
        """Hessian of dist(., Gamma) by central differences of its gradient."""
        step = 1e-5 * (1.0 + self.diameter)
        n, d = points.shape
        out = np.zeros((n, d, d))
        for k in range(d):
            e = np.zeros(d)
            e[k] = step
            _, n_plus, _ = self.nearest_boundary(points + e)
            _, n_minus, _ = self.nearest_boundary(points - e)
            out[:, :, k] = -(n_plus - n_minus) / (2.0 * step)
        return 0.5 * (out + np.transpose(out, (0, 2, 1)))

    def describe(self) -> Dict[str, Any]:
        return {'kind': self.kind, 'dimension': self.dimension}

    # -- derived quantities ----------------------------------------------

    @cached_property
    def diameter(self) -> float:
        lo, hi = self.bbox
        return float(np.linalg.norm(hi - lo))

    @cached_property
    def tol(self) -> float:
        """Boundary tolerance 1e-9 (1 + bbox diameter)."""
        return 1e-9 * (1.0 + self.diameter)

    @cached_property
    def delta_star(self) -> float:
        """Collar width of the level function h."""
        return min(self.inradius / 2.0, 0.5)

    # -- operations -------------------------------------------------------

    def classify(self, points: np.ndarray) -> np.ndarray:
        """Vectorized classification: -1 interior, 0 boundary, +1 exterior."""
        phi = self.level(points)
        return np.where(phi < -self.tol, -1, np.where(phi > self.tol, 1, 0))

    def interior_mask(self, points: np.ndarray) -> np.ndarray:
        return self.level(points) < -self.tol

    def contains(self, x: Any) -> PointClass:
        points, _ = as_points(x, self.dimension)
        if not np.all(np.isfinite(points)):
            raise ArgumentError("point must be finite")
        code = int(self.classify(points)[0])
        return {-1: PointClass.INTERIOR, 0: PointClass.BOUNDARY, 1: PointClass.EXTERIOR}[code]

    def distance_to_boundary(self, x: Any):
        points, single = as_points(x, self.dimension)
        if np.any(self.classify(points) > 0):
            raise DomainError("distance_to_boundary is undefined for exterior points")
        _, _, dist = self.nearest_boundary(points)
        dist = np.where(np.abs(self.level(points)) <= self.tol, 0.0, dist)
        return float(dist[0]) if single else dist

    def boundary_project(self, x: Any) -> BoundaryPoint:
        points, _ = as_points(x, self.dimension)
        pos, normals, _ = self.nearest_boundary(points)
        curv = self.curvature_at(pos, normals)
        return BoundaryPoint(position=pos[0], normal=normals[0], curvature=float(curv[0]))

    def mean_curvature(self, r: Any) -> Curvature:
        if self.dimension == 1:
            return Curvature(0.0, True)
        if isinstance(r, BoundaryPoint):
            pos, normal = r.position, r.normal
        else:
            proj = self.boundary_project(r)
            pos, normal = proj.position, proj.normal
        value = self.curvature_at(pos.reshape(1, -1), normal.reshape(1, -1))
        return Curvature(float(value[0]), False)

    def level_function_h(self) -> LevelFunctionH:
        return LevelFunctionH(self, self.delta_star)

    def level_h(self, x: Any):
        """Return (h(x), grad h(x))."""
        h = self.level_function_h()
        return h.value(x), h.gradient(x)

    def _check_tau(self, tau: float) -> None:
        if tau < 0.0 or tau > self.delta_star * (1.0 + 1e-12):
            raise ArgumentError(f"tau={tau} outside [0, delta*={self.delta_star}]")

    def deformation_psi(self, r: BoundaryPoint, tau: float) -> np.ndarray:
        """Inward normal deformation Psi_tau(r) = r - tau n(r)."""
        self._check_tau(tau)
        return np.asarray(r.position, dtype=float) - tau * np.asarray(r.normal, dtype=float)

    def deform_nodes(self, quad: BoundaryQuadrature, tau: float) -> np.ndarray:
        self._check_tau(tau)
        return quad.positions - tau * quad.normals

    def jacobian_psi(self, r: BoundaryPoint, tau: float) -> float:
        """Surface Jacobian (1 - tau H)^(d-1) of the normal deformation."""
        self._check_tau(tau)
        if tau == 0.0 or self.dimension == 1:
            return 1.0
        H = self.mean_curvature(r).value
        return float((1.0 - tau * H) ** (self.dimension - 1))

    def jacobian_nodes(self, quad: BoundaryQuadrature, tau: float) -> np.ndarray:
        self._check_tau(tau)
        if self.dimension == 1:
            return np.ones(len(quad))
        return (1.0 - tau * quad.curvatures) ** (self.dimension - 1)

    def interior_quadrature(self, resolution: int) -> InteriorQuadrature:
        """Midpoints of a regular grid over the bounding box clipped by phi."""
        if resolution < 2:
            raise ArgumentError("interior resolution must be >= 2")
        lo, hi = self.bbox
        spacing = (hi - lo) / resolution
        axes = [lo[k] + (np.arange(resolution) + 0.5) * spacing[k] for k in range(self.dimension)]
        mesh = np.meshgrid(*axes, indexing='ij')
        points = np.stack([m.ravel() for m in mesh], axis=1)
        keep = self.interior_mask(points)
        weights = np.full(int(keep.sum()), float(np.prod(spacing)))
        return InteriorQuadrature(points[keep], weights, float(np.max(spacing)))

    def sanity_check(self, samples: int = 64) -> List[str]:
        """Cheap structural checks on the level description; returns problems found."""
        problems = []
        if self.level(self.center.reshape(1, -1))[0] >= 0:
            problems.append("declared center is not interior")
        quad = self.boundary_quadrature(max(samples, 8))
        grads = np.linalg.norm(self.level_gradient(quad.positions), axis=1)
        if np.any(grads <= 0):
            problems.append("degenerate gradient on the boundary")
        dists = np.linalg.norm(quad.positions - self.center, axis=1)
        if self.inradius > np.min(dists) * (1.0 + 1e-9):
            problems.append("inradius estimate exceeds sampled center distance")
        return problems

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}({self.describe()})"


def _unit(vectors: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(vectors, axis=1)
    safe = norms > 0
    out = np.zeros_like(vectors)
    out[safe] = vectors[safe] / norms[safe, None]
    # direction at the center itself is arbitrary
    out[~safe, 0] = 1.0
    return out, norms


class Interval(Domain):
    """Open interval (lo, hi) in one dimension."""

    kind = "interval"

    def __init__(self, lo: float = 0.0, hi: float = 1.0):
        super().__init__(1)
        if not hi > lo:
            raise ArgumentError("interval requires hi > lo")
        self.lo, self.hi = float(lo), float(hi)

    def level(self, points):
        x = points[:, 0]
        return np.maximum(self.lo - x, x - self.hi)

    def level_gradient(self, points):
        x = points[:, 0]
        return np.where(x - self.hi >= self.lo - x, 1.0, -1.0)[:, None]

    @property
    def bbox(self):
        return np.array([self.lo]), np.array([self.hi])

    @property
    def center(self):
        return np.array([0.5 * (self.lo + self.hi)])

    @property
    def inradius(self):
        return 0.5 * (self.hi - self.lo)

    def nearest_boundary(self, points):
        x = points[:, 0]
        left = np.abs(x - self.lo) <= np.abs(self.hi - x)
        pos = np.where(left, self.lo, self.hi)[:, None]
        normals = np.where(left, -1.0, 1.0)[:, None]
        return pos, normals, np.abs(x - pos[:, 0])

    def curvature_at(self, positions, normals):
        return np.zeros(len(positions))

    def distance_hessian(self, points):
        return np.zeros((len(points), 1, 1))

    def boundary_quadrature(self, resolution):
        if resolution < 2:
            raise ArgumentError("boundary resolution must be >= 2")
        return BoundaryQuadrature(
            positions=np.array([[self.lo], [self.hi]]),
            normals=np.array([[-1.0], [1.0]]),
            weights=np.ones(2),
            curvatures=np.zeros(2),
        )

    def describe(self):
        return {'kind': self.kind, 'lo': self.lo, 'hi': self.hi}


class Ball(Domain):
    """Euclidean ball; the disk is the two-dimensional case."""

    kind = "ball"

    def __init__(self, center: Sequence[float] = (0.0, 0.0), radius: float = 1.0):
        c = np.asarray(center, dtype=float).ravel()
        super().__init__(len(c))
        if self.dimension < 2:
            raise ArgumentError("use Interval in one dimension")
        if radius <= 0:
            raise ArgumentError("radius must be positive")
        self._center = c
        self.radius = float(radius)

    def level(self, points):
        return np.linalg.norm(points - self._center, axis=1) - self.radius

    def level_gradient(self, points):
        u, _ = _unit(points - self._center)
        return u

    @property
    def bbox(self):
        return self._center - self.radius, self._center + self.radius

    @property
    def center(self):
        return self._center.copy()

    @property
    def inradius(self):
        return self.radius

    def nearest_boundary(self, points):
        u, rho = _unit(points - self._center)
        return self._center + self.radius * u, u, np.abs(self.radius - rho)

    def curvature_at(self, positions, normals):
        return np.full(len(positions), 1.0 / self.radius)

    def distance_hessian(self, points):
        u, rho = _unit(points - self._center)
        d = self.dimension
        proj = np.eye(d)[None, :, :] - np.einsum('ni,nj->nij', u, u)
        return -proj / np.maximum(rho, 1e-300)[:, None, None]

    def boundary_quadrature(self, resolution):
        if resolution < 2:
            raise ArgumentError("boundary resolution must be >= 2")
        R = self.radius
        if self.dimension == 2:
            theta = 2.0 * np.pi * (np.arange(resolution) + 0.5) / resolution
            normals = np.stack([np.cos(theta), np.sin(theta)], axis=1)
            weights = np.full(resolution, 2.0 * np.pi * R / resolution)
        else:
            z, wz = np.polynomial.legendre.leggauss(resolution)
            n_az = 2 * resolution
            az = 2.0 * np.pi * (np.arange(n_az) + 0.5) / n_az
            zz, aa = np.meshgrid(z, az, indexing='ij')
            s = np.sqrt(1.0 - zz ** 2)
            normals = np.stack([(s * np.cos(aa)).ravel(), (s * np.sin(aa)).ravel(), zz.ravel()], axis=1)
            weights = (R ** 2 * np.repeat(wz, n_az) * (2.0 * np.pi / n_az))
        positions = self._center + R * normals
        return BoundaryQuadrature(positions, normals, weights, np.full(len(weights), 1.0 / R))

    def describe(self):
        return {'kind': 'disk' if self.dimension == 2 else self.kind,
                'center': self._center.tolist(), 'radius': self.radius}


class Disk(Ball):
    """Two-dimensional ball."""

    kind = "disk"

    def __init__(self, center: Sequence[float] = (0.0, 0.0), radius: float = 1.0):
        if len(center) != 2:
            raise ArgumentError("disk center must be two-dimensional")
        super().__init__(center, radius)


class Annulus(Domain):
    """Planar annulus inner < |x - c| < outer (non-convex)."""

    kind = "annulus"

    def __init__(self, center: Sequence[float] = (0.0, 0.0), inner: float = 0.5, outer: float = 1.0):
        super().__init__(2)
        if not 0 < inner < outer:
            raise ArgumentError("annulus requires 0 < inner < outer")
        self._center = np.asarray(center, dtype=float).ravel()
        self.inner, self.outer = float(inner), float(outer)

    def level(self, points):
        rho = np.linalg.norm(points - self._center, axis=1)
        return np.maximum(self.inner - rho, rho - self.outer)

    def level_gradient(self, points):
        u, rho = _unit(points - self._center)
        outer = rho - self.outer >= self.inner - rho
        return np.where(outer[:, None], u, -u)

    @property
    def bbox(self):
        return self._center - self.outer, self._center + self.outer

    @property
    def center(self):
        return self._center + np.array([0.5 * (self.inner + self.outer), 0.0])

    @property
    def inradius(self):
        return 0.5 * (self.outer - self.inner)

    def _outer_side(self, rho):
        return np.abs(self.outer - rho) <= np.abs(rho - self.inner)

    def nearest_boundary(self, points):
        u, rho = _unit(points - self._center)
        outer = self._outer_side(rho)
        radius = np.where(outer, self.outer, self.inner)
        pos = self._center + radius[:, None] * u
        normals = np.where(outer[:, None], u, -u)
        return pos, normals, np.abs(radius - rho)

    def curvature_at(self, positions, normals):
        rho = np.linalg.norm(positions - self._center, axis=1)
        return np.where(self._outer_side(rho), 1.0 / self.outer, -1.0 / self.inner)

    def distance_hessian(self, points):
        u, rho = _unit(points - self._center)
        proj = np.eye(2)[None, :, :] - np.einsum('ni,nj->nij', u, u)
        sign = np.where(self._outer_side(rho), -1.0, 1.0)
        return sign[:, None, None] * proj / np.maximum(rho, 1e-300)[:, None, None]

    def boundary_quadrature(self, resolution):
        if resolution < 2:
            raise ArgumentError("boundary resolution must be >= 2")
        theta = 2.0 * np.pi * (np.arange(resolution) + 0.5) / resolution
        u = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        positions = np.vstack([self._center + self.outer * u, self._center + self.inner * u])
        normals = np.vstack([u, -u])
        weights = np.concatenate([
            np.full(resolution, 2.0 * np.pi * self.outer / resolution),
            np.full(resolution, 2.0 * np.pi * self.inner / resolution),
        ])
        curv = np.concatenate([np.full(resolution, 1.0 / self.outer), np.full(resolution, -1.0 / self.inner)])
        return BoundaryQuadrature(positions, normals, weights, curv)

    def describe(self):
        return {'kind': self.kind, 'center': self._center.tolist(),
                'inner': self.inner, 'outer': self.outer}


class Box(Domain):
    """Axis-aligned box; a Lipschitz domain with corners."""

    kind = "box"

    def __init__(self, lo: Sequence[float] = (0.0, 0.0), hi: Sequence[float] = (1.0, 1.0)):
        lo_arr = np.asarray(lo, dtype=float).ravel()
        hi_arr = np.asarray(hi, dtype=float).ravel()
        super().__init__(len(lo_arr))
        if self.dimension < 2 or lo_arr.shape != hi_arr.shape or np.any(hi_arr <= lo_arr):
            raise ArgumentError("box requires matching corners with hi > lo in d >= 2")
        self.lo, self.hi = lo_arr, hi_arr

    def level(self, points):
        return np.max(np.maximum(self.lo - points, points - self.hi), axis=1)

    def level_gradient(self, points):
        gaps = np.concatenate([self.lo - points, points - self.hi], axis=1)
        k = np.argmax(gaps, axis=1)
        out = np.zeros_like(points)
        d = self.dimension
        rows = np.arange(len(points))
        out[rows, k % d] = np.where(k < d, -1.0, 1.0)
        return out

    @property
    def bbox(self):
        return self.lo.copy(), self.hi.copy()

    @property
    def center(self):
        return 0.5 * (self.lo + self.hi)

    @property
    def inradius(self):
        return float(0.5 * np.min(self.hi - self.lo))

    def nearest_boundary(self, points):
        d = self.dimension
        gaps = np.concatenate([np.abs(points - self.lo), np.abs(self.hi - points)], axis=1)
        k = np.argmin(gaps, axis=1)
        rows = np.arange(len(points))
        axis = k % d
        pos = np.clip(points, self.lo, self.hi)
        pos[rows, axis] = np.where(k < d, self.lo[axis], self.hi[axis])
        normals = np.zeros_like(points)
        normals[rows, axis] = np.where(k < d, -1.0, 1.0)
        return pos, normals, np.linalg.norm(points - pos, axis=1)

    def curvature_at(self, positions, normals):
        return np.zeros(len(positions))

    def distance_hessian(self, points):
        return np.zeros((len(points), self.dimension, self.dimension))

    def boundary_quadrature(self, resolution):
        if resolution < 2:
            raise ArgumentError("boundary resolution must be >= 2")
        d = self.dimension
        positions, normals, weights = [], [], []
        for axis in range(d):
            others = [k for k in range(d) if k != axis]
            axes = [self.lo[k] + (np.arange(resolution) + 0.5) * (self.hi[k] - self.lo[k]) / resolution
                    for k in others]
            mesh = np.meshgrid(*axes, indexing='ij')
            face = np.stack([m.ravel() for m in mesh], axis=1)
            cell = float(np.prod([(self.hi[k] - self.lo[k]) / resolution for k in others]))
            for side, value in ((-1.0, self.lo[axis]), (1.0, self.hi[axis])):
                pts = np.zeros((len(face), d))
                pts[:, others] = face
                pts[:, axis] = value
                nrm = np.zeros((len(face), d))
                nrm[:, axis] = side
                positions.append(pts)
                normals.append(nrm)
                weights.append(np.full(len(face), cell))
        positions = np.vstack(positions)
        return BoundaryQuadrature(positions, np.vstack(normals), np.concatenate(weights),
                                  np.zeros(len(positions)))

    def describe(self):
        return {'kind': self.kind, 'lo': self.lo.tolist(), 'hi': self.hi.tolist()}


@dataclass
class PolynomialTerm:
    """One monomial c * prod x_i^p_i of a level polynomial."""
    powers: Tuple[int, ...]
    coef: float


class LevelSetDomain(Domain):
    """
    Star-shaped domain {p(x) < 0} for a polynomial p, e.g. an ellipse
    x^2/a^2 + y^2/b^2 - 1. Boundary quadrature is available for d <= 2.
    """

    kind = "levelset"

    def __init__(self, terms: Sequence[PolynomialTerm], center: Sequence[float],
                 half_width: float, max_iterations: int = 60):
        c = np.asarray(center, dtype=float).ravel()
        super().__init__(len(c))
        self.terms = [PolynomialTerm(tuple(int(p) for p in t.powers), float(t.coef)) for t in terms]
        for t in self.terms:
            if len(t.powers) != self.dimension:
                raise ArgumentError("polynomial term dimension does not match center")
        self._center = c
        self.half_width = float(half_width)
        self.max_iterations = max_iterations
        if self.level(c.reshape(1, -1))[0] >= 0:
            raise ArgumentError("declared center of a level-set domain must be interior")

    @classmethod
    def from_parameters(cls, terms: List[Dict[str, Any]], center: Sequence[float],
                        half_width: float = 2.0) -> "LevelSetDomain":
        return cls([PolynomialTerm(tuple(t['powers']), t['coef']) for t in terms], center, half_width)

    def level(self, points):
        out = np.zeros(len(points))
        for t in self.terms:
            out += t.coef * np.prod(points ** np.array(t.powers), axis=1)
        return out

    def _monomial_derivative(self, points, powers, orders):
        value = np.ones(len(points))
        coef = 1.0
        for i, (p, k) in enumerate(zip(powers, orders)):
            if k > p:
                return np.zeros(len(points)), 0.0
            for j in range(k):
                coef *= (p - j)
            value = value * points[:, i] ** (p - k)
        return value, coef

    def level_gradient(self, points):
        d = self.dimension
        out = np.zeros((len(points), d))
        for t in self.terms:
            for i in range(d):
                orders = [1 if k == i else 0 for k in range(d)]
                v, c = self._monomial_derivative(points, t.powers, orders)
                out[:, i] += t.coef * c * v
        return out

    def level_hessian(self, points):
        d = self.dimension
        out = np.zeros((len(points), d, d))
        for t in self.terms:
            for i in range(d):
                for j in range(d):
                    orders = [0] * d
                    orders[i] += 1
                    orders[j] += 1
                    v, c = self._monomial_derivative(points, t.powers, orders)
                    out[:, i, j] += t.coef * c * v
        return out

    @property
    def bbox(self):
        return self._center - self.half_width, self._center + self.half_width

    @property
    def center(self):
        return self._center.copy()

    def _directions(self, count: int) -> np.ndarray:
        if self.dimension == 1:
            return np.array([[-1.0], [1.0]])
        if self.dimension == 2:
            theta = 2.0 * np.pi * (np.arange(count) + 0.5) / count
            return np.stack([np.cos(theta), np.sin(theta)], axis=1)
        # Fibonacci sphere
        k = np.arange(count) + 0.5
        z = 1.0 - 2.0 * k / count
        az = np.pi * (1.0 + 5 ** 0.5) * k
        s = np.sqrt(1.0 - z ** 2)
        return np.stack([s * np.cos(az), s * np.sin(az), z], axis=1)

    def _ray_radius(self, direction: np.ndarray) -> float:
        reach = self.diameter

        def along(rho):
            return float(self.level((self._center + rho * direction).reshape(1, -1))[0])

        if along(reach) <= 0:
            raise DomainError("level set does not close inside its bounding box")
        return brentq(along, 0.0, reach, xtol=1e-14, rtol=1e-14)

    @cached_property
    def inradius(self):
        radii = [self._ray_radius(u) for u in self._directions(256)]
        return 0.95 * float(min(radii))

    def _ray_points(self, points: np.ndarray) -> np.ndarray:
        """Boundary crossing of the ray from the center through each point (bisection)."""
        dirs, _ = _unit(points - self._center)
        lo = np.zeros(len(points))
        hi = np.full(len(points), self.diameter)
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            inside = self.level(self._center + mid[:, None] * dirs) < 0
            lo = np.where(inside, mid, lo)
            hi = np.where(inside, hi, mid)
        return self._center + hi[:, None] * dirs

    def _to_surface(self, x: np.ndarray) -> np.ndarray:
        for iteration in range(self.max_iterations):
            phi = self.level(x)
            if np.all(np.abs(phi) <= 0.1 * self.tol):
                return x
            g = self.level_gradient(x)
            g2 = np.sum(g * g, axis=1)
            if np.any(g2 <= 0):
                raise ProjectionError("vanishing level gradient during projection", iteration)
            x = x - (phi / g2)[:, None] * g
        raise ProjectionError("Newton surface projection did not converge", self.max_iterations)

    def nearest_boundary(self, points):
        r = self._to_surface(self._ray_points(points))
        step_tol = 1e-12 * (1.0 + self.diameter)
        converged = np.zeros(len(points), dtype=bool)
        for _ in range(self.max_iterations):
            g = self.level_gradient(r)
            n = g / np.linalg.norm(g, axis=1)[:, None]
            foot = points - np.sum((points - r) * n, axis=1)[:, None] * n
            r_new = self._to_surface(foot)
            converged = np.linalg.norm(r_new - r, axis=1) <= step_tol
            r = r_new
            if np.all(converged):
                break
        dist = np.linalg.norm(points - r, axis=1)
        # points beyond the collar may sit on the medial axis; their h is clipped anyway
        stuck = ~converged & (dist <= self.delta_star * (1.0 + 2 * H_BAND_HALF_WIDTH))
        if np.any(stuck):
            raise ProjectionError("closest-point iteration did not converge", self.max_iterations)
        g = self.level_gradient(r)
        normals = g / np.linalg.norm(g, axis=1)[:, None]
        return r, normals, dist

    def curvature_at(self, positions, normals):
        if self.dimension == 1:
            return np.zeros(len(positions))
        g = self.level_gradient(positions)
        H = self.level_hessian(positions)
        gn = np.linalg.norm(g, axis=1)
        trace = np.trace(H, axis1=1, axis2=2)
        quad = np.einsum('ni,nij,nj->n', g, H, g)
        div_n = (trace * gn ** 2 - quad) / gn ** 3
        return div_n / (self.dimension - 1)

    def boundary_quadrature(self, resolution):
        if resolution < 2:
            raise ArgumentError("boundary resolution must be >= 2")
        if self.dimension >= 3:
            raise UnsupportedDomainError("boundary quadrature for level-set domains requires d <= 2")
        dirs = self._directions(resolution)
        radii = np.array([self._ray_radius(u) for u in dirs])
        positions = self._center + radii[:, None] * dirs
        g = self.level_gradient(positions)
        normals = g / np.linalg.norm(g, axis=1)[:, None]
        if self.dimension == 1:
            weights = np.ones(len(positions))
        else:
            seg = np.linalg.norm(np.roll(positions, -1, axis=0) - positions, axis=1)
            weights = 0.5 * (seg + np.roll(seg, 1))
        return BoundaryQuadrature(positions, normals, weights, self.curvature_at(positions, normals))

    def describe(self):
        return {
            'kind': self.kind,
            'terms': [{'powers': list(t.powers), 'coef': t.coef} for t in self.terms],
            'center': self._center.tolist(),
            'half_width': self.half_width,
        }


class DomainFactory:
    """Builds domains from config descriptors {kind, parameters...}."""

    _domains: Dict[str, Type[Domain]] = {
        'interval': Interval,
        'disk': Disk,
        'ball': Ball,
        'annulus': Annulus,
        'box': Box,
        'levelset': LevelSetDomain,
    }

    @classmethod
    def create(cls, descriptor: Dict[str, Any]) -> Domain:
        params = dict(descriptor)
        kind = params.pop('kind', None)
        if kind not in cls._domains:
            raise ArgumentError(f"unknown domain kind: {kind!r}")
        if kind == 'levelset':
            return LevelSetDomain.from_parameters(**params)
        return cls._domains[kind](**params)

    @classmethod
    def get_available_kinds(cls) -> List[str]:
        return list(cls._domains.keys())


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO)

    print("\n" + "=" * 70)
    print("🧪 TESTING GEOMETRY")
    print("=" * 70)

    disk = Disk()
    print(f"\n1️⃣ {disk}: delta*={disk.delta_star}, tol={disk.tol:.2e}")
    print(f"   contains (0,0): {disk.contains([0.0, 0.0]).value}")
    print(f"   distance (0.5,0): {disk.distance_to_boundary([0.5, 0.0])}")
    quad = disk.boundary_quadrature(64)
    print(f"\n2️⃣ boundary measure: {quad.total_measure:.10f} (2*pi = {2 * np.pi:.10f})")
    ellipse = LevelSetDomain.from_parameters(
        [{'powers': [2, 0], 'coef': 1.0}, {'powers': [0, 2], 'coef': 4.0}, {'powers': [0, 0], 'coef': -1.0}],
        center=[0.0, 0.0], half_width=1.5,
    )
    print(f"\n3️⃣ ellipse perimeter: {ellipse.boundary_quadrature(256).total_measure:.6f}")
