"""Analytic moving surfaces and manufactured problem data.

All four supported surfaces are centred axis-aligned quadrics

    phi(x, t) = x_1^2 / a(t) + x_2^2 + ... + x_{m+1}^2 - 1,

with ``a == 1`` for the stationary sphere and circle and
``a(t) = 1 + amplitude * sin(2 pi t)`` for the oscillating ellipsoid and
ellipse. Functions accept a single point of shape ``(d,)`` or a batch of
shape ``(..., d)`` and broadcast accordingly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .exceptions import GeometryError, LiftError
from .kernels import quadric_projection

NODE_TOL = 1e-10


class SurfaceKind(str, Enum):
    SPHERE = "sphere"
    OSCILLATING_ELLIPSOID = "ellipsoid"
    CIRCLE = "circle"
    OSCILLATING_ELLIPSE = "ellipse"


_AMBIENT_DIM = {
    SurfaceKind.SPHERE: 3,
    SurfaceKind.OSCILLATING_ELLIPSOID: 3,
    SurfaceKind.CIRCLE: 2,
    SurfaceKind.OSCILLATING_ELLIPSE: 2,
}


@dataclass(frozen=True)
class LevelSetSurface:
    kind: SurfaceKind
    amplitude: float = 0.25

    def __post_init__(self):
        object.__setattr__(self, "kind", SurfaceKind(self.kind))
        if self.is_moving and not (0.0 <= self.amplitude < 1.0):
            raise ValueError("amplitude must lie in [0, 1)")

    @classmethod
    def from_name(cls, name: str) -> "LevelSetSurface":
        return cls(SurfaceKind(name.lower()))

    @property
    def ambient_dim(self) -> int:
        return _AMBIENT_DIM[self.kind]

    @property
    def dim(self) -> int:
        return self.ambient_dim - 1

    @property
    def is_moving(self) -> bool:
        return self.kind in (SurfaceKind.OSCILLATING_ELLIPSOID, SurfaceKind.OSCILLATING_ELLIPSE)

    @property
    def exact_area(self) -> float | None:
        """Area (length for curves) of the stationary surfaces, else None."""
        if self.kind is SurfaceKind.SPHERE:
            return 4.0 * math.pi
        if self.kind is SurfaceKind.CIRCLE:
            return 2.0 * math.pi
        return None

    def stretch(self, t: float) -> float:
        """a(t), the squared semi-axis along x_1."""
        if not self.is_moving:
            return 1.0
        return 1.0 + self.amplitude * math.sin(2.0 * math.pi * t)

    def stretch_rate(self, t: float) -> float:
        """a'(t)."""
        if not self.is_moving:
            return 0.0
        return 2.0 * math.pi * self.amplitude * math.cos(2.0 * math.pi * t)

    def coefficients(self, t: float) -> np.ndarray:
        q = np.ones(self.ambient_dim)
        q[0] = 1.0 / self.stretch(t)
        return q


def _points(surface: LevelSetSurface, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != surface.ambient_dim:
        raise ValueError(f"expected points in R^{surface.ambient_dim}, got shape {x.shape}")
    return x


def levelset_eval(surface: LevelSetSurface, x, t: float):
    """Value, gradient and Hessian of phi at ``x``."""
    x = _points(surface, x)
    q = surface.coefficients(t)
    value = (x * x) @ q - 1.0
    gradient = 2.0 * q * x
    hessian = np.broadcast_to(np.diag(2.0 * q), x.shape[:-1] + (x.shape[-1],) * 2).copy()
    return value, gradient, hessian


def outward_normal(surface: LevelSetSurface, x, t: float) -> np.ndarray:
    _, grad, _ = levelset_eval(surface, x, t)
    norm = np.linalg.norm(grad, axis=-1, keepdims=True)
    if np.any(norm < 1e-14):
        raise GeometryError("normal undefined: degenerate level-set gradient")
    return grad / norm


def closest_point(surface: LevelSetSurface, x, t: float) -> np.ndarray:
    """Normal projection p of x onto Gamma(t), i.e. x = p + d(x,t) nu(p,t)."""
    x = _points(surface, x)
    flat = x.reshape(-1, x.shape[-1])
    if not surface.is_moving or surface.stretch(t) == 1.0:
        r = np.linalg.norm(flat, axis=1, keepdims=True)
        if np.any(r == 0.0):
            raise LiftError("lift failed: point at the centre of the sphere")
        p = flat / r
    else:
        p, ok = quadric_projection(flat, surface.coefficients(t))
        if not ok or not np.all(np.isfinite(p)):
            raise LiftError("lift failed: closest-point iteration did not converge in 50 steps")
    return p.reshape(x.shape)


def signed_distance(surface: LevelSetSurface, x, t: float):
    x = _points(surface, x)
    p = closest_point(surface, x, t)
    value, _, _ = levelset_eval(surface, x, t)
    return np.sign(value) * np.linalg.norm(x - p, axis=-1)


def material_velocity(surface: LevelSetSurface, x, t: float) -> np.ndarray:
    x = _points(surface, x)
    v = np.zeros_like(x)
    if surface.is_moving:
        v[..., 0] = surface.stretch_rate(t) / (2.0 * surface.stretch(t)) * x[..., 0]
    return v


def velocity_jacobian(surface: LevelSetSurface, t: float) -> np.ndarray:
    """Dv, constant in space for every supported surface."""
    Dv = np.zeros((surface.ambient_dim,) * 2)
    if surface.is_moving:
        Dv[0, 0] = surface.stretch_rate(t) / (2.0 * surface.stretch(t))
    return Dv


def flow_map(surface: LevelSetSurface, x0, t: float) -> np.ndarray:
    """Exact material trajectory starting from x0 on Gamma(0)."""
    x0 = _points(surface, x0)
    value, _, _ = levelset_eval(surface, x0, 0.0)
    if np.any(np.abs(value) > NODE_TOL):
        raise GeometryError("node off surface: flow map needs x0 on Gamma(0)")
    x = np.array(x0, dtype=np.float64, copy=True)
    if surface.is_moving:
        x[..., 0] *= math.sqrt(surface.stretch(t) / surface.stretch(0.0))
    return x


def mean_curvature(surface: LevelSetSurface, x, t: float):
    """H = div(nu) = (tr D^2 phi - nu^T D^2 phi nu) / |grad phi|, summed curvatures."""
    _, grad, hess = levelset_eval(surface, x, t)
    gnorm = np.linalg.norm(grad, axis=-1)
    nu = grad / gnorm[..., None]
    trace = np.trace(hess, axis1=-2, axis2=-1)
    nhn = np.einsum("...i,...ij,...j->...", nu, hess, nu)
    return (trace - nhn) / gnorm


@dataclass(frozen=True)
class ManufacturedProblem:
    """u(x, t) = amplitude * exp(-decay t) * x_1 x_2 on a moving surface.

    ``amplitude=0`` gives the zero solution with zero forcing.
    """

    surface: LevelSetSurface
    end_time: float = 1.0
    decay: float = 6.0
    amplitude: float = 1.0

    def _scale(self, t: float) -> float:
        return self.amplitude * math.exp(-self.decay * t)

    def exact_u(self, x, t: float):
        x = np.asarray(x, dtype=np.float64)
        return self._scale(t) * x[..., 0] * x[..., 1]

    def gradient(self, x, t: float) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        g = np.zeros_like(x)
        c = self._scale(t)
        g[..., 0] = c * x[..., 1]
        g[..., 1] = c * x[..., 0]
        return g

    def hessian(self, x, t: float) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        d = x.shape[-1]
        H = np.zeros(x.shape[:-1] + (d, d))
        c = self._scale(t)
        H[..., 0, 1] = c
        H[..., 1, 0] = c
        return H

    def time_derivative(self, x, t: float):
        return -self.decay * self.exact_u(x, t)


def exact_solution_eval(problem: ManufacturedProblem, x, t: float):
    """u and its tangential gradient (I - nu nu^T) grad u at x."""
    nu = outward_normal(problem.surface, x, t)
    g = problem.gradient(x, t)
    sg = g - np.sum(g * nu, axis=-1, keepdims=True) * nu
    return problem.exact_u(x, t), sg


def manufactured_forcing(problem: ManufacturedProblem, x, t: float):
    """f = d*u + u div_Gamma v - Laplace_Gamma u, from ambient derivatives."""
    surface = problem.surface
    x = _points(surface, x)
    nu = outward_normal(surface, x, t)
    grad_u = problem.gradient(x, t)
    hess_u = problem.hessian(x, t)
    u = problem.exact_u(x, t)

    material = problem.time_derivative(x, t) + np.sum(material_velocity(surface, x, t) * grad_u, axis=-1)
    Dv = velocity_jacobian(surface, t)
    div_v = np.trace(Dv) - np.einsum("...i,ij,...j->...", nu, Dv, nu)
    H = mean_curvature(surface, x, t)
    lap = (
        np.trace(hess_u, axis1=-2, axis2=-1)
        - np.einsum("...i,...ij,...j->...", nu, hess_u, nu)
        - H * np.sum(nu * grad_u, axis=-1)
    )
    return material + u * div_v - lap
