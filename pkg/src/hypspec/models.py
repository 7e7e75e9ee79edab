"""Poincare ball and upper half-space models of hyperbolic space.

Points are small immutable dataclasses wrapping numpy arrays. The ball
model carries the conformal factor ``phi(x) = (1 - |x|^2) / 2`` so that the
hyperbolic metric is ``|dx|^2 / phi^2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

NEAR_BOUNDARY = 1e-14
SINGULAR_TOL = 1e-14


class GeometryError(ValueError):
    """Raised for points outside a model or degenerate transforms."""


class NearSingularTransform(GeometryError):
    pass


@dataclass(frozen=True)
class BallPoint:
    coords: np.ndarray
    near_boundary: bool = field(init=False)

    def __post_init__(self):
        x = np.array(self.coords, dtype=float).reshape(-1)
        x.setflags(write=False)
        norm = float(np.linalg.norm(x))
        if not norm < 1.0:
            raise GeometryError(f"point with |x| = {norm!r} is not in the open unit ball")
        object.__setattr__(self, "coords", x)
        object.__setattr__(self, "near_boundary", norm >= 1.0 - NEAR_BOUNDARY)

    @property
    def dim(self) -> int:
        return self.coords.shape[0]


@dataclass(frozen=True)
class HalfSpacePoint:
    x: np.ndarray
    y: float

    def __post_init__(self):
        x = np.array(self.x, dtype=float).reshape(-1)
        x.setflags(write=False)
        if not self.y > 0:
            raise GeometryError(f"height must be positive, got {self.y!r}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", float(self.y))

    def as_array(self) -> np.ndarray:
        return np.append(self.x, self.y)


@dataclass(frozen=True)
class ConformalFactor:
    value: float
    gradient: np.ndarray


def _coords(p) -> np.ndarray:
    return p.coords if isinstance(p, BallPoint) else np.asarray(p, dtype=float)


def phi(x: np.ndarray) -> np.ndarray:
    """Conformal factor (1 - |x|^2)/2, vectorised over the last axis."""
    x = np.asarray(x, dtype=float)
    return 0.5 * (1.0 - np.sum(x * x, axis=-1))


def conformal_factor(p: BallPoint) -> ConformalFactor:
    x = _coords(p)
    grad = -np.array(x, dtype=float)
    return ConformalFactor(value=float(phi(x)), gradient=grad)


def ball_distance(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Vectorised ball-model distance ``arccosh(1 + 2|p-q|^2 / ((1-|p|^2)(1-|q|^2)))``.

    Written with ``arcsinh`` of the half-chord to stay accurate for nearby points.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    d2 = np.sum((p - q) ** 2, axis=-1)
    denom = 4.0 * phi(p) * phi(q)
    # cosh(d) - 1 = 2 sinh^2(d/2)  =>  sinh(d/2) = sqrt(d2 / denom)
    return 2.0 * np.arcsinh(np.sqrt(d2 / denom))


def hyperbolic_distance(p: BallPoint, q: BallPoint) -> float:
    return float(ball_distance(_coords(p), _coords(q)))


def radius_from_origin(x: np.ndarray) -> np.ndarray:
    """Hyperbolic distance from the origin, ``2 artanh |x|``."""
    return 2.0 * np.arctanh(np.linalg.norm(np.asarray(x, dtype=float), axis=-1))


def halfspace_distance(p: HalfSpacePoint, q: HalfSpacePoint) -> float:
    a, b = p.as_array(), q.as_array()
    d2 = float(np.sum((a - b) ** 2))
    return 2.0 * float(np.arcsinh(np.sqrt(d2 / (4.0 * p.y * q.y))))


def _householder(anchor: np.ndarray) -> np.ndarray:
    """Orthogonal symmetric matrix exchanging ``anchor`` and the last basis vector."""
    dim = anchor.shape[0]
    e = np.zeros(dim)
    e[-1] = 1.0
    v = anchor - e
    nv = np.dot(v, v)
    if nv < 1e-30:
        return np.eye(dim)
    return np.eye(dim) - 2.0 * np.outer(v, v) / nv


def _unit_anchor(anchor) -> np.ndarray:
    a = np.asarray(anchor, dtype=float).reshape(-1)
    if abs(np.linalg.norm(a) - 1.0) > 1e-12:
        raise GeometryError("anchor must be a unit vector")
    return a


def ball_to_halfspace(p: BallPoint, anchor) -> HalfSpacePoint:
    """Isometry from the ball to the upper half-space sending ``anchor`` to infinity.

    Inversion in the sphere of radius sqrt(2) about the anchor, followed by a
    reflection that makes the anchor direction vertical. The origin maps to
    ``(0, 1)``.
    """
    a = _unit_anchor(anchor)
    x = _coords(p)
    diff = x - a
    d2 = float(np.dot(diff, diff))
    if d2 < SINGULAR_TOL**2:
        raise NearSingularTransform("point coincides with the anchor; image is at infinity")
    t = a + 2.0 * diff / d2
    z = _householder(a) @ t
    return HalfSpacePoint(z[:-1], -z[-1])


def halfspace_to_ball(q: HalfSpacePoint, anchor) -> BallPoint:
    a = _unit_anchor(anchor)
    z = np.append(q.x, -q.y)
    t = _householder(a) @ z
    diff = t - a
    return BallPoint(a + 2.0 * diff / float(np.dot(diff, diff)))


def boundary_to_halfspace(z, anchor) -> np.ndarray:
    """Image of an ideal boundary point (unit vector) as a point of ``{y = 0}``."""
    a = _unit_anchor(anchor)
    z = np.asarray(z, dtype=float)
    diff = z - a
    d2 = float(np.dot(diff, diff))
    if d2 < SINGULAR_TOL**2:
        raise NearSingularTransform("boundary point coincides with the anchor")
    w = _householder(a) @ (a + 2.0 * diff / d2)
    return np.append(w[:-1], -w[-1])
