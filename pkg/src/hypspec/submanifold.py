"""Immersed patches in the Poincare ball and their extrinsic curvature.

Conventions
-----------
* The mean curvature vector is the unnormalised trace ``H = sum_i II(e_i, e_i)``.
* Curvature is computed twice, independently: once for the Euclidean metric
  of the ball and once for the hyperbolic metric ``|dx|^2 / phi^2`` through its
  Levi-Civita connection. The two results are tied together by the conformal
  relation ``H_euc = (H_hyp - m * dphi(nu)) / phi`` which is evaluated as a
  consistency residual.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.stats import qmc

from .models import BallPoint, ball_distance, phi

BOUNDARY_CUTOFF = 1.0 - 1e-9
MAX_GRAM_CONDITION = 1e12
HESSIAN_STEP_FACTOR = 100.0


class DegenerateImmersion(ValueError):
    pass


@dataclass(frozen=True)
class ImmersedPatch:
    """A chart ``u -> x`` from a parameter disk ``|u| < u_max`` into the ball.

    ``jacobian`` returns shape ``(..., n+1, m)`` and ``hessian`` shape
    ``(..., n+1, m, m)``. Either may be ``None``, in which case central
    differences with one Richardson step are used.
    """

    m: int
    ambient: int
    chart: Callable[[np.ndarray], np.ndarray]
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    hessian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    u_max: float = 1.0
    fd_step: float = 1e-5
    smoothness: str = "C2"
    name: str = "patch"

    def __post_init__(self):
        if self.m < 1 or self.ambient <= self.m:
            raise ValueError("need 1 <= m < ambient dimension")

    def __call__(self, u):
        return self.chart(np.asarray(u, dtype=float))

    def jac(self, u: np.ndarray) -> np.ndarray:
        u = np.atleast_2d(np.asarray(u, dtype=float))
        if self.jacobian is not None:
            return self.jacobian(u)
        return _richardson(lambda h: _fd_jacobian(self.chart, u, h), self.fd_step)

    def hess(self, u: np.ndarray) -> np.ndarray:
        u = np.atleast_2d(np.asarray(u, dtype=float))
        if self.hessian is not None:
            return self.hessian(u)
        # second differences lose ~eps/h^2; a wider step keeps roundoff near 1e-10
        return _richardson(lambda h: _fd_hessian(self.chart, u, h), HESSIAN_STEP_FACTOR * self.fd_step)

    @property
    def analytic(self) -> bool:
        return self.jacobian is not None and self.hessian is not None


def _richardson(D, h):
    return (4.0 * D(h / 2) - D(h)) / 3.0


def _fd_jacobian(chart, u, h):
    m = u.shape[-1]
    cols = []
    for k in range(m):
        e = np.zeros(m)
        e[k] = h
        cols.append((chart(u + e) - chart(u - e)) / (2 * h))
    return np.stack(cols, axis=-1)


def _fd_hessian(chart, u, h):
    m = u.shape[-1]
    x0 = chart(u)
    out = np.empty(x0.shape + (m, m))
    for k in range(m):
        ek = np.zeros(m)
        ek[k] = h
        out[..., k, k] = (chart(u + ek) - 2 * x0 + chart(u - ek)) / h**2
        for l in range(k + 1, m):
            el = np.zeros(m)
            el[l] = h
            v = (chart(u + ek + el) - chart(u + ek - el) - chart(u - ek + el) + chart(u - ek - el)) / (4 * h * h)
            out[..., k, l] = v
            out[..., l, k] = v
    return out


@dataclass
class FrameData:
    points: np.ndarray  # (N, n+1)
    tangent: np.ndarray  # (N, n+1, m), Euclidean-orthonormal
    normal: np.ndarray  # (N, n+1, n+1-m), Euclidean-orthonormal
    coframe: np.ndarray  # (N, m, m), tangent = J @ coframe
    metric: str = "euclidean"

    def scaled(self) -> "FrameData":
        """Hyperbolic-orthonormal frames ``e = phi * e_bar``."""
        f = phi(self.points)[:, None, None]
        return FrameData(self.points, self.tangent * f, self.normal * f, self.coframe * f, "hyperbolic")


def frames(patch: ImmersedPatch, U: np.ndarray, normal_rotation: Optional[np.ndarray] = None) -> FrameData:
    U = np.atleast_2d(np.asarray(U, dtype=float))
    X = patch(U)
    J = patch.jac(U)
    G = np.einsum("ndi,ndj->nij", J, J)
    cond = np.linalg.cond(G)
    if np.any(~np.isfinite(cond)) or np.any(cond > MAX_GRAM_CONDITION):
        bad = int(np.argmax(np.where(np.isfinite(cond), cond, np.inf)))
        raise DegenerateImmersion(f"rank-deficient chart Jacobian at parameter {U[bad]}")
    Q, _ = np.linalg.qr(J, mode="complete")
    m = patch.m
    Qr, R = np.linalg.qr(J)
    tangent = Qr
    coframe = np.linalg.inv(R)
    normal = Q[..., m:]
    if normal_rotation is not None:
        normal = normal @ normal_rotation
    return FrameData(X, tangent, normal, coframe)


@dataclass
class CurvatureReport:
    points: np.ndarray
    H_euclidean: np.ndarray  # (N, n+1-m) components in the Euclidean normal frame
    H_hyperbolic: np.ndarray  # (N, n+1-m) components in the hyperbolic normal frame
    norm_euclidean: np.ndarray
    norm_hyperbolic: np.ndarray
    conformal_residual: np.ndarray
    literal_residual: np.ndarray
    tolerance: float
    violations: int = field(init=False)

    def __post_init__(self):
        self.violations = int(np.sum(self.conformal_residual > self.tolerance))


def second_fundamental_form(
    patch: ImmersedPatch,
    U: np.ndarray,
    metric: str = "euclidean",
    normal_rotation: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Components ``II[n, alpha, i, j]`` in the orthonormal frames of ``metric``.

    The Euclidean form is the normal projection of second chart derivatives.
    The hyperbolic form adds the Christoffel term of ``g = exp(2w) delta``,
    ``w = -log(phi)``, i.e. ``Gamma(V, W) = V(w) W + W(w) V - <V, W> grad w``
    with ``grad w = x / phi``; it is assembled premultiplied by ``phi`` so
    nothing of size ``1/phi`` is ever formed.
    """
    U = np.atleast_2d(np.asarray(U, dtype=float))
    fr = frames(patch, U, normal_rotation)
    Hs = patch.hess(U)
    J = patch.jac(U)
    A = fr.coframe
    if metric == "euclidean":
        B = np.einsum("ndkl,nda->nakl", Hs, fr.normal)
    elif metric == "hyperbolic":
        x = fr.points
        f = phi(x)
        Jx = np.einsum("ndk,nd->nk", J, x)
        gram = np.einsum("ndk,ndl->nkl", J, J)
        # phi * (X_kl + Gamma(X_k, X_l)) projected on the Euclidean normal nu
        acc = f[:, None, None, None] * Hs
        acc = acc + Jx[:, None, :, None] * J[:, :, None, :] + Jx[:, None, None, :] * J[:, :, :, None]
        acc = acc - gram[:, None, :, :] * x[:, :, None, None]
        B = np.einsum("ndkl,nda->nakl", acc, fr.normal)
        # hyperbolic unit normal is phi*nu and unit tangents are phi*e_bar; the
        # phi factors combine to the single phi already folded into acc
    else:
        raise ValueError(f"unknown metric {metric!r}")
    return np.einsum("nki,nakl,nlj->naij", A, B, A)


def mean_curvature(
    patch: ImmersedPatch,
    U: np.ndarray,
    tolerance: Optional[float] = None,
    normal_rotation: Optional[np.ndarray] = None,
) -> CurvatureReport:
    U = np.atleast_2d(np.asarray(U, dtype=float))
    if tolerance is None:
        tolerance = 1e-6 if patch.analytic else 1e-3
    II_e = second_fundamental_form(patch, U, "euclidean", normal_rotation)
    II_h = second_fundamental_form(patch, U, "hyperbolic", normal_rotation)
    H_e = np.trace(II_e, axis1=2, axis2=3)
    H_h = np.trace(II_h, axis1=2, axis2=3)
    fr = frames(patch, U, normal_rotation)
    x = fr.points
    f = phi(x)
    dphi_nu = -np.einsum("nd,nda->na", x, fr.normal)  # e_bar_alpha(phi), grad phi = -x
    m = patch.m
    predicted = (H_h - m * dphi_nu) / f[:, None]
    conformal = np.max(np.abs(H_e - predicted), axis=1)
    literal = np.max(np.abs(H_e - (H_h / f[:, None] - m * dphi_nu)), axis=1)
    return CurvatureReport(
        points=x,
        H_euclidean=H_e,
        H_hyperbolic=H_h,
        norm_euclidean=np.linalg.norm(H_e, axis=1),
        norm_hyperbolic=np.linalg.norm(H_h, axis=1),
        conformal_residual=conformal,
        literal_residual=literal,
        tolerance=tolerance,
    )


def orthogonality_defect(patch: ImmersedPatch, U: np.ndarray) -> np.ndarray:
    """Length of the Euclidean normal component of ``grad phi = -x``."""
    fr = frames(patch, U)
    return np.linalg.norm(np.einsum("nd,nda->na", fr.points, fr.normal), axis=1)


# -- sampling -----------------------------------------------------------------


def directions(m: int, count: int, seed: int = 0) -> np.ndarray:
    if m == 1:
        return np.array([[1.0], [-1.0]])
    if m == 2:
        t = 2 * np.pi * np.arange(count) / count
        return np.stack([np.cos(t), np.sin(t)], axis=1)
    z = qmc.Sobol(m, seed=seed).random(count)
    v = np.sqrt(2) * _erfinv(2 * z - 1)
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _erfinv(y):
    from scipy.special import erfinv

    return erfinv(np.clip(y, -1 + 1e-12, 1 - 1e-12))


def ray_parameters(
    patch: ImmersedPatch,
    dirs: np.ndarray,
    levels: np.ndarray,
    iterations: int = 80,
) -> np.ndarray:
    """Parameter points where each ray ``rho * d`` reaches hyperbolic radius ``level``.

    Vectorised bisection; assumes the distance to the origin increases along
    rays from ``u = 0`` (true for every built-in patch). Returns an array of
    shape ``(len(levels), len(dirs), m)``; entries whose level is not reached
    before ``u_max`` are NaN.
    """
    dirs = np.atleast_2d(dirs)
    levels = np.asarray(levels, dtype=float)
    target = np.tanh(levels / 2.0)[:, None] * np.ones(len(dirs))[None, :]
    lo = np.zeros_like(target)
    hi = np.full_like(target, patch.u_max)

    def norm_at(rho):
        u = rho[..., None] * dirs[None, :, :]
        return np.linalg.norm(patch(u.reshape(-1, patch.m)), axis=-1).reshape(rho.shape)

    hi_norm = norm_at(hi * (1 - 1e-15))
    reachable = hi_norm >= target
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        inside = norm_at(mid) < target
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    rho = 0.5 * (lo + hi)
    rho = np.where(reachable, rho, np.nan)
    return rho[..., None] * dirs[None, :, :]


def boundary_levels(cutoff: float = BOUNDARY_CUTOFF) -> float:
    return float(2.0 * np.arctanh(cutoff))


@dataclass(frozen=True)
class Sampler:
    """Ray-by-level sampling of a patch, uniform in hyperbolic radius."""

    n_directions: int = 64
    dr: float = 0.05
    r_min: float = 0.0
    cutoff: float = BOUNDARY_CUTOFF

    def levels(self) -> np.ndarray:
        r_max = boundary_levels(self.cutoff)
        n = int(np.ceil((r_max - self.r_min) / self.dr)) + 1
        return np.linspace(self.r_min, r_max, n)

    def parameters(self, patch: ImmersedPatch) -> np.ndarray:
        U = ray_parameters(patch, directions(patch.m, self.n_directions), self.levels())
        U = U.reshape(-1, patch.m)
        return U[np.all(np.isfinite(U), axis=1)]


@dataclass
class EpsilonReport:
    r: float
    value: float
    samples_outside: int
    resolution: Sampler


def epsilon_r(
    patches: list,
    p: BallPoint | np.ndarray,
    r: float,
    sampler: Sampler = Sampler(),
    cache: Optional[dict] = None,
) -> EpsilonReport:
    """Sampled ``sup |H_hyp|`` over the part of the patches outside ``B_r(p)``.

    The sampled supremum never exceeds the true one; ``+inf`` when no sample
    lies outside the ball.
    """
    if not patches:
        raise ValueError("empty patch set")
    pc = p.coords if isinstance(p, BallPoint) else np.asarray(p, dtype=float)
    best = -np.inf
    count = 0
    for patch in patches:
        key = (id(patch), sampler)
        if cache is not None and key in cache:
            X, Hn = cache[key]
        else:
            U = sampler.parameters(patch)
            rep = mean_curvature(patch, U)
            X, Hn = rep.points, rep.norm_hyperbolic
            if cache is not None:
                cache[key] = (X, Hn)
        sel = ball_distance(X, pc[None, :]) >= r
        count += int(sel.sum())
        if sel.any():
            best = max(best, float(Hn[sel].max()))
    value = np.inf if count == 0 else best
    return EpsilonReport(r=r, value=value, samples_outside=count, resolution=sampler)


# -- patch library ------------------------------------------------------------


def _orthonormal(ambient: int, k: int, first: Optional[np.ndarray] = None) -> np.ndarray:
    if first is None:
        return np.eye(ambient)[:, :k]
    M = np.column_stack([first, np.eye(ambient)])
    Q, _ = np.linalg.qr(M)
    Q[:, 0] *= np.sign(Q[:, 0] @ first)
    return Q[:, :k]


def totally_geodesic_disk(m: int = 2, ambient: int = 3, basis: Optional[np.ndarray] = None) -> ImmersedPatch:
    """The flat m-disk through the origin spanned by ``basis`` columns."""
    B = np.eye(ambient)[:, :m] if basis is None else np.linalg.qr(np.asarray(basis, float))[0][:, :m]

    def chart(u):
        return u @ B.T

    def jac(u):
        return np.broadcast_to(B, u.shape[:-1] + B.shape).copy()

    def hess(u):
        return np.zeros(u.shape[:-1] + (ambient, m, m))

    return ImmersedPatch(m, ambient, chart, jac, hess, u_max=1.0, name=f"geodesic-h{m}")


def sphere_cap(theta: float, radius: float = 1.5, axis: Optional[np.ndarray] = None, ambient: int = 3) -> ImmersedPatch:
    """Euclidean sphere meeting the unit sphere at angle ``theta``.

    ``theta`` is the angle between the two spheres' normals along their
    intersection, so ``theta = pi/2`` is the totally geodesic case and the
    hyperbolic principal curvatures are all ``cos(theta)``. The chart is the
    graph of the near hemisphere over its equatorial plane.
    """
    if radius <= np.cos(theta):
        raise ValueError("radius must exceed cos(theta) for the cap to be a graph")
    m = ambient - 1
    w = np.eye(ambient)[:, -1] if axis is None else np.asarray(axis, float) / np.linalg.norm(axis)
    E = _orthonormal(ambient, ambient, w)[:, 1:]
    dist = np.sqrt(1.0 + radius**2 - 2.0 * radius * np.cos(theta))
    c = dist * w
    s_b = (radius - np.cos(theta)) / dist
    u_max = np.sqrt(1.0 - s_b**2)

    def chart(u):
        s = np.sqrt(1.0 - np.sum(u * u, axis=-1))
        return c - radius * s[..., None] * w + radius * (u @ E.T)

    def jac(u):
        s = np.sqrt(1.0 - np.sum(u * u, axis=-1))
        return radius * (w[:, None] * (u / s[..., None])[..., None, :] + E)

    def hess(u):
        s = np.sqrt(1.0 - np.sum(u * u, axis=-1))[..., None, None]
        eye = np.eye(m)
        q = radius * (eye / s + u[..., :, None] * u[..., None, :] / s**3)
        return w[:, None, None] * q[..., None, :, :]

    return ImmersedPatch(m, ambient, chart, jac, hess, u_max=float(u_max), name=f"cap-{theta:.4f}")


def graph_patch(
    height: Callable[[np.ndarray], np.ndarray],
    m: int = 2,
    ambient: int = 3,
    height_grad: Optional[Callable] = None,
    height_hess: Optional[Callable] = None,
    fd_step: float = 1e-5,
    name: str = "graph",
) -> ImmersedPatch:
    """``u -> (u, h(u))`` over the flat disk; ``h`` maps ``(..., m) -> (..., ambient - m)``."""
    k = ambient - m

    def chart(u):
        return np.concatenate([u, np.reshape(height(u), u.shape[:-1] + (k,))], axis=-1)

    def graph_jac(u):
        top = np.broadcast_to(np.eye(m), u.shape[:-1] + (m, m))
        return np.concatenate([top, height_grad(u)], axis=-2)

    def graph_hess(u):
        return np.concatenate([np.zeros(u.shape[:-1] + (m, m, m)), height_hess(u)], axis=-3)

    jac = graph_jac if height_grad is not None else None
    hess = graph_hess if height_hess is not None else None
    return ImmersedPatch(m, ambient, chart, jac, hess, u_max=1.0, fd_step=fd_step, name=name)


def _bump_graph(a: float, weight: str, ambient: int, m: int = 2) -> ImmersedPatch:
    """Height ``a * w(u) * (1 - |u|^2)^2``; vanishes to second order on the unit sphere."""

    def parts(u):
        s = 1.0 - np.sum(u * u, axis=-1)
        if weight == "one":
            w = np.ones_like(s)
            dw = np.zeros_like(u)
        elif weight == "u1":
            w = u[..., 0]
            dw = np.zeros_like(u)
            dw[..., 0] = 1.0
        else:
            raise ValueError(weight)
        return s, w, dw

    def h(u):
        s, w, _ = parts(u)
        return (a * w * s**2)[..., None]

    def grad(u):
        s, w, dw = parts(u)
        g = a * (dw * s[..., None] ** 2 - 4.0 * w[..., None] * s[..., None] * u)
        return g[..., None, :]

    def hess(u):
        s, w, dw = parts(u)
        eye = np.eye(m)
        s_ = s[..., None, None]
        w_ = w[..., None, None]
        uu = u[..., :, None] * u[..., None, :]
        cross = dw[..., :, None] * u[..., None, :] + u[..., :, None] * dw[..., None, :]
        Hm = a * (-4.0 * s_ * cross + w_ * (8.0 * uu - 4.0 * s_ * eye))
        return Hm[..., None, :, :]

    return graph_patch(h, m, ambient, grad, hess, name=f"graph-{weight}-{a}")


def graph_examples() -> list:
    """Three C^2-up-to-boundary graphs over the geodesic disk (two in B^3, one in B^4)."""
    g1 = _bump_graph(0.3, "one", 3)
    g2 = _bump_graph(0.5, "u1", 3)

    def h3(u):
        s = 1.0 - np.sum(u * u, axis=-1)
        return np.stack([0.2 * s**2, 0.25 * u[..., 1] * s**2 + 0.1 * s**3], axis=-1)

    g3 = graph_patch(h3, 2, 4, name="graph-b4")
    return [g1, g2, g3]


BUILTIN_PATCHES = {
    "geodesic-h2": lambda: totally_geodesic_disk(2, 3),
    "geodesic-h2-b4": lambda: totally_geodesic_disk(2, 4, basis=[[1, 0], [1, 1], [0, 1], [0, 0]]),
    "geodesic-h3-b5": lambda: totally_geodesic_disk(3, 5),
    "cap-90": lambda: sphere_cap(np.pi / 2),
    "cap-60": lambda: sphere_cap(np.pi / 3),
    "cap-57": lambda: sphere_cap(1.0, radius=2.0),
    "graph-one": lambda: graph_examples()[0],
    "graph-u1": lambda: graph_examples()[1],
    "graph-b4": lambda: graph_examples()[2],
}


def builtin_patch(name: str) -> ImmersedPatch:
    try:
        return BUILTIN_PATCHES[name]()
    except KeyError:
        raise ValueError(f"unknown geometry {name!r}; choose from {', '.join(BUILTIN_PATCHES)}") from None
