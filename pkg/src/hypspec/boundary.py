"""Ideal-boundary diagnostics in half-space coordinates.

Points of the half-space are arrays ``(x_1, ..., x_n, y)`` with ``y > 0``; the
ideal boundary is ``{y = 0}``, identified with R^n. Boundary curves live in
R^n; surfaces reaching the boundary are given either by a chart on a
parameter box or by a point cloud.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.spatial import cKDTree

ANGLE_TOL_DEG = 1.0
VOTE_SCALES = 3
MIN_SHELL_SAMPLES = 10


class ResolutionWarning(UserWarning):
    pass


class ResolutionError(RuntimeError):
    pass


class PreconditionError(ValueError):
    pass


# -- boundary curves ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BoundaryCurve:
    """Curve in R^n given by a chart ``t -> (N, n)`` with derivative.

    Samples are spaced by at most ``resolution`` in arclength.
    """

    chart: Callable
    dchart: Callable
    t_range: tuple
    closed: bool = False
    resolution: float = 1e-3
    name: str = "curve"
    params: np.ndarray = field(init=False, repr=False)
    samples: np.ndarray = field(init=False, repr=False)
    tangents: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        a, b = self.t_range
        probe = np.linspace(a, b, 2001)
        speed = np.linalg.norm(self.dchart(probe), axis=1)
        length = np.trapezoid(speed, probe)
        n = int(np.ceil(1.05 * length / self.resolution)) + 1
        # equalise arclength spacing using the cumulative length on the probe
        cum = np.concatenate([[0], np.cumsum(0.5 * (speed[1:] + speed[:-1]) * np.diff(probe))])
        params = np.interp(np.linspace(0, cum[-1], n), cum, probe)
        if self.closed:
            params = params[:-1]
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "samples", self.chart(params))
        object.__setattr__(self, "tangents", self.unit_tangent(params))
        object.__setattr__(self, "_tree", cKDTree(self.samples))

    @property
    def n(self) -> int:
        return self.samples.shape[1]

    @property
    def spacing(self) -> float:
        return float(np.max(np.linalg.norm(np.diff(self.samples, axis=0), axis=1)))

    def unit_tangent(self, t) -> np.ndarray:
        d = self.dchart(np.atleast_1d(t))
        return d / np.linalg.norm(d, axis=1, keepdims=True)

    def _wrap(self, t):
        if not self.closed:
            return np.clip(t, *self.t_range)
        a, b = self.t_range
        return a + np.mod(t - a, b - a)

    def nearest(self, q) -> tuple:
        """Closest point parameter and distance from ``q`` to the curve.

        Nearest-sample search, then bounded 1-D minimisation on the
        neighbouring parameter bracket, then Gauss-Newton polishing.
        """
        q = np.asarray(q, dtype=float)
        _, i = self._tree.query(q)
        h = max(np.abs(np.diff(self.params[max(i - 1, 0) : i + 2])).max(initial=0.0), 1e-12)

        def dist(t):
            return float(np.linalg.norm(self.chart(self._wrap(np.array([t])))[0] - q))

        lo, hi = self.params[i] - 1.5 * h, self.params[i] + 1.5 * h
        if not self.closed:
            lo, hi = max(lo, self.t_range[0]), min(hi, self.t_range[1])
        res = minimize_scalar(dist, bounds=(lo, hi), method="bounded", options={"xatol": 1e-14})
        best_t, best_d = float(res.x), float(res.fun)
        if dist(self.params[i]) < best_d:
            best_t, best_d = float(self.params[i]), dist(self.params[i])
        t = best_t
        for _ in range(6):
            g = self.dchart(self._wrap(np.array([t])))[0]
            step = float(np.dot(q - self.chart(self._wrap(np.array([t])))[0], g) / np.dot(g, g))
            t = float(self._wrap(np.array([t + step]))[0])
            d = dist(t)
            if d < best_d:
                best_t, best_d = t, d
        return best_t, best_d

    def distance(self, q) -> float:
        return self.nearest(q)[1]

    def coarse_distance(self, Q) -> np.ndarray:
        """Vectorised nearest-sample distances (upper bounds within one spacing)."""
        return self._tree.query(np.atleast_2d(Q))[0]

    def tangent_at(self, p) -> np.ndarray:
        t, _ = self.nearest(p)
        return self.unit_tangent(t)[0]

    def normal_sphere(self, p, count: int = 360, tangent=None) -> np.ndarray:
        """Unit normals at ``p``: exact pair for n = 2, a circle grid for n = 3,
        quasi-random otherwise."""
        tau = self.tangent_at(p) if tangent is None else tangent
        basis = np.linalg.svd(np.eye(self.n) - np.outer(tau, tau))[0][:, : self.n - 1]
        if self.n == 2:
            return np.array([basis[:, 0], -basis[:, 0]])
        if self.n == 3:
            a = np.linspace(0, 2 * np.pi, count, endpoint=False)
            return np.cos(a)[:, None] * basis[:, 0] + np.sin(a)[:, None] * basis[:, 1]
        z = np.random.default_rng(0).normal(size=(count, self.n - 1))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        return z @ basis.T


def line(n: int = 2, direction=None, half_length: float = 10.0, resolution: float = 1e-2) -> BoundaryCurve:
    d = np.zeros(n)
    d[0] = 1.0
    if direction is not None:
        d = np.asarray(direction, dtype=float)
        d /= np.linalg.norm(d)
    return BoundaryCurve(
        lambda t: np.outer(t, d),
        lambda t: np.outer(np.ones_like(t), d),
        (-half_length, half_length),
        resolution=resolution,
        name="line",
    )


def circle(radius: float = 1.0, n: int = 2, resolution: float = 1e-3) -> BoundaryCurve:
    def chart(t):
        out = np.zeros((len(t), n))
        out[:, 0], out[:, 1] = radius * np.cos(t), radius * np.sin(t)
        return out

    def dchart(t):
        out = np.zeros((len(t), n))
        out[:, 0], out[:, 1] = -radius * np.sin(t), radius * np.cos(t)
        return out

    return BoundaryCurve(chart, dchart, (0.0, 2 * np.pi), closed=True, resolution=resolution, name="circle")


def three_halves_graph(half_length: float = 1.0, resolution: float = 1e-3) -> BoundaryCurve:
    """``t -> (t, |t|^{3/2})``: C^1 but not C^2 at the origin."""
    return BoundaryCurve(
        lambda t: np.stack([t, np.abs(t) ** 1.5], axis=1),
        lambda t: np.stack([np.ones_like(t), 1.5 * np.sign(t) * np.sqrt(np.abs(t))], axis=1),
        (-half_length, half_length),
        resolution=resolution,
        name="three_halves",
    )


BUILTIN_CURVES = {"line": line, "circle": circle, "three_halves": three_halves_graph}


# -- distance ratio and the set W --------------------------------------------


@dataclass
class DeltaRatio:
    r: float
    value: float
    minimiser: np.ndarray
    warning: Optional[str] = None


def delta_ratio(gamma: BoundaryCurve, p, r: float, normals: int = 360) -> DeltaRatio:
    """``inf_nu dist(p + r nu, gamma) / r`` over unit normals ``nu`` at ``p``."""
    if not r > 0:
        raise ValueError("r must be positive")
    p = np.asarray(p, dtype=float)
    if gamma.distance(p) > 1e-9:
        raise PreconditionError("p does not lie on the curve")
    msg = None
    if gamma.spacing > r:
        msg = f"sample spacing {gamma.spacing:.2e} exceeds r = {r:.2e}; relying on local refinement"
        warnings.warn(msg, ResolutionWarning, stacklevel=2)
    nus = gamma.normal_sphere(p, normals)
    dists = np.array([gamma.distance(p + r * nu) for nu in nus])
    k = int(np.argmin(dists))
    return DeltaRatio(r, min(float(dists[k]) / r, 1.0), nus[k], msg)


def delta_ratio_min(gamma: BoundaryCurve, r: float, points: int = 48, normals: int = 36) -> float:
    """Sampled ``min_p delta(p, r) / r`` over evenly spaced curve points.

    Uses nearest-sample distances, which overestimate by at most the sample
    spacing; callers keep ``r`` well above it.
    """
    idx = np.linspace(0, len(gamma.samples) - 1, points).astype(int)
    vals = []
    for i in idx:
        p = gamma.samples[i]
        nus = gamma.normal_sphere(p, normals, gamma.tangents[i])
        vals.append(np.min(gamma.coarse_distance(p + r * nus)) / r)
    return float(min(min(vals), 1.0))


def select_rho_gamma(gamma: BoundaryCurve, threshold: float = 0.5, margin: float = 0.1, r_max: float = 10.0) -> float:
    """Half of the largest r at which the sampled min of ``delta/r`` still
    exceeds ``threshold * (1 + margin)``; sweep then bisection."""
    target = threshold * (1 + margin)
    grid = np.geomspace(20 * gamma.spacing, r_max, 40)
    ok = [delta_ratio_min(gamma, r) > target for r in grid]
    if not ok[0]:
        raise ResolutionError("delta ratio below threshold at the finest resolvable r")
    if all(ok):
        return r_max / 2
    j = ok.index(False)
    lo, hi = grid[j - 1], grid[j]
    for _ in range(30):
        mid = np.sqrt(lo * hi)
        lo, hi = (mid, hi) if delta_ratio_min(gamma, mid) > target else (lo, mid)
    return float(lo / 2)


def membership_W(gamma: BoundaryCurve, q, rho_gamma: float, grid: int = 41) -> bool:
    """Slab test plus exclusion by the balls ``B_{min(2 rho, d(c))}(c, 0)``.

    Centres ``c`` run over a square grid of half-width ``2 rho`` around the
    horizontal position of ``q`` together with that position itself.
    """
    q = np.asarray(q, dtype=float)
    x, y = q[:-1], q[-1]
    if not (0 < y < rho_gamma):
        return False
    n = len(x)
    axes = [np.linspace(-2 * rho_gamma, 2 * rho_gamma, grid)] * n
    offsets = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    centres = np.vstack([x[None, :], x + offsets])
    dist_sq = np.sum((centres - x) ** 2, axis=1) + y * y
    # nearest-sample distances only overestimate, so they pick out candidates;
    # candidate balls are then re-tested with the refined distance
    radius = np.minimum(2 * rho_gamma, gamma.coarse_distance(centres))
    for i in np.flatnonzero(dist_sq < radius**2 * (1 - 1e-12)):
        r = min(2 * rho_gamma, gamma.distance(centres[i]))
        if dist_sq[i] < r * r * (1 - 1e-12):
            return False
    return True


def c01_ratio_profile(points, gamma: BoundaryCurve, rho_gamma: Optional[float] = None, check_W: bool = True):
    """Sequence ``(y_i, d(x_i)/y_i)`` ordered by decreasing height and a trend flag.

    The flag is true when the median of the last quartile is below the
    median of the first.
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    P = P[np.argsort(-P[:, -1])]
    if check_W:
        if rho_gamma is None:
            raise ValueError("rho_gamma is required for the W precondition")
        for p in P:
            if not membership_W(gamma, p, rho_gamma):
                raise PreconditionError(f"point {p.tolist()} lies outside W")
    y = P[:, -1]
    ratio = np.array([gamma.distance(p[:-1]) for p in P]) / y
    q = max(1, len(y) // 4)
    trend = bool(np.median(ratio[-q:]) < np.median(ratio[:q])) if np.any(ratio > 0) else True
    return list(zip(y.tolist(), ratio.tolist())), trend


# -- surfaces in half-space coordinates --------------------------------------


@dataclass(frozen=True, eq=False)
class HalfSpaceSurface:
    """Surface given by a chart on a parameter box, or by a fixed point cloud."""

    name: str
    m: int
    chart: Optional[Callable] = None
    lo: Optional[np.ndarray] = None
    hi: Optional[np.ndarray] = None
    points: Optional[np.ndarray] = None
    # parameter box half-width per unit of Euclidean radius when zooming in
    zoom: float = 2.0

    def sample(self, count: int = 200) -> np.ndarray:
        if self.points is not None:
            return self.points
        axes = [np.linspace(a, b, count) for a, b in zip(self.lo, self.hi)]
        U = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.m)
        return self.chart(U)

    def near(self, base, s: float, grid: int = 61, inner: float = 0.5) -> np.ndarray:
        """Samples at Euclidean distance in ``[inner * s, s]`` from ``base``."""
        base = np.asarray(base, dtype=float)
        if self.points is not None:
            P = self.points
        else:
            coarse = self.sample(101)
            k = int(np.argmin(np.linalg.norm(coarse - base, axis=1)))
            axes = [np.linspace(a, b, 101) for a, b in zip(self.lo, self.hi)]
            idx = np.unravel_index(k, [101] * self.m)
            u0 = np.array([axes[j][idx[j]] for j in range(self.m)])
            u0 = self._refine_base(u0, base)
            w = self.zoom * s
            axes = [np.linspace(max(c - w, a), min(c + w, b), grid) for c, a, b in zip(u0, self.lo, self.hi)]
            U = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.m)
            P = self.chart(U)
        d = np.linalg.norm(P - base, axis=1)
        return P[(d >= inner * s) & (d <= s) & (d > 0)]

    def _refine_base(self, u0, base):
        from scipy.optimize import minimize

        res = minimize(
            lambda u: float(np.sum((self.chart(u[None, :])[0] - base) ** 2)),
            u0,
            bounds=list(zip(self.lo, self.hi)),
            method="L-BFGS-B",
            options={"ftol": 1e-30, "gtol": 1e-16},
        )
        return res.x


def hemisphere(radius: float = 1.0, centre=(0.0, 0.0)) -> HalfSpaceSurface:
    """Totally geodesic plane over the circle of given radius."""
    c = np.asarray(centre, dtype=float)

    def chart(U):
        a, b = U[:, 0], U[:, 1]
        return np.stack([c[0] + radius * np.cos(a) * np.cos(b), c[1] + radius * np.sin(a) * np.cos(b), radius * np.sin(b)], axis=1)

    return HalfSpaceSurface("hemisphere", 2, chart, np.array([-np.pi, 0.0]), np.array([np.pi, np.pi / 2]))


def vertical_strip(height: float = 1.0, half_length: float = 1.0) -> HalfSpaceSurface:
    """``line x (0, height]`` over the first coordinate axis."""

    def chart(U):
        return np.stack([U[:, 0], np.zeros(len(U)), U[:, 1]], axis=1)

    return HalfSpaceSurface("vertical_strip", 2, chart, np.array([-half_length, 0.0]), np.array([half_length, height]))


def tilted_strip(angle_deg: float = 45.0, height: float = 1.0, half_length: float = 1.0) -> HalfSpaceSurface:
    """Planar strip through the first axis meeting ``{y = 0}`` at ``angle_deg``."""
    a = np.deg2rad(angle_deg)

    def chart(U):
        return np.stack([U[:, 0], U[:, 1] * np.cos(a), U[:, 1] * np.sin(a)], axis=1)

    return HalfSpaceSurface("tilted_strip", 2, chart, np.array([-half_length, 0.0]), np.array([half_length, height]))


def tilted_sphere_cap(angle_deg: float, boundary_radius: float = 1.0) -> HalfSpaceSurface:
    """Round sphere cut by ``{y = 0}`` along the circle of ``boundary_radius``
    at interior angle ``angle_deg`` (90 gives the hemisphere)."""
    a = np.deg2rad(angle_deg)
    rho = boundary_radius / np.sin(a)
    h0 = -rho * np.cos(a)
    b0 = np.arcsin(-h0 / rho)

    def chart(U):
        t, b = U[:, 0], U[:, 1]
        return np.stack([rho * np.cos(t) * np.cos(b), rho * np.sin(t) * np.cos(b), h0 + rho * np.sin(b)], axis=1)

    return HalfSpaceSurface("tilted_cap", 2, chart, np.array([-np.pi, b0]), np.array([np.pi, np.pi / 2]))


def point_cloud(points, m: int = 2, name: str = "cloud") -> HalfSpaceSurface:
    P = np.atleast_2d(np.asarray(points, dtype=float))
    if np.any(P[:, -1] < 0):
        raise ValueError("heights must be non-negative")
    return HalfSpaceSurface(name, m, points=P)


def load_point_cloud(path, m: int = 2) -> HalfSpaceSurface:
    """Whitespace-separated file, one point per line, height last."""
    return point_cloud(np.loadtxt(path, ndmin=2), m, name=str(path))


# -- barrier ------------------------------------------------------------------


@dataclass
class BarrierReport:
    empty: bool
    violations: np.ndarray
    r: float
    dist: float


def barrier_check(surfaces: Sequence[HalfSpaceSurface], gamma: BoundaryCurve, x, r: float, count: int = 400) -> BarrierReport:
    """Whether sampled points of the surfaces avoid the half-ball ``B_r(x, 0)``."""
    x = np.asarray(x, dtype=float)
    d = gamma.distance(x)
    if r >= d:
        warnings.warn("r is not below dist(x, gamma); emptiness is not expected", stacklevel=2)
    base = np.append(x, 0.0)
    P = np.vstack([s.sample(count) for s in surfaces])
    P = P[P[:, -1] > 0]
    bad = P[np.linalg.norm(P - base, axis=1) < r]
    return BarrierReport(len(bad) == 0, bad, r, d)


# -- tangent cones ------------------------------------------------------------


def _angle(u, v_proj):
    """Angle between ``u`` and its projection ``v_proj`` via atan2 (accurate near 0)."""
    perp = np.linalg.norm(u - v_proj, axis=-1)
    par = np.linalg.norm(v_proj, axis=-1)
    return np.arctan2(perp, par)


@dataclass
class ScaleRecord:
    scale: float
    count: int
    opening_deg: float
    defect_deg: float
    ray: np.ndarray
    tangent: np.ndarray
    representative: np.ndarray  # sample point whose direction is closest to the ray


@dataclass
class TangentConeEstimate:
    base: np.ndarray
    records: list
    model_tangent: np.ndarray
    directions: np.ndarray = field(default=None)
    stable: bool = False
    sandwich: bool = False

    @property
    def opening_deg(self) -> float:
        return self.records[-1].opening_deg

    @property
    def defect_deg(self) -> float:
        return self.records[-1].defect_deg

    @property
    def ray(self) -> np.ndarray:
        return self.records[-1].ray

    def tcone_check(self, tol_deg: float = ANGLE_TOL_DEG) -> bool:
        """Cone equals ``T_x gamma x [0, inf)`` within ``tol_deg`` at the finest scales."""
        return bool(self.stable and all(r.defect_deg < tol_deg for r in self.records[-VOTE_SCALES:]))

    def sequence(self):
        """``(rho_i, p_i)`` generating the fitted ray."""
        return [(1.0 / r.scale, r.representative) for r in self.records]


def default_scales(top: float = 1e-1, bottom: float = 1e-4, count: int = 10) -> np.ndarray:
    return np.geomspace(top, bottom, count)


def tangent_cone_estimate(
    surfaces: Sequence[HalfSpaceSurface],
    base,
    scales: Optional[Sequence[float]] = None,
    gamma: Optional[BoundaryCurve] = None,
    grid: int = 61,
) -> TangentConeEstimate:
    """Multi-scale estimate of the tangent cone of the surfaces at a boundary point.

    At each scale ``s`` the samples in the shell ``s/2 <= |p - base| <= s`` are
    turned into unit directions; their top principal subspace ``P`` gives the
    fitted half-flat, whose ray is the direction in ``P`` of steepest height.
    The defect is the larger of the worst direction-to-model angle and the
    angle between fitted and model half-flats, the model being
    ``T_x gamma x [0, inf)``.
    """
    base = np.asarray(base, dtype=float)
    scales = default_scales() if scales is None else np.asarray(sorted(scales, reverse=True), dtype=float)
    if scales[0] / scales[-1] < 1e3 * (1 - 1e-9):
        raise ValueError("scales must span at least three decades")
    if abs(base[-1]) > 1e-12:
        raise ValueError("base must lie on {y = 0}")
    m = surfaces[0].m
    dim = len(base)
    ey = np.zeros(dim)
    ey[-1] = 1.0
    if gamma is not None:
        tau = gamma.tangent_at(base[:-1])
        T_model = np.append(tau, 0.0)[:, None]
    else:
        T_model = None

    records = []
    all_dirs = []
    for s in scales:
        P = np.vstack([srf.near(base, s, grid) for srf in surfaces])
        if len(P) < MIN_SHELL_SAMPLES:
            raise ResolutionError(f"only {len(P)} samples at scale {s:.1e}")
        D = (P - base) / s
        D /= np.linalg.norm(D, axis=1, keepdims=True)
        U, _, _ = np.linalg.svd(D.T @ D)
        Pm = U[:, :m]
        proj_y = Pm @ (Pm.T @ ey)
        ray = proj_y / np.linalg.norm(proj_y)
        opening = float(np.degrees(np.arcsin(min(1.0, np.linalg.norm(proj_y)))))
        # tangent directions of the fitted half-flat: P with the ray removed
        Tf = Pm - np.outer(ray, ray) @ Pm
        Tf = np.linalg.svd(Tf)[0][:, : m - 1]
        model_T = T_model if T_model is not None else Tf
        # direction-to-model angles; model = span(T) + [0, inf) e_y
        proj = D @ model_T @ model_T.T + np.maximum(D @ ey, 0)[:, None] * ey
        one_sided = float(np.max(_angle(D, proj)))
        ray_angle = float(np.arctan2(np.linalg.norm(ray - (ray @ ey) * ey), ray @ ey))
        t_angle = float(np.max(_angle(Tf.T, (model_T @ (model_T.T @ Tf)).T)))
        defect = np.degrees(max(one_sided, ray_angle, t_angle))
        rep = P[int(np.argmax(D @ ray))]
        records.append(ScaleRecord(float(s), len(P), opening, float(defect), ray, Tf, rep))
        all_dirs.append(D)

    rays = np.array([r.ray for r in records[-VOTE_SCALES:]])
    spread = np.degrees(np.arccos(np.clip(rays @ rays.T, -1, 1))).max()
    stable = bool(spread < ANGLE_TOL_DEG)

    # sandwich: directions inside the outer half-space, model line directions attained
    last = all_dirs[-1]
    tol = np.radians(ANGLE_TOL_DEG)
    inside = np.all(last @ ey >= -np.sin(tol))
    model_T = T_model if T_model is not None else records[-1].tangent
    contains = all(np.max(last @ (sgn * model_T[:, j])) >= np.cos(tol) for j in range(m - 1) for sgn in (1, -1))
    est = TangentConeEstimate(base, records, model_T, None, stable, bool(inside and contains))
    est.directions = np.vstack([records[-1].ray] + [sgn * records[-1].tangent[:, j] for j in range(m - 1) for sgn in (1, -1)])
    return est
