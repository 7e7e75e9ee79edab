"""Finite elements on truncated submanifolds in the induced hyperbolic metric.

First-order elements in parameter coordinates. Each simplex carries the
metric tensor in its reference coordinates, ``M_e = E^T G E``, where ``E``
holds the parameter edge vectors and ``G`` the pulled-back metric. Polar
meshes use geodesic polar coordinates ``(r, theta)`` with the exact polar
metric at the barycentre; meshes read from file use the secant metric of
the embedded simplex.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .cone import Cone, check_doubling, circle_cone, ray_volume_density, volume_comparison, weyl_profile
from .radial import (
    FunctionProfile,
    RadialProfile,
    beta,
    coth,
    cstar_for,
    default_rule,
    epsilon_R,
    radial_bump,
    weighted_integrals,
)
from .submanifold import (
    ImmersedPatch,
    Sampler,
    directions,
    epsilon_r,
    orthogonality_defect,
    ray_parameters,
)

EIG_TOL = 1e-10
DEGENERACY_TOL = 1e-14


class AssemblyError(ValueError):
    pass


class SolverError(RuntimeError):
    def __init__(self, msg, history=()):
        super().__init__(msg)
        self.history = list(history)


class ResolutionError(RuntimeError):
    pass


class PreconditionError(ValueError):
    pass


# -- meshes -------------------------------------------------------------------


def _phi(x):
    n = np.linalg.norm(x, axis=-1)
    return 0.5 * (1.0 - n) * (1.0 + n)


@dataclass
class HyperbolicMesh:
    """Simplicial mesh of a truncated patch.

    ``points`` are ball coordinates (or plain coordinates for ``metric =
    "euclidean"``), ``boundary`` marks Dirichlet vertices.
    """

    m: int
    points: np.ndarray
    simplices: np.ndarray
    boundary: np.ndarray
    params: Optional[np.ndarray] = None
    patch: Optional[ImmersedPatch] = None
    metric: str = "hyperbolic"
    h: float = np.nan
    # polar (r, theta) vertex coordinates and the simplices assembled in them
    polar: Optional[np.ndarray] = None
    polar_simplex: Optional[np.ndarray] = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        self.simplices = np.asarray(self.simplices, dtype=np.int64)
        self.boundary = np.asarray(self.boundary, dtype=bool)
        if self.simplices.shape[1] != self.m + 1:
            raise ValueError("simplices must have m + 1 vertices")
        if self.metric not in ("hyperbolic", "euclidean"):
            raise ValueError("metric must be 'hyperbolic' or 'euclidean'")
        if self.metric == "hyperbolic" and np.any(np.linalg.norm(self.points, axis=1) >= 1):
            raise ValueError("vertices must lie in the open unit ball")

    @property
    def n_vertices(self) -> int:
        return len(self.points)

    @property
    def n_interior(self) -> int:
        return int(np.sum(~self.boundary))

    def radii(self) -> np.ndarray:
        return 2.0 * np.arctanh(np.linalg.norm(self.points, axis=1))

    def topological_boundary(self) -> np.ndarray:
        """Vertices on facets that belong to exactly one simplex."""
        m = self.m
        facets = np.concatenate([np.delete(self.simplices, j, axis=1) for j in range(m + 1)])
        facets = np.sort(facets, axis=1)
        uniq, counts = np.unique(facets, axis=0, return_counts=True)
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[uniq[counts == 1].ravel()] = True
        return mask

    def validate(self) -> None:
        if not np.array_equal(self.topological_boundary(), self.boundary):
            raise ValueError("boundary markers differ from the topological boundary")
        reference_metrics(self)

    def truncate(self, r_max: float) -> "HyperbolicMesh":
        """Sub-mesh of simplices whose vertices all lie within radius ``r_max``."""
        keep = np.all(self.radii()[self.simplices] <= r_max + 1e-9, axis=1)
        S = self.simplices[keep]
        used = np.unique(S)
        remap = -np.ones(self.n_vertices, dtype=np.int64)
        remap[used] = np.arange(len(used))
        sub = HyperbolicMesh(
            self.m,
            self.points[used],
            remap[S],
            np.zeros(len(used), dtype=bool),
            None if self.params is None else self.params[used],
            self.patch,
            self.metric,
            self.h,
            None if self.polar is None else self.polar[used],
            None if self.polar_simplex is None else self.polar_simplex[keep],
        )
        sub.boundary = sub.topological_boundary()
        return sub

    # -- text format: header "m n+1 V S", vertices, simplices, boundary markers

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(f"{self.m} {self.points.shape[1]} {self.n_vertices} {len(self.simplices)}\n")
            for p in self.points:
                fh.write(" ".join(repr(float(c)) for c in p) + "\n")
            for s in self.simplices:
                fh.write(" ".join(str(int(i)) for i in s) + "\n")
            fh.write(" ".join("1" if b else "0" for b in self.boundary) + "\n")

    @classmethod
    def load(cls, path, metric: str = "hyperbolic") -> "HyperbolicMesh":
        with open(path) as fh:
            lines = [ln for ln in fh.read().splitlines() if ln.strip()]
        m, d, V, S = (int(v) for v in lines[0].split())
        if len(lines) != 1 + V + S + 1:
            raise ValueError(f"expected {V} vertex, {S} simplex and one marker line")
        pts = np.array([[float(v) for v in ln.split()] for ln in lines[1 : 1 + V]])
        simp = np.array([[int(v) for v in ln.split()] for ln in lines[1 + V : 1 + V + S]])
        marks = np.array([int(v) for v in lines[-1].split()], dtype=bool)
        if pts.shape != (V, d) or simp.shape != (S, m + 1) or marks.shape != (V,):
            raise ValueError("mesh file sizes disagree with the header")
        return cls(m, pts, simp, marks, metric=metric)


def polar_mesh(
    patch: ImmersedPatch,
    R: float,
    r_inner: float = 0.0,
    rings: int = 80,
    n_angles: int = 128,
) -> HyperbolicMesh:
    """Triangulate ``{r_inner <= r <= R}`` on a 2-dimensional patch.

    Rings sit at equally spaced hyperbolic radii (found by bisection along
    parameter rays), which grades the parameter spacing toward the ideal
    boundary. With ``r_inner = 0`` the centre of the chart is a vertex and
    the innermost ring starts above its radius.
    """
    if patch.m != 2:
        raise NotImplementedError("polar meshes are built for surfaces")
    dirs = directions(2, n_angles)
    x0 = patch(np.zeros((1, 2)))[0]
    r0 = 2.0 * np.arctanh(np.linalg.norm(x0))
    if r_inner > 0:
        if r_inner <= r0:
            raise ValueError("inner radius must exceed the radius of the chart centre")
        levels = np.linspace(r_inner, R, rings + 1)
    else:
        levels = np.linspace(r0, R, rings + 1)[1:]
    U = ray_parameters(patch, dirs, levels)
    if not np.all(np.isfinite(U)):
        raise ValueError("truncation radius lies beyond the patch")
    params = U.reshape(-1, 2)
    theta = 2 * np.pi * np.arange(n_angles) / n_angles
    polar = np.stack(np.broadcast_arrays(levels[:, None], theta[None, :]), axis=-1).reshape(-1, 2)
    N = n_angles
    L = len(levels)
    tris = []
    j = np.arange(N)
    jn = (j + 1) % N
    offset = 0
    if r_inner == 0:
        params = np.vstack([np.zeros((1, 2)), params])
        polar = np.vstack([[r0, 0.0], polar])
        offset = 1
        tris.append(np.stack([np.zeros(N, dtype=np.int64), offset + j, offset + jn], axis=1))
    for i in range(L - 1):
        a, b = offset + i * N, offset + (i + 1) * N
        tris.append(np.stack([a + j, b + j, b + jn], axis=1))
        tris.append(np.stack([a + j, b + jn, a + jn], axis=1))
    simplices = np.concatenate(tris)
    is_polar = np.ones(len(simplices), dtype=bool)
    if r_inner == 0:
        is_polar[:N] = False
    boundary = np.zeros(len(params), dtype=bool)
    boundary[offset + (L - 1) * N :] = True
    if r_inner > 0:
        boundary[offset : offset + N] = True
    h = float(levels[1] - levels[0])
    return HyperbolicMesh(2, patch(params), simplices, boundary, params, patch, "hyperbolic", h, polar, is_polar)


def square_mesh(n: int) -> HyperbolicMesh:
    """Euclidean unit square, ``n x n`` cells, two triangles each."""
    t = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(t, t, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    idx = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)
    a, b, c, d = idx[:-1, :-1].ravel(), idx[1:, :-1].ravel(), idx[1:, 1:].ravel(), idx[:-1, 1:].ravel()
    simplices = np.concatenate([np.stack([a, b, c], 1), np.stack([a, c, d], 1)])
    boundary = (X.ravel() == 0) | (X.ravel() == 1) | (Y.ravel() == 0) | (Y.ravel() == 1)
    return HyperbolicMesh(2, pts, simplices, boundary, pts.copy(), None, "euclidean", 1.0 / n)


# -- assembly -----------------------------------------------------------------


def _ray_points(patch: ImmersedPatch, r: np.ndarray, theta: np.ndarray, iterations: int = 80):
    """Parameter points on the rays ``theta`` at hyperbolic radius ``r`` (pairwise)."""
    d = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    target = np.tanh(r / 2.0)
    lo = np.zeros_like(r)
    hi = np.full_like(r, patch.u_max)
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        inside = np.linalg.norm(patch(mid[:, None] * d), axis=-1) < target
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    rho = 0.5 * (lo + hi)
    return rho, d


def polar_metric(patch: ImmersedPatch, r: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Induced hyperbolic metric in the ``(r, theta)`` coordinates of a surface patch."""
    rho, d = _ray_points(patch, r, theta)
    u = rho[:, None] * d
    dperp = np.stack([-d[:, 1], d[:, 0]], axis=1)
    x = patch(u)
    J = patch.jac(u)
    nx = np.linalg.norm(x, axis=-1)
    phi = 0.5 * (1.0 - nx) * (1.0 + nx)
    xhat = x / nx[:, None]
    Jd = np.einsum("ndi,ni->nd", J, d)
    Jp = np.einsum("ndi,ni->nd", J, dperp)
    r_rho = np.einsum("nd,nd->n", xhat, Jd) / phi
    r_theta = rho * np.einsum("nd,nd->n", xhat, Jp) / phi
    # x_r = J u_r with u_r = d / r_rho; x_theta = J (rho dperp - (r_theta / r_rho) d)
    x_r = Jd / r_rho[:, None]
    x_t = rho[:, None] * Jp - (r_theta / r_rho)[:, None] * Jd
    A = np.stack([x_r, x_t], axis=-1)
    return np.einsum("ndi,ndj->nij", A, A) / phi[:, None, None] ** 2


def reference_metrics(mesh: HyperbolicMesh) -> np.ndarray:
    """Per-simplex metric tensors in reference coordinates, shape ``(S, m, m)``."""
    S = mesh.simplices
    if mesh.patch is not None and mesh.params is not None:
        P = mesh.params[S]
        E = np.swapaxes(P[:, 1:] - P[:, :1], 1, 2)  # (S, m, m): columns are edges
        bary = P.mean(axis=1)
        J = mesh.patch.jac(bary)
        G = np.einsum("sdi,sdj->sij", J, J)
        if mesh.metric == "hyperbolic":
            G = G / _phi(mesh.patch(bary))[:, None, None] ** 2
        if mesh.polar_simplex is not None and np.any(mesh.polar_simplex):
            k = np.flatnonzero(mesh.polar_simplex)
            Q = mesh.polar[S[k]]
            Ep = np.swapaxes(Q[:, 1:] - Q[:, :1], 1, 2)
            Ep[:, 1, :] = np.mod(Ep[:, 1, :] + np.pi, 2 * np.pi) - np.pi  # unwrap angles
            q0 = Q[:, 0]
            bq = q0 + Ep.sum(axis=2) / (mesh.m + 1)
            E[k] = Ep
            G[k] = polar_metric(mesh.patch, bq[:, 0], bq[:, 1])
        M = np.einsum("sai,sab,sbj->sij", E, G, E)
    else:
        X = mesh.points[S]
        A = np.swapaxes(X[:, 1:] - X[:, :1], 1, 2)  # (S, d, m)
        M = np.einsum("sdi,sdj->sij", A, A)
        if mesh.metric == "hyperbolic":
            M = M / _phi(X.mean(axis=1))[:, None, None] ** 2
    det = np.linalg.det(M)
    scale = (np.trace(M, axis1=1, axis2=2) / mesh.m) ** mesh.m
    bad = np.flatnonzero(~(det > DEGENERACY_TOL * scale))
    if len(bad):
        raise AssemblyError(f"degenerate simplex {int(bad[0])}: {mesh.simplices[bad[0]].tolist()}")
    return M


@dataclass
class DiscreteOperatorPair:
    stiffness: sp.csr_matrix
    mass: sp.csr_matrix
    free: np.ndarray
    full_stiffness: sp.csr_matrix = field(repr=False)
    full_mass: sp.csr_matrix = field(repr=False)

    @property
    def total_mass(self) -> float:
        return float(self.full_mass.sum())


def assemble(mesh: HyperbolicMesh) -> DiscreteOperatorPair:
    """P1 stiffness and mass matrices; Dirichlet vertices are eliminated."""
    m = mesh.m
    M = reference_metrics(mesh)
    vol = np.sqrt(np.linalg.det(M)) / factorial(m)
    D = np.vstack([-np.ones((1, m)), np.eye(m)])  # reference barycentric gradients
    Minv = np.linalg.inv(M)
    Ke = vol[:, None, None] * np.einsum("ai,sij,bj->sab", D, Minv, D)
    Me = vol[:, None, None] * (np.ones((m + 1, m + 1)) + np.eye(m + 1))[None] / ((m + 1) * (m + 2))
    S = mesh.simplices
    rows = np.repeat(S, m + 1, axis=1).ravel()
    cols = np.tile(S, (1, m + 1)).ravel()
    n = mesh.n_vertices
    K = sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    Mm = sp.coo_matrix((Me.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    K = 0.5 * (K + K.T)
    Mm = 0.5 * (Mm + Mm.T)
    free = np.flatnonzero(~mesh.boundary)
    return DiscreteOperatorPair(K[free][:, free].tocsr(), Mm[free][:, free].tocsr(), free, K, Mm)


# -- eigenvalues --------------------------------------------------------------


@dataclass
class MeshSpectrumReport:
    eigenvalues: np.ndarray
    residuals: np.ndarray
    rayleigh: np.ndarray
    h: float
    n_interior: int
    records: dict = field(default_factory=dict)
    vectors: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def bottom(self) -> float:
        return float(self.eigenvalues[0])


def generalized_eigs(K, M, count: int, sigma: float, tol: float = EIG_TOL, restarts: int = 3):
    n = K.shape[0]
    v0 = np.ones(n) / np.sqrt(n)
    history = []
    ncv = None
    for attempt in range(restarts + 1):
        try:
            vals, vecs = eigsh(K, k=count, M=M, sigma=sigma, which="LM", tol=tol, v0=v0, ncv=ncv)
            order = np.argsort(vals)
            return vals[order], vecs[:, order]
        except ArpackNoConvergence as exc:
            res = []
            for lam, v in zip(exc.eigenvalues, exc.eigenvectors.T):
                res.append(float(np.linalg.norm(K @ v - lam * (M @ v)) / np.linalg.norm(M @ v)))
            history.append(res)
            ncv = min(n - 1, max(2 * count + 1, 20) * (attempt + 2))
    raise SolverError("shift-invert iteration did not converge", history)


def dirichlet_bottom(
    mesh: HyperbolicMesh,
    count: int = 1,
    fine_mesh: Optional[HyperbolicMesh] = None,
    eps_r: Optional[float] = None,
    tol: float = EIG_TOL,
) -> MeshSpectrumReport:
    """Smallest Dirichlet eigenvalues of the Laplace-Beltrami operator.

    With ``fine_mesh`` (the same region at half the mesh size) the report
    records the slack ``3 |lambda_0(h) - lambda_0(h/2)|``; with ``eps_r`` it
    records the bound ``(m - 1 - eps_r)^2 / 4`` and whether ``lambda_0``
    clears it after subtracting the slack.
    """
    if not np.any(mesh.boundary):
        raise PreconditionError("mesh has no Dirichlet boundary")
    ops = assemble(mesh)
    sigma = 0.9 * (mesh.m - 1) ** 2 / 4 if mesh.metric == "hyperbolic" else 0.0
    vals, vecs = generalized_eigs(ops.stiffness, ops.mass, count, sigma, tol)
    Mv = ops.mass @ vecs
    res = np.linalg.norm(ops.stiffness @ vecs - Mv * vals, axis=0) / np.linalg.norm(Mv, axis=0)
    ray = np.einsum("ij,ij->j", vecs, ops.stiffness @ vecs) / np.einsum("ij,ij->j", vecs, Mv)
    rep = MeshSpectrumReport(vals, res, ray, mesh.h, mesh.n_interior, vectors=vecs)
    rep.records["total_mass"] = ops.total_mass
    if fine_mesh is not None:
        fine = dirichlet_bottom(fine_mesh, 1, tol=tol)
        rep.records["lambda0_fine"] = fine.bottom
        rep.records["slack"] = 3.0 * abs(rep.bottom - fine.bottom)
    if eps_r is not None:
        bound = 0.25 * (mesh.m - 1 - eps_r) ** 2
        rep.records["bound"] = bound
        rep.records["bound_ok"] = bool(rep.bottom >= bound - rep.records.get("slack", 0.0))
    return rep


def refine_polar(patch: ImmersedPatch, R: float, r_inner: float = 0.0, rings: int = 80, n_angles: int = 128):
    """The mesh and its uniform refinement (half the ring spacing and angle)."""
    return (
        polar_mesh(patch, R, r_inner, rings, n_angles),
        polar_mesh(patch, R, r_inner, 2 * rings, 2 * n_angles),
    )


def disk_volume(m: int, R: float, r_inner: float = 0.0) -> float:
    """Hyperbolic volume of the annulus ``r_inner < r < R`` in H^2 (m = 2)."""
    if m != 2:
        raise NotImplementedError
    return 2 * np.pi * (np.cosh(R) - np.cosh(r_inner))


# -- radial Laplacian on a patch ----------------------------------------------


def _radial_flux(patch: ImmersedPatch, U: np.ndarray):
    """``sqrt(g) grad r``, ``sqrt(g)``, ``r`` and ``|grad r|^2`` at parameter points."""
    x = patch(U)
    J = patch.jac(U)
    nx = np.linalg.norm(x, axis=-1)
    phi = 0.5 * (1.0 - nx) * (1.0 + nx)
    G = np.einsum("ndi,ndj->nij", J, J) / phi[:, None, None] ** 2
    sqrtg = np.sqrt(np.linalg.det(G))
    dr = np.einsum("nd,ndi->ni", x / nx[:, None], J) / phi[:, None]
    grad = np.linalg.solve(G, dr[..., None])[..., 0]
    return sqrtg[:, None] * grad, sqrtg, 2.0 * np.arctanh(nx), np.einsum("ni,ni->n", dr, grad)


def _param_step(patch: ImmersedPatch, U: np.ndarray, eta: float) -> np.ndarray:
    """Parameter step corresponding to hyperbolic length ``eta``."""
    x = patch(U)
    J = patch.jac(U)
    phi = _phi(x)
    return eta * phi / np.linalg.norm(J, ord=2, axis=(1, 2))


def _laplacian_of_r_once(patch, U, h):
    div = 0.0
    for i in range(patch.m):
        e = np.zeros(patch.m)
        e[i] = 1.0
        fp = _radial_flux(patch, U + h[:, None] * e)[0]
        fm = _radial_flux(patch, U - h[:, None] * e)[0]
        div = div + (fp[:, i] - fm[:, i]) / (2.0 * h)
    return div


@dataclass
class RadialGeometry:
    """``r``, ``|grad r|^2`` and ``Delta r`` on the patch at parameter points.

    Any radial function then has ``Delta(f o r) = f''|grad r|^2 + f' Delta r``.
    """

    r: np.ndarray
    grad2: np.ndarray
    lap: np.ndarray
    lap_err: np.ndarray

    def laplacian(self, profile: RadialProfile):
        _, df, d2f = profile(self.r)
        return d2f * self.grad2 + df * self.lap, np.abs(df) * self.lap_err


def radial_geometry(patch: ImmersedPatch, U: np.ndarray, eta: float = 0.01) -> RadialGeometry:
    """``Delta r`` by central differences of the flux ``sqrt(g) grad r``.

    Only the divergence is differenced, with parameter steps matching
    hyperbolic lengths ``eta, eta/2, eta/4``; the value is twice
    Richardson-extrapolated and the difference of the two single
    extrapolations (divided by 15) is kept as a consistency error estimate.
    """
    U = np.atleast_2d(U)
    _, sqrtg, r, grad2 = _radial_flux(patch, U)
    h = _param_step(patch, U, eta)
    L1, L2, L4 = (_laplacian_of_r_once(patch, U, h / q) / sqrtg for q in (1, 2, 4))
    R1 = (4.0 * L2 - L1) / 3.0
    R2 = (4.0 * L4 - L2) / 3.0
    return RadialGeometry(r, grad2, (16.0 * R2 - R1) / 15.0, np.abs(R2 - R1) / 15.0)


def laplace_beltrami_radial(patch: ImmersedPatch, U: np.ndarray, profile: RadialProfile, eta: float = 0.01):
    """``Delta(f o r)`` on the patch; returns value, error estimate and ``r``."""
    geo = radial_geometry(patch, U, eta)
    L, err = geo.laplacian(profile)
    return L, err, geo.r


def exponential_profile(m: int = 2) -> FunctionProfile:
    """``e^t``: ``f' = f''``, so ``|E| / (|f''| + |f'|)`` does not depend on a phase."""
    return FunctionProfile(np.exp, np.exp, np.exp, m=m)


@dataclass
class RadialErrorSample:
    r: float
    error: float
    bound_scale: float
    ratio: float
    consistency: float


def radial_laplacian_error(
    mesh: HyperbolicMesh,
    profile: Optional[RadialProfile] = None,
    vertices: Optional[Sequence[int]] = None,
    eta: float = 0.01,
    abs_floor: float = 1e-7,
) -> list:
    """``E(x)`` = Laplacian of ``f o r`` minus the radial model, at mesh vertices.

    Raises ResolutionError when the consistency error estimate exceeds 25% of
    ``|E|`` and is above ``abs_floor * (|f''| + |f'|)`` (exact zeros of ``E``
    are only resolved to that floor).
    """
    if mesh.patch is None or mesh.params is None:
        raise ValueError("the mesh must carry its generating patch")
    profile = profile or exponential_profile(mesh.m)
    if vertices is None:
        idx = np.flatnonzero(~mesh.boundary & (mesh.radii() >= 1.0))
    else:
        idx = np.asarray(vertices)
    U = mesh.params[idx]
    L, err, r = laplace_beltrami_radial(mesh.patch, U, profile, eta)
    _, df, d2f = profile(r)
    model = d2f + (mesh.m - 1) * coth(r) * df
    E = np.abs(L - model)
    scale = np.abs(d2f) + np.abs(df)
    bad = (err > 0.25 * E) & (err > abs_floor * scale)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise ResolutionError(f"consistency error {err[i]:.2e} exceeds 25% of |E| = {E[i]:.2e} at r = {r[i]:.3f}")
    return [RadialErrorSample(float(a), float(b), float(c), float(b / c), float(d)) for a, b, c, d in zip(r, E, scale, err)]


def band_sup(samples: Sequence[RadialErrorSample], lo: float, hi: float) -> float:
    vals = [s.ratio for s in samples if lo <= s.r <= hi]
    if not vals:
        raise ValueError(f"no samples in band [{lo}, {hi}]")
    return max(vals)


# -- Weyl sequence on a submanifold -------------------------------------------


@dataclass
class Diagnostics:
    eps_r: list
    defect: float
    ok: bool


def hypothesis_diagnostics(patch: ImmersedPatch, radii=(2.0, 4.0, 6.0, 8.0), eps_tol: float = 0.05, defect_tol: float = 0.01):
    """Asymptotic minimality (``eps_r`` non-increasing and small) and
    regularity at infinity (orthogonality defect near the ideal boundary)."""
    cache = {}
    origin = np.zeros(patch.ambient)
    eps = [epsilon_r([patch], origin, r, Sampler(n_directions=32, dr=0.1), cache).value for r in radii]
    level = 2.0 * np.arctanh(1 - 1e-6)
    U = ray_parameters(patch, directions(patch.m, 16), np.array([level])).reshape(-1, patch.m)
    U = U[np.all(np.isfinite(U), axis=1)]
    defect = float(np.max(orthogonality_defect(patch, U))) if len(U) else np.inf
    monotone = all(a >= b - 1e-12 for a, b in zip(eps, eps[1:]))
    ok = bool(monotone and eps[-1] < eps_tol and defect < defect_tol)
    return Diagnostics(eps, defect, ok)


@dataclass
class SigmaRow:
    k: int
    R: float
    residual: float
    norm: float
    ratio: float
    cone_ratio: float
    eps_k: float
    eps_hat: float
    bound: float


@dataclass
class SigmaSpectrumReport:
    m: int
    lam: float
    rows: list
    decreasing: bool
    final_ok: bool
    diagnostics: Diagnostics
    cstar: float

    @property
    def passed(self) -> bool:
        return bool(self.diagnostics.ok and self.decreasing and self.final_ok)


SIGMA_HEADER = ["k", "R_k", "residual", "norm", "ratio", "cone_ratio", "eps_k", "eps_hat", "bound", "PASS"]


def default_sigma_R_sequence() -> list:
    # the boundary cutoff 1 - 1e-9 caps patch radii near 21
    return [4.0, 8.5, 18.0]


def sigma_weyl_residual(
    patch: ImmersedPatch,
    m: int,
    lam: float,
    R_sequence: Optional[Sequence[float]] = None,
    sigma: float = 0.03,
    n_directions: int = 64,
    cstar: Optional[float] = None,
    strict: bool = True,
    diagnostics: Optional[Diagnostics] = None,
    eta: float = 0.01,
) -> SigmaSpectrumReport:
    """Residual/norm ratios of ``phi_k = upsilon_k o r`` on the patch.

    Integrals use the ray grid of the polar meshes (rings at exact radii);
    the Laplacian is the divergence-form difference scheme of
    :func:`laplace_beltrami_radial`. The final ratio is compared against
    ``(3 eps_k + 24 C* eps_hat^2)(1 + eps_hat)/(1 - eps_hat)`` with
    ``eps_k = 4 eps_{R_k}`` and ``eps_hat`` the larger of the measured radial
    Laplacian ratio and volume deviation on the last support.
    """
    if patch.m != m:
        raise ValueError("m does not match the patch")
    beta(m, lam)
    Rs = list(R_sequence) if R_sequence is not None else default_sigma_R_sequence()
    check_doubling(Rs)
    diag = diagnostics or hypothesis_diagnostics(patch)
    if strict and not diag.ok:
        raise PreconditionError(
            f"hypotheses not met: eps_r = {[round(e, 4) for e in diag.eps_r]}, defect = {diag.defect:.3g}"
        )
    cstar = cstar if cstar is not None else cstar_for(m, lam, 20.0, 320.0)
    rows = []
    for k, R in enumerate(Rs):
        prof = weyl_profile(m, lam, R, sigma)
        rule = default_rule(prof, lam)
        r, wr = rule.nodes_weights()
        U, density, wd = ray_volume_density(patch, r, n_directions)
        flat = U.reshape(-1, m)
        geo = radial_geometry(patch, flat, eta)
        L, _ = geo.laplacian(prof)
        v = prof(geo.r)[0]
        w = (wr[:, None] * wd[None, :] * density).ravel()
        residual = float(np.sum(w * np.abs(L + lam * v) ** 2))
        norm = float(np.sum(w * np.abs(v) ** 2))
        ints = weighted_integrals(prof, lam)
        # measured deviation on the support of this phi_k
        lo, hi = prof.support
        band = exponential_profile(m)
        Lc, _ = geo.laplacian(band)
        rc = geo.r
        _, dfc, d2fc = band(rc)
        e_lap = float(np.max(np.abs(Lc - (d2fc + (m - 1) * coth(rc) * dfc)) / (np.abs(d2fc) + np.abs(dfc))))
        link = circle_cone() if m == 2 else Cone(m)
        e_vol = volume_comparison([patch], link, radial_bump(lo, hi), lo).eps_hat
        eps_hat = max(e_lap, e_vol)
        eps_k = 4.0 * epsilon_R(m, lam, R)
        bound = (3 * eps_k + 24 * cstar * eps_hat**2) * (1 + eps_hat) / (1 - eps_hat) if eps_hat < 1 else np.inf
        rows.append(SigmaRow(k, float(R), residual, norm, residual / norm, ints.residual / ints.norm, eps_k, eps_hat, bound))
    ratios = [row.ratio for row in rows]
    decreasing = all(a > b for a, b in zip(ratios, ratios[1:]))
    final_ok = bool(rows[-1].ratio <= rows[-1].bound)
    return SigmaSpectrumReport(m, lam, rows, decreasing, final_ok, diag, cstar)
