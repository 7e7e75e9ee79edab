"""Cones over links on the unit sphere and their radial spectral theory.

The cone over a link ``Gamma`` in the unit sphere is the union of the rays
``tau z``, ``z in Gamma``. With ``r = 2 artanh(tau)`` its induced metric is
``dr^2 + sinh^2(r) g_Gamma``, so radial integrals factor as the link volume
times a 1-D ``sinh^{m-1}``-weighted integral.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import gamma as gamma_fn
from typing import Optional, Sequence

import numpy as np

from .radial import (
    GL_ORDER,
    QuadratureRule,
    RadialProfile,
    WindowProfile,
    beta,
    coth,
    epsilon_R,
    log_sinh,
    mollify,
    weighted_integrals,
)
from .submanifold import ImmersedPatch, directions, ray_parameters

DOUBLING_FACTOR = 2.05
R0_DEFAULT = 20.0


class PreconditionError(ValueError):
    pass


def sphere_volume(m: int) -> float:
    """Volume of the round unit ``(m-1)``-sphere."""
    return 2.0 * np.pi ** (m / 2) / gamma_fn(m / 2)


@dataclass(frozen=True)
class CircleLink:
    """Circle on the unit 2-sphere at polar angle ``c`` about ``axis``.

    ``speed`` reparametrises the angle as ``t -> t + speed * sin(t)`` so the
    chart is not unit-speed (exercises the arclength quadrature).
    """

    c: float = np.pi / 2
    axis: tuple = (0.0, 0.0, 1.0)
    speed: float = 0.0

    def frame(self):
        w = np.asarray(self.axis, dtype=float)
        w = w / np.linalg.norm(w)
        q, _ = np.linalg.qr(np.column_stack([w, np.eye(3)]))
        e1, e2 = q[:, 1], q[:, 2]
        return w, e1, e2

    def angle(self, t):
        return t + self.speed * np.sin(t)

    def dangle(self, t):
        return 1.0 + self.speed * np.cos(t)

    def __call__(self, t):
        w, e1, e2 = self.frame()
        a = self.angle(np.asarray(t, dtype=float))[..., None]
        return np.cos(self.c) * w + np.sin(self.c) * (np.cos(a) * e1 + np.sin(a) * e2)

    def derivative(self, t):
        w, e1, e2 = self.frame()
        t = np.asarray(t, dtype=float)
        a = self.angle(t)[..., None]
        return np.sin(self.c) * self.dangle(t)[..., None] * (-np.sin(a) * e1 + np.cos(a) * e2)


@dataclass
class Cone:
    """Cone over a link; ``link`` is a closed curve chart on the unit 2-sphere
    (m = 2) or ``None`` for the round equatorial ``S^{m-1}``."""

    m: int
    link: Optional[CircleLink] = None
    resolution: float = 1e-4
    omega: float = field(init=False)

    def __post_init__(self):
        if self.link is None:
            self.omega = sphere_volume(self.m)
        else:
            if self.m != 2:
                raise ValueError("curve links give 2-dimensional cones")
            t = np.linspace(0, 2 * np.pi, 201)
            if np.max(np.abs(np.linalg.norm(self.link(t), axis=-1) - 1)) > 1e-10:
                raise ValueError("link must lie on the unit sphere")
            self.omega = self._arclength()
        if not self.omega > 0:
            raise ValueError("link volume must be positive")

    def _arclength(self) -> float:
        # composite Gauss-Legendre with panels no longer than the resolution
        # in arclength (periodic smooth integrand, so this is far past converged)
        speed_max = np.max(np.linalg.norm(self.link.derivative(np.linspace(0, 2 * np.pi, 1001)), axis=-1))
        panels = max(8, int(np.ceil(2 * np.pi * speed_max / self.resolution / GL_ORDER)))
        rule = QuadratureRule(0.0, 2 * np.pi, panels)
        return rule.integrate(lambda t: np.linalg.norm(self.link.derivative(t), axis=-1))

    def generators(self, tau, t) -> np.ndarray:
        tau = np.asarray(tau, dtype=float)
        return tau[..., None] * self.link(t)

    def as_patch(self) -> ImmersedPatch:
        """The cone as an immersed patch over the unit disk (``|u| = tau``).

        Only defined for the unit-speed circle parametrisation; the apex is
        singular, so integrands must vanish near ``u = 0``.
        """
        if self.link is None or self.link.speed != 0:
            raise ValueError("patch view needs a unit-angle circle link")
        link = self.link

        def chart(u):
            tau = np.linalg.norm(u, axis=-1)
            return tau[..., None] * link(np.arctan2(u[..., 1], u[..., 0]))

        def jac(u):
            tau = np.linalg.norm(u, axis=-1)
            t = np.arctan2(u[..., 1], u[..., 0])
            z = link(t)
            dz = link.derivative(t)
            rot = np.stack([-u[..., 1], u[..., 0]], axis=-1) / tau[..., None]
            return z[..., :, None] * (u / tau[..., None])[..., None, :] + dz[..., :, None] * rot[..., None, :]

        return ImmersedPatch(2, 3, chart, jac, None, u_max=1.0, name="cone")


def circle_cone(c: float = np.pi / 2, **kw) -> Cone:
    return Cone(2, CircleLink(c, **kw))


# -- operators ----------------------------------------------------------------


def cone_radial_laplacian(profile: RadialProfile, r, m: Optional[int] = None):
    """``f''(r) + (m-1) coth(r) f'(r)`` for a radial function on an m-cone."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("r must be positive")
    m = profile.m if m is None else m
    _, df, d2f = profile(r)
    return d2f + (m - 1) * coth(r) * df


def weyl_profile(m: int, lam: float, R: float, sigma: float = 0.1, kernel: str = "bump") -> RadialProfile:
    base = WindowProfile(m, lam, R)
    return base if sigma == 0 else mollify(base, sigma, kernel)


def default_R_sequence(count: int = 3, R0: float = R0_DEFAULT) -> list:
    return [R0 * DOUBLING_FACTOR**k for k in range(count)]


def check_doubling(Rs: Sequence[float]) -> None:
    for a, b in zip(Rs, Rs[1:]):
        if not b > 2 * a:
            raise ValueError(f"R sequence must satisfy R_(k+1) > 2 R_k; got {a} then {b}")


@dataclass
class SpectrumRow:
    k: int
    R: float
    residual: float
    norm: float
    ratio: float
    eps_R: float
    eps_k: float
    passed: bool

    def row(self) -> list:
        return [self.k, self.R, self.residual, self.norm, self.ratio, self.eps_k, self.passed]


SPECTRUM_HEADER = ["k", "R_k", "residual", "norm", "ratio", "eps_k", "PASS"]


@dataclass
class SpectrumReport:
    m: int
    lam: float
    sigma: float
    omega: float
    rows: list
    decreasing: bool

    @property
    def passed(self) -> bool:
        return self.decreasing and all(r.passed for r in self.rows)


def cone_weyl_residual(
    cone: Cone,
    m: int,
    lam: float,
    R_sequence: Optional[Sequence[float]] = None,
    sigma: float = 0.1,
    kernel: str = "bump",
) -> SpectrumReport:
    """Residuals of the cone Weyl sequence ``phi_k = upsilon_k(r)`` through the
    link-volume factorisation."""
    if m != cone.m:
        raise ValueError("m does not match the cone")
    beta(m, lam)  # rejects lam <= (m-1)^2/4
    Rs = list(R_sequence) if R_sequence is not None else default_R_sequence()
    check_doubling(Rs)
    rows = []
    for k, R in enumerate(Rs):
        ints = weighted_integrals(weyl_profile(m, lam, R, sigma, kernel), lam)
        res, norm = cone.omega * ints.residual, cone.omega * ints.norm
        eps = epsilon_R(m, lam, R)
        rows.append(SpectrumRow(k, float(R), res, norm, res / norm, eps, 4.0 * eps, bool(res <= 4.0 * eps * norm)))
    ratios = [r.ratio for r in rows]
    decreasing = all(a > b for a, b in zip(ratios, ratios[1:]))
    return SpectrumReport(m, lam, sigma, cone.omega, rows, decreasing)


# -- direct 2-D quadrature ----------------------------------------------------


def direct_cone_integrals(cone: Cone, profile: RadialProfile, lam: float, panels: int = 0, n_angles: int = 64):
    """Residual and norm of ``profile(r)`` on a 2-D cone by quadrature in the
    embedding.

    Coordinates ``(u, t)`` with ``tau = 1 - e^{-u}`` and ``t`` the link chart
    parameter; the metric is pulled back from the ball, and the Laplace-Beltrami
    operator is taken in divergence form with the outer ``u``-derivative by a
    fourth-order central difference.
    """
    if cone.m != 2 or cone.link is None:
        raise ValueError("direct quadrature is implemented for curve links")
    link = cone.link
    a, b = profile.support
    # u from r: 1 - tanh(r/2) = 2 / (e^r + 1)
    ua, ub = np.log1p(np.exp(a)) - np.log(2.0), np.log1p(np.exp(b)) - np.log(2.0)
    breaks = tuple(np.log1p(np.exp(np.asarray(profile.breakpoints, dtype=float))) - np.log(2.0))
    if panels == 0:
        panels = int(np.ceil(20 * (ub - ua) * max(1.0, np.sqrt(max(lam, 1.0)))))
    rule = QuadratureRule(ua, ub, panels, GL_ORDER, breaks)
    u, wu = rule.nodes_weights()
    t = 2 * np.pi * np.arange(n_angles) / n_angles
    wt = np.full(n_angles, 2 * np.pi / n_angles)
    z = link(t)
    dz = link.derivative(t)
    link_speed = np.linalg.norm(dz, axis=-1)
    if np.max(np.abs(np.sum(z * dz, axis=-1))) > 1e-12:
        raise ValueError("link derivative must be tangent to the sphere")

    def geometry(u):
        e = np.exp(-u)
        tau = -np.expm1(-u)
        phi = 0.5 * e * (2.0 - e)  # (1 - tau^2)/2 without cancellation
        r = u + np.log(2.0 - e)
        return e, tau, phi, r

    def flux(u):
        # sqrt(g) g^{uu} d_u f per unit link speed: (tau |z'| e / phi^2) (phi^2 / e^2) f'(r) r'(u)
        e, tau, phi, r = geometry(u)
        dr = e / phi
        _, df, _ = profile(r)
        return tau / e * df * dr

    e, tau, phi, r = geometry(u)
    h = 1e-3
    dflux = (-flux(u + 2 * h) + 8 * flux(u + h) - 8 * flux(u - h) + flux(u - 2 * h)) / (12 * h)
    sqrt_g_unit = tau * e / phi**2
    v, _, _ = profile(r)
    Lv = dflux / sqrt_g_unit + lam * v
    # area element sqrt(g) = tau |z'(t)| e^{-u} / phi^2
    area = np.outer(wu * sqrt_g_unit, wt * link_speed)
    residual = float(np.sum(area * (np.abs(Lv) ** 2)[:, None]))
    norm = float(np.sum(area * (np.abs(v) ** 2)[:, None]))
    return residual, norm


# -- volume comparison --------------------------------------------------------


@dataclass
class VolumeComparison:
    sigma_integral: float
    cone_integral: float
    eps_hat: float


def ray_volume_density(patch: ImmersedPatch, r: np.ndarray, n_directions: int):
    """Parameter points and volume density on a (radius, direction) grid.

    Returns ``U`` of shape ``(len(r), D, m)`` and ``density`` of shape
    ``(len(r), D)`` such that ``sum(w_r * w_d * density * g(U))`` integrates
    ``g`` against the induced hyperbolic volume for radial weights ``w_r`` and
    the returned direction weights ``w_d``.
    """
    dirs = directions(patch.m, n_directions)
    if patch.m == 2:
        wd = np.full(len(dirs), 2 * np.pi / len(dirs))
    else:
        wd = np.full(len(dirs), sphere_volume(patch.m) / len(dirs))
    U = ray_parameters(patch, dirs, r)
    if not np.all(np.isfinite(U)):
        raise PreconditionError("radial range reaches past the sampled patch")
    flat = U.reshape(-1, patch.m)
    x = patch(flat)
    J = patch.jac(flat)
    rho = np.linalg.norm(flat, axis=-1)
    nx = np.linalg.norm(x, axis=-1)
    phi = 0.5 * (1.0 - nx) * (1.0 + nx)
    d = np.repeat(dirs[None, :, :], len(r), axis=0).reshape(-1, patch.m)
    dr_drho = np.einsum("nd,nd->n", x / nx[:, None], np.einsum("ndi,ni->nd", J, d)) / phi
    vol = np.sqrt(np.linalg.det(np.einsum("ndi,ndj->nij", J, J))) / phi**patch.m
    density = (vol * rho ** (patch.m - 1) / dr_drho).reshape(len(r), len(dirs))
    return U, density, wd


def _patch_radial_integral(patch: ImmersedPatch, profile: RadialProfile, n_directions: int, panels: int) -> float:
    a, b = profile.support
    rule = QuadratureRule(a, b, panels, GL_ORDER, tuple(getattr(profile, "breakpoints", ())))
    r, wr = rule.nodes_weights()
    _, density, wd = ray_volume_density(patch, r, n_directions)
    f = np.real(profile(r)[0])
    return float(np.sum(wr[:, None] * wd[None, :] * f[:, None] * density))


def volume_comparison(
    patches: Sequence[ImmersedPatch],
    cone: Cone,
    profile: RadialProfile,
    R: float,
    n_directions: int = 128,
    panels: int = 16,
) -> VolumeComparison:
    """``(int_Sigma f, int_C f, eps_hat)`` for a radial profile supported outside ``B_R``."""
    a, b = profile.support
    if a < R:
        raise PreconditionError(f"profile support starts at {a} inside B_R with R = {R}")
    rule = QuadratureRule(a, b, panels, GL_ORDER, tuple(getattr(profile, "breakpoints", ())))
    t, w = rule.nodes_weights()
    f = np.real(profile(t)[0])
    if np.any(f < 0):
        raise PreconditionError("profile must be nonnegative")
    cone_int = cone.omega * float(np.sum(w * f * np.exp((cone.m - 1) * log_sinh(t))))
    sigma_int = sum(_patch_radial_integral(p, profile, n_directions, panels) for p in patches)
    if cone_int == 0:
        eps = 0.0 if sigma_int == 0 else np.inf
    else:
        eps = abs(sigma_int - cone_int) / cone_int
    return VolumeComparison(sigma_int, cone_int, eps)
