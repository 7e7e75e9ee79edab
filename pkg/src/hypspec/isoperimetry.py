"""Perimeter-to-volume ratios of element domains and Cheeger-side checks.

A candidate domain is a boolean indicator over the simplices of a
:class:`~hypspec.mesh.HyperbolicMesh`. Volumes come from the per-simplex
metrics used by the finite-element assembly; boundary facets are measured
with the induced metric at their own midpoints, so a ring edge of a polar
mesh has exactly the length of the circular arc it represents.

Every candidate ratio is an upper bound for the Cheeger constant of the host
region, so checks here can only fail to find a counterexample.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial
from typing import Optional, Sequence

import numpy as np

from .mesh import HyperbolicMesh, MeshSpectrumReport, _phi, polar_metric, reference_metrics
from .models import ball_distance
from .radial import IsoperimetricProfile, PsiProfile


class ContainmentError(ValueError):
    """Candidate domain reaches the Dirichlet boundary of the host mesh."""


@dataclass
class IsoperimetricSample:
    label: str
    volume: float
    perimeter: float
    ratio: float
    n_simplices: int

    def row(self) -> list:
        return [self.label, self.n_simplices, self.volume, self.perimeter, self.ratio]


SAMPLE_HEADER = ["label", "simplices", "volume", "perimeter", "ratio"]


# -- geometry of element domains ------------------------------------------------


def simplex_volumes(mesh: HyperbolicMesh) -> np.ndarray:
    M = reference_metrics(mesh)
    return np.sqrt(np.linalg.det(M)) / factorial(mesh.m)


def _facets(mesh: HyperbolicMesh):
    """All (simplex, local facet) pairs with sorted vertex keys."""
    m = mesh.m
    S = mesh.simplices
    keys = np.concatenate([np.sort(np.delete(S, j, axis=1), axis=1) for j in range(m + 1)])
    owner = np.tile(np.arange(len(S)), m + 1)
    local = np.repeat(np.arange(m + 1), len(S))
    return keys, owner, local


def _facet_areas(mesh: HyperbolicMesh, keys: np.ndarray, owners: np.ndarray) -> np.ndarray:
    """(m-1)-volumes of facets with the induced metric at the facet midpoint."""
    m = mesh.m
    k = m - 1
    out = np.empty(len(keys))
    if len(keys) == 0:
        return out
    polar = np.zeros(len(keys), dtype=bool)
    if mesh.polar_simplex is not None:
        polar = mesh.polar_simplex[owners]
    if np.any(polar):
        Q = mesh.polar[keys[polar]]
        F = np.swapaxes(Q[:, 1:] - Q[:, :1], 1, 2)
        F[:, 1, :] = np.mod(F[:, 1, :] + np.pi, 2 * np.pi) - np.pi
        mid = Q[:, 0] + F.sum(axis=2) / m
        G = polar_metric(mesh.patch, mid[:, 0], mid[:, 1])
        out[polar] = _gram_volume(F, G, k)
    rest = ~polar
    if np.any(rest):
        if mesh.patch is not None and mesh.params is not None:
            P = mesh.params[keys[rest]]
            F = np.swapaxes(P[:, 1:] - P[:, :1], 1, 2)
            mid = P.mean(axis=1)
            J = mesh.patch.jac(mid)
            G = np.einsum("sdi,sdj->sij", J, J)
            if mesh.metric == "hyperbolic":
                G = G / _phi(mesh.patch(mid))[:, None, None] ** 2
        else:
            X = mesh.points[keys[rest]]
            F = np.swapaxes(X[:, 1:] - X[:, :1], 1, 2)
            G = np.broadcast_to(np.eye(X.shape[2]), (len(X), X.shape[2], X.shape[2])).copy()
            if mesh.metric == "hyperbolic":
                G = G / _phi(X.mean(axis=1))[:, None, None] ** 2
        out[rest] = _gram_volume(F, G, k)
    return out


def _gram_volume(F, G, k):
    gram = np.einsum("sai,sab,sbj->sij", F, G, F)
    return np.sqrt(np.maximum(np.linalg.det(gram), 0.0)) / factorial(k)


def domain_ratio(mesh: HyperbolicMesh, indicator, label: str = "domain", volumes: Optional[np.ndarray] = None) -> IsoperimetricSample:
    """Volume, relative boundary area and their ratio for an element domain."""
    ind = np.asarray(indicator, dtype=bool)
    if ind.shape != (len(mesh.simplices),):
        raise ValueError("indicator must have one entry per simplex")
    if not ind.any():
        raise ValueError("empty domain")
    if np.any(mesh.boundary[mesh.simplices[ind]]):
        raise ContainmentError(f"domain '{label}' touches the host boundary")
    vols = simplex_volumes(mesh) if volumes is None else volumes
    keys, owner, _ = _facets(mesh)
    sel = ind[owner]
    k_sel = keys[sel]
    uniq, inv, counts = np.unique(k_sel, axis=0, return_inverse=True, return_counts=True)
    # facets met once from inside the domain form its boundary
    once = counts[np.ravel(inv)] == 1
    area = float(np.sum(_facet_areas(mesh, k_sel[once], owner[sel][once])))
    vol = float(np.sum(vols[ind]))
    return IsoperimetricSample(label, vol, area, area / vol, int(ind.sum()))


# -- candidate families ---------------------------------------------------------


@dataclass
class CandidateFamily:
    """Counts and seed for the default candidate domains on an annulus or disk."""

    sub_annuli: int = 60
    disks: int = 60
    unions: int = 50
    level_sets: int = 40
    seed: int = 0

    @property
    def total(self) -> int:
        return self.sub_annuli + self.disks + self.unions + self.level_sets


def _vertex_polar(mesh: HyperbolicMesh):
    r = mesh.radii()
    if mesh.polar is not None:
        return r, mesh.polar[:, 1]
    return r, np.zeros_like(r)


def candidate_domains(mesh: HyperbolicMesh, family: CandidateFamily = CandidateFamily()) -> list:
    """Labelled indicators: sub-annuli, metric balls, random unions of polar
    boxes and balls, and superlevel sets of oscillating radial functions.

    Only simplices without Dirichlet vertices are used, so every candidate is
    compactly contained by construction. Empty candidates are skipped.
    """
    rng = np.random.default_rng(family.seed)
    S = mesh.simplices
    inner = ~np.any(mesh.boundary[S], axis=1)
    r, theta = _vertex_polar(mesh)
    rS = r[S]
    free = ~mesh.boundary
    lo, hi = float(r[free].min()), float(r[free].max())
    pts = mesh.points
    n_free = np.flatnonzero(free)
    # far out, polar elements are long in the angular direction, so balls
    # select elements by centroid rather than by all vertices
    centroids = pts[S].mean(axis=1)
    out = []

    def draw(count, make):
        got = 0
        for _ in range(20 * count):
            if got == count:
                break
            label, ind = make()
            ind = ind & inner
            if ind.any():
                out.append((label, ind))
                got += 1

    def annulus():
        a, b = np.sort(rng.uniform(lo, hi, 2))
        return f"annulus[{a:.3f},{b:.3f}]", np.all((rS >= a) & (rS <= b), axis=1)

    def ball_indicator():
        c = pts[rng.choice(n_free)]
        rho = rng.uniform(0.2, 0.5 * (hi - lo))
        return rho, ball_distance(centroids, c[None, :]) <= rho

    def ball():
        rho, ind = ball_indicator()
        return f"ball[{rho:.3f}]", ind

    def union():
        ind = np.zeros(len(S), dtype=bool)
        for _ in range(rng.integers(2, 5)):
            if rng.random() < 0.5 and mesh.polar is not None:
                a, b = np.sort(rng.uniform(lo, hi, 2))
                t0 = rng.uniform(0, 2 * np.pi)
                w = rng.uniform(0.3, 2 * np.pi)
                dth = np.mod(theta[S] - t0, 2 * np.pi)
                ind |= np.all((rS >= a) & (rS <= b) & (dth <= w), axis=1)
            else:
                ind |= ball_indicator()[1]
        return f"union{len(out)}", ind

    def level():
        lam = 0.25 * (mesh.m - 1) ** 2 + rng.uniform(0.05, 4.0)
        v = PsiProfile(mesh.m, lam)(r)[0].real
        c = rng.uniform(0.0, 0.9) * float(np.max(v[free]))
        return f"level[{lam:.3f},{c:.3g}]", np.all(v[S] > c, axis=1)

    draw(family.sub_annuli, annulus)
    draw(family.disks, ball)
    draw(family.unions, union)
    draw(family.level_sets, level)
    return out


# -- Cheeger lower bound --------------------------------------------------------


@dataclass
class TheoremTCReport:
    """Candidate ratios against ``1/f'(R) - eps_r``.

    ``min_ratio`` is an upper bound for the Cheeger constant of the region;
    ``bound`` is the lower bound being tested.
    """

    R: float
    eps_r: float
    model: float
    bound: float
    slack: float
    samples: list
    failures: list = field(default_factory=list)

    @property
    def min_ratio(self) -> float:
        return min(s.ratio for s in self.samples)

    @property
    def argmin(self) -> str:
        return min(self.samples, key=lambda s: s.ratio).label

    @property
    def passed(self) -> bool:
        return not self.failures


def check_theorem_tc(
    mesh: HyperbolicMesh,
    R: float,
    eps_r: float,
    candidates: Optional[Sequence] = None,
    slack_fraction: float = 0.02,
) -> TheoremTCReport:
    """Test ``ratio >= 1/f'(R) - eps_r - slack`` on every candidate domain.

    ``candidates`` is a list of ``(label, indicator)``; the default family
    from :func:`candidate_domains` is used when omitted. The slack is
    ``slack_fraction`` of the bound.
    """
    if candidates is None:
        candidates = candidate_domains(mesh)
    if len(candidates) == 0:
        raise ValueError("empty candidate family")
    model = float(1.0 / IsoperimetricProfile(mesh.m).fprime(R)[0])
    bound = model - eps_r
    slack = slack_fraction * abs(bound)
    vols = simplex_volumes(mesh)
    samples = [domain_ratio(mesh, ind, label, vols) for label, ind in candidates]
    failures = [s.label for s in samples if s.ratio < bound - slack]
    return TheoremTCReport(float(R), float(eps_r), model, bound, slack, samples, failures)


# -- chaining to the spectrum --------------------------------------------------


@dataclass
class CheegerChain:
    """``lambda_0 >= h^2/4 >= (m - 1 - eps_r)^2 / 4`` at mesh level."""

    lambda0: float
    slack: float
    bound: float
    passed: bool
    bound_sequence: dict
    limit_bound: float
    cheeger_consistent: Optional[bool] = None


def mesh_annulus(mesh: HyperbolicMesh) -> tuple:
    """``(r, R)``: radii of the inner and outer Dirichlet boundary (``r = 0`` for a disk)."""
    rb = mesh.radii()[mesh.boundary]
    inner = float(rb.min())
    outer = float(rb.max())
    return (0.0 if np.isclose(inner, outer) else inner, outer)


def cheeger_to_lambda(
    report: MeshSpectrumReport,
    annulus: tuple,
    r: float,
    R: float,
    eps_r: float,
    m: int = 2,
    eps_sequence: Optional[dict] = None,
    tc_report: Optional[TheoremTCReport] = None,
) -> CheegerChain:
    """Chain the computed ``lambda_0`` of an annulus to the curvature bound.

    ``annulus`` is the ``(r, R)`` of the mesh behind ``report`` (see
    :func:`mesh_annulus`) and must match the requested radii. With
    ``eps_sequence`` (``{r: eps_r}``) the bound is also evaluated along
    ``r`` and at the largest ``r`` available; with ``tc_report`` the
    Cheeger inequality ``h_lower^2 / 4 <= lambda_0 + slack`` is checked.
    """
    if not (np.isclose(annulus[0], r, atol=1e-6) and np.isclose(annulus[1], R, atol=1e-6)):
        raise ValueError(f"spectrum computed on {annulus}, bound requested for {(r, R)}")
    slack = float(report.records.get("slack", 0.0))
    bound = 0.25 * max(m - 1 - eps_r, 0.0) ** 2
    seq = dict(sorted((eps_sequence or {r: eps_r}).items()))
    bounds = {rr: 0.25 * max(m - 1 - e, 0.0) ** 2 for rr, e in seq.items()}
    limit = bounds[max(bounds)]
    consistent = None
    if tc_report is not None:
        consistent = bool(0.25 * max(tc_report.bound, 0.0) ** 2 <= report.bottom + slack)
    return CheegerChain(report.bottom, slack, bound, bool(report.bottom >= bound - slack), bounds, limit, consistent)
