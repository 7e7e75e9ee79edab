"""Batch runner: named scenarios, INI configs, CSV reports and exit codes.

Usage::

    hypspec <scenario> [options]
    hypspec --list

Exit codes: 0 when every assertion passes, 2 when one fails, 1 on input or
solver errors, 64 for an unknown scenario.

Every scenario writes ``<out>/<scenario>.csv``, ``<out>/<scenario>_summary.txt``
(one PASS/FAIL line per assertion) and, where a curve is natural, two-column
``<out>/<scenario>_<name>.dat`` files readable by gnuplot. CSV columns per
scenario are listed by ``hypspec <scenario> --help``.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Callable, Optional

import numpy as np

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_FAIL = 2
EXIT_USAGE = 64


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    scenario: str
    geometry: Optional[list] = None
    mesh: Optional[str] = None
    cloud: Optional[str] = None
    base: Optional[list] = None
    m: Optional[list] = None
    lam: Optional[list] = None
    excess: Optional[list] = None
    R: Optional[list] = None
    sigma: Optional[float] = None
    r: Optional[list] = None
    theta: Optional[list] = None
    samples: Optional[int] = None
    rings: Optional[int] = None
    angles: Optional[int] = None
    out: str = "results"
    tol: dict = field(default_factory=dict)
    threads: int = 1
    seed: int = 0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, list) and len(v) == 0:
                raise ConfigError(f"grid '{f.name}' is empty")

    def get(self, name, default):
        v = getattr(self, name)
        return default if v is None else v

    def tolerance(self, name, default):
        return float(self.tol.get(name, default))


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class ScenarioResult:
    header: list
    rows: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    plots: dict = field(default_factory=dict)

    def check(self, name, passed, detail=""):
        self.checks.append(Check(name, bool(passed), detail))

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


@dataclass
class Scenario:
    name: str
    run: Callable[[RunConfig], ScenarioResult]
    help: str
    header: list
    criterion: Optional[int] = None


SCENARIOS: dict = {}


def scenario(name, help, header, criterion=None):
    def deco(fn):
        SCENARIOS[name] = Scenario(name, fn, help, header, criterion)
        return fn

    return deco


def _pmap(fn, items, threads):
    """Order-preserving map; results never depend on the thread count."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def _patch(name):
    from .submanifold import builtin_patch

    return builtin_patch(name)


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "PASS" if v else "FAIL"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


# -- scenarios -----------------------------------------------------------------


from .radial import LEMMA_EST_HEADER  # noqa: E402


@scenario("verify-lemma-est", "window-function estimate on a grid of (m, lambda, R)", LEMMA_EST_HEADER, 1)
def run_lemma_est(cfg: RunConfig) -> ScenarioResult:
    from .radial import verify_lemma_est

    ms = [int(v) for v in cfg.get("m", [2, 3, 4, 5])]
    Rs = cfg.get("R", [20, 40, 80, 160])
    sigma = cfg.get("sigma", 0.0)
    tol = cfg.tolerance("ratio", 1e-6)
    cells = []
    for m in ms:
        lams = cfg.lam if cfg.lam is not None else [(m - 1) ** 2 / 4 + e for e in cfg.get("excess", [0.1, 1.0, 10.0])]
        cells += [(m, float(lam), float(R)) for lam in lams for R in Rs]
    t0 = time.perf_counter()
    reports = _pmap(lambda c: verify_lemma_est(c[0], c[1], c[2], sigma), cells, cfg.threads)
    elapsed = time.perf_counter() - t0
    res = ScenarioResult(LEMMA_EST_HEADER)
    for rep in reports:
        ok = rep.ratio <= 1 + tol
        res.rows.append(rep.row()[:-1] + [ok])
        res.check(f"m={rep.m} lambda={rep.lam:g} R={rep.R:g}", ok, f"ratio={rep.ratio:.3e}")
        res.plots.setdefault(f"ratio_m{rep.m}_lam{rep.lam:g}", []).append((rep.R, rep.ratio))
    print(f"{len(cells)} cells in {elapsed:.2f} s")
    return res


@scenario("psi-exactness", "residual of the radial model solution at random (m, lambda, t)", ["m", "lambda", "t", "residual", "PASS"], 2)
def run_psi(cfg: RunConfig) -> ScenarioResult:
    from .radial import psi_residual

    rng = np.random.default_rng(cfg.seed)
    n = cfg.get("samples", 1000)
    tol = cfg.tolerance("psi", 1e-10)
    ms = cfg.get("m", [2, 3, 4, 5, 6])
    res = ScenarioResult(["m", "lambda", "t", "residual", "PASS"])
    worst = 0.0
    for _ in range(n):
        m = int(rng.choice(ms))
        lam = (m - 1) ** 2 / 4 + rng.uniform(0.01, 20.0)
        t = rng.uniform(0.05, 60.0)
        e = float(psi_residual(m, lam, t))
        worst = max(worst, e)
        res.rows.append([m, lam, t, e, e < tol])
    res.check(f"max residual over {n} samples < {tol:g}", worst < tol, f"max={worst:.2e}")
    return res


@scenario("iso-profile", "isoperimetric profile of hyperbolic balls", ["m", "t", "fprime", "ode_residual", "ball_ratio"], 3)
def run_iso(cfg: RunConfig) -> ScenarioResult:
    from .radial import ball_cheeger, isoperimetric_profile

    ms = [int(v) for v in cfg.get("m", [2, 3, 4, 5])]
    ts = np.linspace(0.25, 30.0, 60) if cfg.r is None else np.asarray(cfg.r, float)
    res = ScenarioResult(["m", "t", "fprime", "ode_residual", "ball_ratio"])
    tol_ode = cfg.tolerance("ode", 1e-9)
    for m in ms:
        prof = isoperimetric_profile(m)
        fp = prof.fprime(ts)
        ode = prof.ode_residual(ts)
        for t, a, b in zip(ts, fp, ode):
            res.rows.append([m, t, a, b, 1.0 / a])
        res.plots[f"ball_ratio_m{m}"] = list(zip(ts, 1.0 / fp))
        res.check(f"m={m} ODE residual < {tol_ode:g}", ode.max() < tol_ode, f"max={ode.max():.2e}")
        h = ball_cheeger(m, 30.0)
        res.check(f"m={m} ball ratio at R=30 -> m-1", abs(h - (m - 1)) < cfg.tolerance("cheeger", 1e-6), f"{h:.12f}")
    prof = isoperimetric_profile(2)
    for R in (0.5, 2.0, 10.0, 30.0):
        d = abs(1 / prof.fprime(R)[0] - 1 / np.tanh(R / 2))
        res.check(f"m=2 1/f'({R:g}) = coth({R / 2:g})", d < cfg.tolerance("coth", 1e-10), f"diff={d:.1e}")
    return res


def _disk_samples(rng, n, m, radius):
    d = rng.normal(size=(n, m))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return d * radius * rng.uniform(0, 1, (n, 1)) ** (1.0 / m)


CURVATURE_GEOMETRIES = ["geodesic-h2", "geodesic-h2-b4", "geodesic-h3-b5", "cap-90", "cap-60", "cap-57", "graph-one", "graph-u1"]
CAP_THETA = {"cap-90": np.pi / 2, "cap-60": np.pi / 3, "cap-57": 1.0}


@scenario(
    "mean-curvature",
    "conformal mean-curvature relation and tilted-cap diagnostics",
    ["geometry", "x_norm", "H_euclidean", "H_hyperbolic", "conformal_residual"],
    4,
)
def run_mean_curvature(cfg: RunConfig) -> ScenarioResult:
    from .submanifold import directions, mean_curvature, orthogonality_defect, ray_parameters

    rng = np.random.default_rng(cfg.seed)
    n = cfg.get("samples", 100)
    res = ScenarioResult(["geometry", "x_norm", "H_euclidean", "H_hyperbolic", "conformal_residual"])
    for name in cfg.get("geometry", CURVATURE_GEOMETRIES):
        p = _patch(name)
        U = _disk_samples(rng, n, p.m, 0.98 * p.u_max)
        rep = mean_curvature(p, U)
        for x, he, hh, c in zip(rep.points, rep.norm_euclidean, rep.norm_hyperbolic, rep.conformal_residual):
            res.rows.append([name, np.linalg.norm(x), he, hh, c])
        tol = cfg.tolerance("curvature", rep.tolerance)
        res.check(f"{name} conformal residual < {tol:g}", rep.conformal_residual.max() < tol, f"max={rep.conformal_residual.max():.2e}")
        if name.startswith("geodesic") or name == "cap-90":
            hmax = rep.norm_hyperbolic.max()
            res.check(f"{name} |H_g| < 1e-6", hmax < 1e-6, f"max={hmax:.2e}")
        elif name in CAP_THETA:
            theta = CAP_THETA[name]
            spread = float(np.ptp(rep.norm_hyperbolic))
            res.check(f"{name} |H_g| constant", spread < cfg.tolerance("cap_spread", 1e-4), f"spread={spread:.1e}")
            level = 2 * np.arctanh(1 - 1e-6)
            Ub = ray_parameters(p, directions(p.m, 16), np.array([level])).reshape(-1, p.m)
            d = orthogonality_defect(p, Ub)
            rel = float(np.max(np.abs(d - np.cos(theta))) / np.cos(theta))
            res.check(f"{name} orthogonality defect -> cos(theta)", rel < cfg.tolerance("defect", 0.02), f"rel={rel:.1e}")
    return res


@scenario("epsilon-decay", "sampled sup |H| outside growing balls", ["geometry", "r", "eps_r", "samples_outside"], 5)
def run_epsilon_decay(cfg: RunConfig) -> ScenarioResult:
    from .submanifold import epsilon_r

    rs = cfg.get("r", [2.0, 4.0, 6.0, 8.0])
    res = ScenarioResult(["geometry", "r", "eps_r", "samples_outside"])

    def one(name):
        p = _patch(name)
        cache = {}
        return name, p, [epsilon_r([p], np.zeros(p.ambient), r, cache=cache) for r in rs]

    for name, p, reps in _pmap(one, cfg.get("geometry", ["graph-one", "graph-u1", "graph-b4", "cap-60"]), cfg.threads):
        vals = [e.value for e in reps]
        for r, e in zip(rs, reps):
            res.rows.append([name, r, e.value, e.samples_outside])
        res.plots[f"eps_{name}"] = list(zip(rs, vals))
        if name in CAP_THETA and name != "cap-90":
            level = 0.4 * p.m * np.cos(CAP_THETA[name])
            res.check(f"{name} plateaus above {level:.3g}", min(vals) > level, f"min={min(vals):.4f}")
        elif name.startswith("geodesic") or name == "cap-90":
            res.check(f"{name} eps_r < 1e-6", max(vals) < 1e-6, f"max={max(vals):.1e}")
        else:
            dec = all(a > b for a, b in zip(vals, vals[1:]))
            res.check(f"{name} strictly decreasing", dec, " ".join(f"{v:.3e}" for v in vals))
    return res


def _curves():
    from .boundary import circle, line, three_halves_graph

    return {"line": (line(), [0.3, 0.0]), "circle": (circle(), [1.0, 0.0]), "three-halves": (three_halves_graph(), [0.0, 0.0])}


@scenario(
    "tangent-cone",
    "tangent cones at the ideal boundary and the distance ratio of boundary curves",
    ["case", "scale", "opening_deg", "defect_deg"],
    6,
)
def run_tangent_cone(cfg: RunConfig) -> ScenarioResult:
    from .boundary import (
        circle,
        delta_ratio,
        hemisphere,
        line,
        load_point_cloud,
        tangent_cone_estimate,
        tilted_strip,
        vertical_strip,
    )

    tol = cfg.tolerance("angle", 1.0)
    res = ScenarioResult(["case", "scale", "opening_deg", "defect_deg"])
    if cfg.cloud is not None:
        path = Path(cfg.cloud)
        if not path.is_file():
            raise FileNotFoundError(f"point cloud {path} not found")
        surf = load_point_cloud(path)
        base = cfg.get("base", [0.0] * (surf.m + 1))[: surf.m + 1]
        est = tangent_cone_estimate([surf], base)
        for rec in est.records:
            res.rows.append(["cloud", rec.scale, rec.opening_deg, rec.defect_deg])
        res.check("estimate stable over the finest scales", est.stable, f"opening={est.opening_deg:.3f} deg")
        return res
    cases = [
        ("hemisphere", hemisphere(), [1.0, 0.0, 0.0], circle(), 90.0, True),
        ("vertical-strip", vertical_strip(), [0.0, 0.0, 0.0], line(), 90.0, True),
        ("tilted-strip-45", tilted_strip(45.0), [0.2, 0.0, 0.0], line(), 45.0, False),
    ]
    for name, surf, base, gamma, angle, equality in cases:
        est = tangent_cone_estimate([surf], base, gamma=gamma)
        for rec in est.records:
            res.rows.append([name, rec.scale, rec.opening_deg, rec.defect_deg])
        res.plots[f"opening_{name}"] = [(rec.scale, rec.opening_deg) for rec in est.records]
        res.check(f"{name} opening {angle:g} +- {tol:g} deg", abs(est.opening_deg - angle) < tol, f"{est.opening_deg:.4f}")
        if equality:
            res.check(f"{name} cone equals tangent half-flat", est.tcone_check(tol))
        else:
            res.check(f"{name} cone equality rejected", not est.tcone_check(tol), f"defect={est.defect_deg:.2f} deg")
    for name, (gamma, p) in _curves().items():
        v = delta_ratio(gamma, p, 1e-4).value
        res.rows.append([f"delta-{name}", 1e-4, v, np.nan])
        res.check(f"delta/r for {name} at r=1e-4 > 0.99", v > cfg.tolerance("delta", 0.99), f"{v:.10f}")
    return res


@scenario(
    "delta-ratio",
    "delta(p, r)/r sweeps for the built-in boundary curves",
    ["curve", "r", "delta_over_r"],
)
def run_delta_ratio(cfg: RunConfig) -> ScenarioResult:
    from .boundary import delta_ratio

    rs = cfg.get("r", list(np.geomspace(1e-1, 1e-4, 7)))
    res = ScenarioResult(["curve", "r", "delta_over_r"])
    for name, (gamma, p) in _curves().items():
        vals = [delta_ratio(gamma, p, r).value for r in rs]
        res.rows += [[name, r, v] for r, v in zip(rs, vals)]
        res.plots[f"delta_{name}"] = list(zip(rs, vals))
        res.check(f"{name} delta/r <= 1", max(vals) <= 1 + 1e-9)
        res.check(f"{name} delta/r > 0.99 at r = {rs[-1]:g}", vals[-1] > 0.99, f"{vals[-1]:.10f}")
    return res


@scenario("barrier", "emptiness of half-balls around points off the boundary curve", ["surface", "x", "r", "dist", "violations"])
def run_barrier(cfg: RunConfig) -> ScenarioResult:
    from .boundary import barrier_check, circle, hemisphere

    gamma = circle()
    res = ScenarioResult(["surface", "x", "r", "dist", "violations"])
    for x in ([2.0, 0.0], [0.0, 0.5], [-1.6, 0.3]):
        d = gamma.distance(np.asarray(x))
        for frac in cfg.get("r", [0.5, 0.9]):
            rep = barrier_check([hemisphere()], gamma, x, frac * d)
            res.rows.append(["hemisphere", f"{x[0]:g};{x[1]:g}", rep.r, d, len(rep.violations)])
            res.check(f"B_r({x[0]:g},{x[1]:g}) empty at r = {frac:g} dist", rep.empty)
    return res


@scenario("cone-spectrum", "Weyl sequence on the cone over the boundary link", ["k", "R_k", "residual", "norm", "ratio", "eps_k", "PASS"], 7)
def run_cone(cfg: RunConfig) -> ScenarioResult:
    from .cone import SPECTRUM_HEADER, CircleLink, Cone, circle_cone, cone_weyl_residual, direct_cone_integrals, weyl_profile
    from .radial import weighted_integrals

    m = int(cfg.get("m", [2])[0])
    lam = float(cfg.get("lam", [2.0])[0])
    Rs = cfg.get("R", [20.0, 41.0, 83.0])
    sigma = cfg.get("sigma", 0.1)
    cone = circle_cone() if m == 2 else Cone(m)
    rep = cone_weyl_residual(cone, m, lam, Rs, sigma)
    res = ScenarioResult(SPECTRUM_HEADER)
    for row in rep.rows:
        res.rows.append(row.row())
        res.check(f"k={row.k} residual <= eps_k * norm", row.ratio <= row.eps_k, f"ratio={row.ratio:.3e} eps_k={row.eps_k:.3e}")
    res.plots["ratio"] = [(row.R, row.ratio) for row in rep.rows]
    res.check("ratios strictly decreasing", rep.decreasing)
    if m == 2:
        link = Cone(2, CircleLink(1.0, axis=(1.0, 1.0, 0.0), speed=0.3))
        tol = cfg.tolerance("direct", 1e-6)
        for R in Rs:
            prof = weyl_profile(m, lam, R, sigma)
            r2, n2 = direct_cone_integrals(link, prof, lam)
            ints = weighted_integrals(prof, lam)
            err = max(abs(r2 / (link.omega * ints.residual) - 1), abs(n2 / (link.omega * ints.norm) - 1))
            res.check(f"direct 2-D quadrature at R={R:g}", err < tol, f"rel={err:.1e}")
    return res


@scenario(
    "fem-spectrum",
    "Dirichlet bottom of truncated surfaces by finite elements",
    ["geometry", "R", "lambda0", "lambda0_fine", "slack", "bound", "interior_vertices", "residual", "PASS"],
    8,
)
def run_fem(cfg: RunConfig) -> ScenarioResult:
    from .mesh import HyperbolicMesh, dirichlet_bottom, refine_polar
    from .submanifold import epsilon_r

    header = ["geometry", "R", "lambda0", "lambda0_fine", "slack", "bound", "interior_vertices", "residual", "PASS"]
    res = ScenarioResult(header)
    if cfg.mesh is not None:
        path = Path(cfg.mesh)
        if not path.is_file():
            raise FileNotFoundError(f"mesh file {path} not found")
        mesh = HyperbolicMesh.load(path)
        mesh.validate()
        rep = dirichlet_bottom(mesh, count=cfg.get("samples", 1))
        ok = bool(rep.residuals.max() < 1e-8 and rep.bottom >= 0)
        res.rows.append([str(path), np.nan, rep.bottom, np.nan, np.nan, np.nan, rep.n_interior, rep.residuals.max(), ok])
        res.check("eigenpairs converged", ok, f"lambda0={rep.bottom:.6f}")
        return res
    Rs = cfg.get("R", [4.0, 6.0, 8.0])
    rings, angles = cfg.get("rings", 80), cfg.get("angles", 128)
    for name in cfg.get("geometry", ["geodesic-h2"]):
        p = _patch(name)
        eps0 = epsilon_r([p], np.zeros(p.ambient), 0.0).value

        def one(R):
            coarse, fine = refine_polar(p, R, 0.0, rings, angles)
            return coarse, dirichlet_bottom(coarse, fine_mesh=fine, eps_r=eps0)

        out = _pmap(one, Rs, cfg.threads)
        lams = []
        for R, (mesh, rep) in zip(Rs, out):
            rec = rep.records
            lams.append(rep.bottom)
            res.rows.append([name, R, rep.bottom, rec["lambda0_fine"], rec["slack"], rec["bound"], rep.n_interior, rep.residuals[0], rec["bound_ok"]])
            res.check(f"{name} R={R:g} lambda0 >= bound - slack", rec["bound_ok"], f"{rep.bottom:.5f} vs {rec['bound']:.5f} - {rec['slack']:.1e}")
        res.plots[f"lambda0_{name}"] = list(zip(Rs, lams))
        res.check(f"{name} lambda0 decreasing in R", all(a > b for a, b in zip(lams, lams[1:])))
        if name == "geodesic-h2" and 8.0 in Rs:
            i = Rs.index(8.0)
            res.check("lambda0(R=8) <= 0.40", lams[i] <= cfg.tolerance("fem_upper", 0.40), f"{lams[i]:.5f}")
            res.check("R=8 mesh has >= 1e4 interior vertices", out[i][1].n_interior >= 10_000, str(out[i][1].n_interior))
    return res


@scenario(
    "cheeger",
    "candidate-domain ratios against the ball bound on an annulus",
    ["label", "simplices", "volume", "perimeter", "ratio", "PASS"],
    9,
)
def run_cheeger(cfg: RunConfig) -> ScenarioResult:
    from .isoperimetry import CandidateFamily, candidate_domains, check_theorem_tc, cheeger_to_lambda, mesh_annulus
    from .mesh import dirichlet_bottom, polar_mesh, refine_polar
    from .submanifold import epsilon_r

    r_in = float(cfg.get("r", [2.0])[0])
    R = float(cfg.get("R", [8.0])[0])
    res = ScenarioResult(["label", "simplices", "volume", "perimeter", "ratio", "PASS"])
    n = cfg.get("samples", 210)
    q = max(1, n // 21)
    fam = CandidateFamily(6 * q, 6 * q, 5 * q, 4 * q, seed=cfg.seed)
    for name in cfg.get("geometry", ["geodesic-h2"]):
        p = _patch(name)
        mesh = polar_mesh(p, R, r_in, cfg.get("rings", 60), cfg.get("angles", 128))
        eps = epsilon_r([p], np.zeros(p.ambient), r_in).value
        rep = check_theorem_tc(mesh, R, eps, candidate_domains(mesh, fam), cfg.tolerance("iso_slack", 0.02))
        for s in rep.samples:
            res.rows.append(s.row() + [s.ratio >= rep.bound - rep.slack])
        res.check(
            f"{name} all {len(rep.samples)} candidates >= 1/f'(R) - eps_r - slack",
            rep.passed,
            f"min={rep.min_ratio:.5f} ({rep.argmin}) bound={rep.bound:.5f} slack={rep.slack:.4f}",
        )
        res.check(f"{name} at least 200 candidates", len(rep.samples) >= 200, str(len(rep.samples)))
        coarse, fine = refine_polar(p, R, r_in, 24, 48)
        spec = dirichlet_bottom(coarse, fine_mesh=fine)
        chain = cheeger_to_lambda(spec, mesh_annulus(coarse), r_in, R, eps, p.m, tc_report=rep)
        res.check(f"{name} lambda0(annulus) >= (m-1-eps_r)^2/4 - slack", chain.passed, f"{chain.lambda0:.5f} vs {chain.bound:.5f}")
        res.check(f"{name} Cheeger inequality consistent", chain.cheeger_consistent)
    return res


@scenario(
    "laplacian-error",
    "normalised radial Laplacian error |E|/(|f''|+|f'|) by radial band",
    ["geometry", "band_lo", "band_hi", "sup_ratio"],
    10,
)
def run_laplacian_error(cfg: RunConfig) -> ScenarioResult:
    from .mesh import band_sup, polar_mesh, radial_laplacian_error

    bands = [(1.0, 2.0), (3.0, 4.0), (5.0, 6.0), (7.0, 8.0)]
    res = ScenarioResult(["geometry", "band_lo", "band_hi", "sup_ratio"])

    def one(name):
        p = _patch(name)
        mesh = polar_mesh(p, 8.5, rings=cfg.get("rings", 85), n_angles=cfg.get("angles", 32))
        samples = radial_laplacian_error(mesh)
        return name, [band_sup(samples, a, b) for a, b in bands]

    for name, sups in _pmap(one, cfg.get("geometry", ["geodesic-h2", "graph-one", "cap-60"]), cfg.threads):
        for (a, b), s in zip(bands, sups):
            res.rows.append([name, a, b, s])
        res.plots[f"band_sup_{name}"] = [(0.5 * (a + b), s) for (a, b), s in zip(bands, sups)]
        tail = sups[1:]
        if name.startswith("geodesic") or name == "cap-90":
            res.check(f"{name} ratio < 5e-2 on [3, 8]", max(tail) < cfg.tolerance("lap_geodesic", 5e-2), f"max={max(tail):.1e}")
        elif name in CAP_THETA:
            res.check(f"{name} control does not decrease", not all(x > y for x, y in zip(tail, tail[1:])), " ".join(f"{v:.3e}" for v in tail))
        else:
            res.check(f"{name} decreasing over [3,4], [5,6], [7,8]", all(x > y for x, y in zip(tail, tail[1:])), " ".join(f"{v:.3e}" for v in tail))
    return res


@scenario(
    "sigma-spectrum",
    "Weyl sequence transplanted to a surface",
    ["geometry", "k", "R_k", "residual", "norm", "ratio", "cone_ratio", "eps_k", "eps_hat", "bound", "PASS"],
)
def run_sigma(cfg: RunConfig) -> ScenarioResult:
    from .mesh import PreconditionError, sigma_weyl_residual

    lam = float(cfg.get("lam", [2.0])[0])
    res = ScenarioResult(["geometry", "k", "R_k", "residual", "norm", "ratio", "cone_ratio", "eps_k", "eps_hat", "bound", "PASS"])
    for name in cfg.get("geometry", ["geodesic-h2", "graph-one", "cap-60"]):
        p = _patch(name)
        try:
            rep = sigma_weyl_residual(p, p.m, lam, cfg.R, cfg.get("sigma", 0.03))
        except PreconditionError as exc:
            res.rows.append([name] + [np.nan] * 9 + [False])
            expected = name in CAP_THETA and name != "cap-90"
            res.check(f"{name} hypotheses rejected" if expected else f"{name} hypotheses", expected, str(exc))
            continue
        for row in rep.rows:
            res.rows.append([name, row.k, row.R, row.residual, row.norm, row.ratio, row.cone_ratio, row.eps_k, row.eps_hat, row.bound, rep.passed])
        res.check(f"{name} ratios decreasing and final ratio below bound", rep.passed)
    return res


@scenario("volume-compare", "relative deviation of surface area density from the cone", ["geometry", "R", "eps_hat"])
def run_volume_compare(cfg: RunConfig) -> ScenarioResult:
    from .cone import circle_cone, volume_comparison
    from .radial import radial_bump

    Rs = cfg.get("R", [2.0, 4.0, 6.0, 8.0])
    res = ScenarioResult(["geometry", "R", "eps_hat"])
    for name in cfg.get("geometry", ["graph-one", "graph-u1"]):
        p = _patch(name)
        vals = [volume_comparison([p], circle_cone(), radial_bump(R, R + 2), R).eps_hat for R in Rs]
        res.rows += [[name, R, v] for R, v in zip(Rs, vals)]
        res.plots[f"eps_hat_{name}"] = list(zip(Rs, vals))
        res.check(f"{name} deviation decreasing", all(a > b for a, b in zip(vals, vals[1:])), " ".join(f"{v:.2e}" for v in vals))
    return res


# -- config and entry point ----------------------------------------------------


LIST_KEYS = {"geometry": str, "base": float, "m": int, "lam": float, "excess": float, "R": float, "r": float, "theta": float}
SCALAR_KEYS = {"mesh": str, "cloud": str, "sigma": float, "samples": int, "rings": int, "angles": int, "out": str, "threads": int, "seed": int}


def _parse_list(text, kind):
    items = [s.strip() for s in str(text).split(",") if s.strip()]
    try:
        return [kind(s) for s in items]
    except ValueError as exc:
        raise ConfigError(f"bad list value {text!r}: {exc}") from None


def _apply(values: dict, key: str, raw):
    key = {"lambda": "lam"}.get(key, key)
    if key.startswith("tol_") or key.startswith("tol."):
        values.setdefault("tol", {})[key[4:]] = float(raw)
    elif key == "tol":
        for item in _parse_list(raw, str):
            k, _, v = item.partition("=")
            values.setdefault("tol", {})[k.strip()] = float(v)
    elif key in LIST_KEYS:
        values[key] = _parse_list(raw, LIST_KEYS[key])
    elif key in SCALAR_KEYS:
        try:
            values[key] = SCALAR_KEYS[key](raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}") from None
    else:
        raise ConfigError(f"unknown config key {key!r}")


def load_config(path, scenario: str) -> dict:
    """``[run]`` holds shared keys, a ``[<scenario>]`` section overrides them."""
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"config file {p} not found")
    parser = configparser.ConfigParser()
    parser.optionxform = str
    parser.read(p)
    values: dict = {}
    for section in ("run", scenario):
        if parser.has_section(section):
            for k, v in parser.items(section):
                _apply(values, k, v)
    return values


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _scenario_parser(sc: Scenario) -> argparse.ArgumentParser:
    ap = _Parser(
        prog=f"hypspec {sc.name}",
        description=sc.help,
        epilog="CSV columns: " + ", ".join(sc.header),
    )
    ap.add_argument("--config", help="INI file with [run] and [%s] sections" % sc.name)
    ap.add_argument("--geometry", help="comma-separated built-in patch ids")
    ap.add_argument("--mesh", help="mesh file (fem-spectrum)")
    ap.add_argument("--cloud", help="point cloud file (tangent-cone)")
    ap.add_argument("--base", help="base point of a point-cloud tangent cone")
    ap.add_argument("--m", help="dimensions")
    ap.add_argument("--lambda", dest="lambda", help="spectral parameters")
    ap.add_argument("--excess", help="lambda minus (m-1)^2/4, used when --lambda is absent")
    ap.add_argument("--R", help="outer radii")
    ap.add_argument("--r", help="inner radii or sample radii")
    ap.add_argument("--theta", help="angles in degrees")
    ap.add_argument("--sigma", help="mollification width")
    ap.add_argument("--samples", help="sample count")
    ap.add_argument("--rings", help="polar mesh rings")
    ap.add_argument("--angles", help="polar mesh angles")
    ap.add_argument("--out", help="output directory (default results)")
    ap.add_argument("--tol", action="append", help="tolerance override name=value (repeatable)")
    ap.add_argument("--threads", help="parallelism degree (HYPSPEC_THREADS overrides)")
    ap.add_argument("--seed", help="random seed")
    return ap


def parse_config(name: str, argv: list) -> RunConfig:
    sc = SCENARIOS[name]
    ns = _scenario_parser(sc).parse_args(argv)
    values = load_config(ns.config, name) if ns.config else {}
    for key, raw in vars(ns).items():
        if key == "config" or raw is None:
            continue
        if key == "tol":
            for item in raw:
                _apply(values, "tol", item)
        else:
            _apply(values, key, raw)
    env = os.environ.get("HYPSPEC_THREADS")
    if env:
        _apply(values, "threads", env)
    if values.get("threads", 1) < 1:
        raise ConfigError("threads must be positive")
    return RunConfig(scenario=name, **values)


def write_reports(cfg: RunConfig, result: ScenarioResult) -> None:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / f"{cfg.scenario}.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(result.header)
        for row in result.rows:
            w.writerow([_fmt(v) for v in row])
    with open(out / f"{cfg.scenario}_summary.txt", "w") as fh:
        for c in result.checks:
            fh.write(f"{'PASS' if c.passed else 'FAIL'}  {c.name}" + (f"  [{c.detail}]" if c.detail else "") + "\n")
    for key, pts in result.plots.items():
        with open(out / f"{cfg.scenario}_{key}.dat", "w") as fh:
            fh.write(f"# {key}\n")
            for x, y in pts:
                fh.write(f"{_fmt(x)} {_fmt(y)}\n")


def run(cfg: RunConfig) -> int:
    """Execute one scenario, write its reports and return the exit code."""
    if cfg.scenario == "all":
        codes = []
        for name in SCENARIOS:
            print(f"== {name}")
            sub = RunConfig(scenario=name, out=cfg.out, tol=dict(cfg.tol), threads=cfg.threads, seed=cfg.seed)
            codes.append(run(sub))
        return EXIT_ERROR if EXIT_ERROR in codes else (EXIT_FAIL if EXIT_FAIL in codes else EXIT_OK)
    if cfg.scenario not in SCENARIOS:
        print(f"unknown scenario {cfg.scenario!r}", file=sys.stderr)
        return EXIT_USAGE
    try:
        result = SCENARIOS[cfg.scenario].run(cfg)
    except (OSError, ValueError, RuntimeError, ArithmeticError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    write_reports(cfg, result)
    for c in result.checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}" + (f"  [{c.detail}]" if c.detail else ""))
    return EXIT_OK if result.passed else EXIT_FAIL


def _usage() -> str:
    lines = ["usage: hypspec <scenario> [options] | hypspec --list", "", "scenarios:"]
    for sc in SCENARIOS.values():
        tag = f"  (criterion {sc.criterion})" if sc.criterion else ""
        lines.append(f"  {sc.name:18s} {sc.help}{tag}")
    lines.append(f"  {'all':18s} every scenario above with defaults")
    return "\n".join(lines)


def main(argv: Optional[list] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] in ("-h", "--help"):
        print(_usage())
        return EXIT_OK if argv else EXIT_USAGE
    if argv[0] == "--list":
        for sc in SCENARIOS.values():
            print(sc.name if sc.criterion is None else f"{sc.name}\tcriterion {sc.criterion}")
        print("all")
        return EXIT_OK
    name, rest = argv[0], argv[1:]
    if name != "all" and name not in SCENARIOS:
        print(f"unknown scenario {name!r}\n\n{_usage()}", file=sys.stderr)
        return EXIT_USAGE
    try:
        if name == "all":
            values = {}
            ns = _scenario_parser(Scenario("all", None, "every scenario", [])).parse_args(rest)
            for key in ("out", "threads", "seed"):
                if getattr(ns, key) is not None:
                    _apply(values, key, getattr(ns, key))
            for item in ns.tol or []:
                _apply(values, "tol", item)
            env = os.environ.get("HYPSPEC_THREADS")
            if env:
                _apply(values, "threads", env)
            cfg = RunConfig(scenario="all", **values)
        else:
            cfg = parse_config(name, rest)
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_ERROR
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
