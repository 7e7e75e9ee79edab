import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from hypspec.boundary import (
    PreconditionError,
    ResolutionError,
    barrier_check,
    c01_ratio_profile,
    circle,
    delta_ratio,
    hemisphere,
    load_point_cloud,
    line,
    membership_W,
    point_cloud,
    select_rho_gamma,
    tangent_cone_estimate,
    three_halves_graph,
    tilted_sphere_cap,
    tilted_strip,
    vertical_strip,
)

pytestmark = pytest.mark.filterwarnings("ignore::hypspec.boundary.ResolutionWarning")

CIRCLE = circle()
LINE = line()
GRAPH = three_halves_graph()


def graph_distance_oracle(q):
    # dense scan followed by bounded refinement, independent of the sample tree
    t = np.linspace(-1, 1, 2_000_001)
    d = np.hypot(t - q[0], np.abs(t) ** 1.5 - q[1])
    i = int(np.argmin(d))
    res = minimize_scalar(
        lambda s: np.hypot(s - q[0], abs(s) ** 1.5 - q[1]),
        bounds=(t[max(i - 1, 0)], t[min(i + 1, len(t) - 1)]),
        method="bounded",
        options={"xatol": 1e-15},
    )
    return min(res.fun, d[i])


def test_delta_ratio_line_is_one():
    for r in (1e-4, 0.3, 5.0):
        assert abs(delta_ratio(LINE, [0.3, 0.0], r).value - 1.0) < 1e-12


def test_delta_ratio_circle_below_reach():
    for a in (0.0, 1.0, 2.5):
        assert abs(delta_ratio(CIRCLE, [np.cos(a), np.sin(a)], 0.3).value - 1.0) < 1e-10


def test_delta_ratio_three_halves_graph():
    vals = []
    for r in (0.1, 0.01, 0.001):
        got = delta_ratio(GRAPH, [0.0, 0.0], r).value
        # the downward normal gives exactly r; the upward one is the infimum
        assert got == pytest.approx(graph_distance_oracle([0.0, r]) / r, abs=1e-9)
        vals.append(got)
    assert all(v < 1 for v in vals)
    assert vals[0] < vals[1] < vals[2]


@pytest.mark.parametrize("curve,p", [(LINE, [0.0, 0.0]), (CIRCLE, [0.0, 1.0]), (GRAPH, [0.0, 0.0])])
def test_delta_ratio_tends_to_one(curve, p):
    assert delta_ratio(curve, p, 1e-4).value > 0.99


def test_delta_ratio_in_three_dimensions():
    c3 = circle(n=3)
    assert delta_ratio(c3, [1.0, 0.0, 0.0], 0.3).value == pytest.approx(1.0, abs=1e-6)


def test_delta_ratio_rejects_bad_input():
    with pytest.raises(ValueError):
        delta_ratio(LINE, [0.0, 0.0], 0.0)
    with pytest.raises(PreconditionError):
        delta_ratio(LINE, [0.0, 0.5], 0.1)


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 2 * np.pi), st.floats(1e-3, 1.9))
def test_delta_ratio_bounded_by_one(a, r):
    v = delta_ratio(CIRCLE, [np.cos(a), np.sin(a)], r).value
    assert 0 < v <= 1 + 1e-9


def test_rho_gamma_circle():
    # inner normal: delta = 2 - r beyond the centre, so the 0.55 level sits at r = 2/1.55
    assert select_rho_gamma(CIRCLE) == pytest.approx(1 / 1.55, rel=1e-4)


def test_membership_W_examples():
    rho = select_rho_gamma(CIRCLE)
    assert membership_W(CIRCLE, [1.0, 0.0, rho / 2], rho)
    assert membership_W(CIRCLE, [np.cos(2.0), np.sin(2.0), rho / 3], rho)
    # centre of the disk is at distance 1 > 2 rho from the curve
    assert not membership_W(CIRCLE, [0.0, 0.0, 1e-3 * rho], rho)
    assert not membership_W(CIRCLE, [1.0, 0.0, rho], rho)
    assert not membership_W(CIRCLE, [1.0, 0.0, 2 * rho], rho)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 2 * np.pi), st.floats(0.01, 0.99), st.floats(0.0, 1.0))
def test_membership_W_monotone_in_height_over_curve(a, frac, extra):
    rho = 0.6
    x = [np.cos(a), np.sin(a)]
    y = frac * rho
    y2 = y + extra * (rho - y) * 0.999
    if membership_W(CIRCLE, [*x, y], rho):
        assert membership_W(CIRCLE, [*x, y2], rho)


def test_barrier_hemisphere():
    hs = hemisphere()
    x = np.array([2.0, 0.0])
    assert barrier_check([hs], CIRCLE, x, 0.5).empty
    with pytest.warns(UserWarning):
        rep = barrier_check([hs], CIRCLE, x, 1.5)
    assert not rep.empty
    # every violation is genuinely within the ball
    assert np.all(np.linalg.norm(rep.violations - [2.0, 0.0, 0.0], axis=1) < 1.5)


def test_barrier_overhanging_cap_fails_for_small_r():
    cap = tilted_sphere_cap(120.0)
    x = np.array([1.05, 0.0])
    # sphere centre (0, 0, rho/2) with rho = 2/sqrt(3): distance from (x, 0) to the sphere
    rho = 1 / np.sin(np.radians(120))
    gap = np.hypot(1.05, rho / 2) - rho
    assert gap < 0.045 < CIRCLE.distance(x)
    assert not barrier_check([cap], CIRCLE, x, 0.045, count=600).empty


def test_tangent_cone_hemisphere():
    est = tangent_cone_estimate([hemisphere()], [1.0, 0.0, 0.0], gamma=CIRCLE)
    rec = [r for r in est.records if r.scale <= 1.0001e-3][0]
    assert rec.defect_deg < 1.0
    assert abs(est.opening_deg - 90) < 1
    assert est.stable and est.sandwich and est.tcone_check()
    assert np.allclose(np.linalg.norm(est.directions, axis=1), 1)


def test_tangent_cone_vertical_strip_exact():
    est = tangent_cone_estimate([vertical_strip()], [0.0, 0.0, 0.0], gamma=LINE)
    assert all(r.defect_deg < 1e-10 for r in est.records)
    assert est.tcone_check()


def test_tangent_cone_tilted_strip_fails_equality():
    est = tangent_cone_estimate([tilted_strip(45.0)], [0.2, 0.0, 0.0], gamma=LINE)
    assert abs(est.opening_deg - 45) < 1
    assert not est.tcone_check()
    # the sandwich inclusions still hold for a strip
    assert est.sandwich


def test_tangent_cone_tilted_cap():
    est = tangent_cone_estimate([tilted_sphere_cap(60.0)], [1.0, 0.0, 0.0], gamma=CIRCLE)
    assert abs(est.opening_deg - 60) < 1
    assert not est.tcone_check()


def test_tangent_cone_scale_sequence_converges_to_base():
    est = tangent_cone_estimate([hemisphere()], [1.0, 0.0, 0.0], gamma=CIRCLE)
    dists = [np.linalg.norm(p - est.base) for _, p in est.sequence()]
    assert all(a > b for a, b in zip(dists, dists[1:]))


def test_tangent_cone_errors():
    with pytest.raises(ValueError):
        tangent_cone_estimate([hemisphere()], [1.0, 0.0, 0.0], scales=[1e-1, 1e-2])
    cloud = point_cloud([[0.0, 0.0, 0.5], [0.1, 0.0, 0.5], [0.0, 0.0, 0.05]])
    with pytest.raises(ResolutionError):
        tangent_cone_estimate([cloud], [0.0, 0.0, 0.0])


def test_point_cloud_file(tmp_path):
    t, y = np.meshgrid(np.linspace(-0.2, 0.2, 401), np.geomspace(1e-6, 0.2, 400))
    pts = np.stack([t.ravel(), np.zeros(t.size), y.ravel()], axis=1)
    path = tmp_path / "strip.txt"
    np.savetxt(path, pts)
    surf = load_point_cloud(path)
    est = tangent_cone_estimate([surf], [0.0, 0.0, 0.0], scales=np.geomspace(1e-1, 1e-4, 6), gamma=LINE)
    assert abs(est.opening_deg - 90) < 1e-8


def test_c01_hemisphere_ratios_decrease():
    rho = select_rho_gamma(CIRCLE)
    b = np.geomspace(0.5, 1e-3, 20)
    pts = np.stack([np.cos(b), np.zeros_like(b), np.sin(b)], axis=1)
    prof, trend = c01_ratio_profile(pts, CIRCLE, rho)
    ratios = np.array([r for _, r in prof])
    assert trend
    np.testing.assert_allclose(ratios, (1 - np.cos(b)) / np.sin(b), rtol=1e-6)


def test_c01_strip_and_synthetic():
    pts = np.stack([np.linspace(-0.5, 0.5, 10), np.zeros(10), np.geomspace(0.4, 1e-3, 10)], axis=1)
    prof, _ = c01_ratio_profile(pts, LINE, 0.5)
    assert all(r == 0 for _, r in prof)
    d = np.geomspace(1e-1, 1e-8, 12)
    syn = np.stack([np.full_like(d, 0.5), d, d**0.75], axis=1)
    prof, trend = c01_ratio_profile(syn, LINE, check_W=False)
    np.testing.assert_allclose([r for _, r in prof], d**0.25, rtol=1e-9)
    assert trend


def test_c01_rejects_points_outside_W():
    with pytest.raises(PreconditionError, match="outside W"):
        c01_ratio_profile([[0.0, 0.0, 0.5]], CIRCLE, 0.6)
