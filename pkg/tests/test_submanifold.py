import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypspec.submanifold import (
    DegenerateImmersion,
    ImmersedPatch,
    Sampler,
    epsilon_r,
    frames,
    graph_examples,
    mean_curvature,
    orthogonality_defect,
    ray_parameters,
    second_fundamental_form,
    sphere_cap,
    totally_geodesic_disk,
)


def disk_params(rng, n, radius):
    t = rng.uniform(0, 2 * np.pi, n)
    s = radius * np.sqrt(rng.uniform(0, 1, n))
    return np.stack([s * np.cos(t), s * np.sin(t)], axis=1)


def analytic_patches():
    return [
        totally_geodesic_disk(2, 3),
        totally_geodesic_disk(2, 4, basis=[[1, 0], [1, 1], [0, 1], [0, 0]]),
        sphere_cap(np.pi / 2),
        sphere_cap(np.pi / 3),
        sphere_cap(1.0, radius=2.0),
        *graph_examples()[:2],
    ]


def test_affine_patch_has_zero_euclidean_form():
    B = np.array([[1.0, 0.2], [0.0, 1.0], [0.3, -0.4]])
    p = ImmersedPatch(2, 3, lambda u: 0.1 + u @ B.T * 0.3)
    II = second_fundamental_form(p, np.array([[0.1, 0.2], [-0.3, 0.1]]))
    assert np.max(np.abs(II)) < 1e-6


@pytest.mark.parametrize("radius", [1.2, 1.5, 3.0])
def test_sphere_euclidean_form_is_inverse_radius(radius):
    cap = sphere_cap(np.pi / 2, radius=radius)
    rng = np.random.default_rng(3)
    U = disk_params(rng, 20, 0.9 * cap.u_max)
    II = second_fundamental_form(cap, U)
    fr = frames(cap, U)
    center = cap(np.zeros((1, 2)))[0] + radius * np.array([0, 0, 1.0])
    inward = np.einsum("nd,nda->na", center - fr.points, fr.normal)[:, 0]
    II = II[:, 0] * np.sign(inward)[:, None, None]
    np.testing.assert_allclose(II, np.broadcast_to(np.eye(2) / radius, II.shape), atol=1e-12)


def test_second_fundamental_form_symmetric():
    rng = np.random.default_rng(4)
    for p in analytic_patches() + [graph_examples()[2]]:
        U = disk_params(rng, 30, 0.8 * p.u_max)
        for metric in ("euclidean", "hyperbolic"):
            II = second_fundamental_form(p, U, metric)
            assert np.max(np.abs(II - np.swapaxes(II, 2, 3))) < 1e-8


def test_degenerate_immersion():
    p = ImmersedPatch(2, 3, lambda u: np.stack([u[..., 0], u[..., 0], 0 * u[..., 0]], axis=-1) * 0.5)
    with pytest.raises(DegenerateImmersion):
        mean_curvature(p, np.array([[0.1, 0.1]]))


def test_totally_geodesic_examples_are_minimal():
    rng = np.random.default_rng(5)
    for p in (totally_geodesic_disk(2, 3), totally_geodesic_disk(3, 5), sphere_cap(np.pi / 2)):
        U = rng.uniform(-1, 1, (100, p.m))
        U *= (0.95 * p.u_max * rng.uniform(size=(100, 1))) / np.linalg.norm(U, axis=1, keepdims=True)
        assert mean_curvature(p, U).norm_hyperbolic.max() < 1e-8


@pytest.mark.parametrize("theta", [np.pi / 3, np.pi / 4, 1.2])
def test_tilted_cap_constant_mean_curvature(theta):
    cap = sphere_cap(theta)
    rng = np.random.default_rng(6)
    U = disk_params(rng, 200, cap.u_max * (1 - 1e-9))
    H = mean_curvature(cap, U).norm_hyperbolic
    assert np.ptp(H) < 1e-4
    assert H.mean() == pytest.approx(2 * np.cos(theta), abs=1e-4)


def test_conformal_relation_analytic_patches():
    rng = np.random.default_rng(7)
    for p in analytic_patches():
        U = disk_params(rng, 100, 0.98 * p.u_max)
        rep = mean_curvature(p, U)
        assert rep.conformal_residual.max() < 1e-6, p.name
        assert rep.violations == 0


def test_conformal_relation_finite_difference_patch():
    g = graph_examples()[2]
    assert not g.analytic
    rng = np.random.default_rng(8)
    rep = mean_curvature(g, disk_params(rng, 100, 0.95))
    assert rep.conformal_residual.max() < 1e-3


def test_finite_difference_matches_analytic():
    g = graph_examples()[0]
    fd = ImmersedPatch(g.m, g.ambient, g.chart)
    rng = np.random.default_rng(9)
    U = disk_params(rng, 40, 0.9)
    a = mean_curvature(g, U).norm_hyperbolic
    b = mean_curvature(fd, U).norm_hyperbolic
    assert np.max(np.abs(a - b)) < 1e-6


def test_literal_formula_misses_a_conformal_factor():
    # On an orthogonal cap H_hyp = 0 and H_euc = m/rho, while the uncorrected
    # relation predicts m*phi/rho.
    cap = sphere_cap(np.pi / 2, radius=1.5)
    U = np.array([[0.3, 0.1]])
    rep = mean_curvature(cap, U)
    f = 0.5 * (1 - np.sum(rep.points**2))
    assert rep.norm_euclidean[0] == pytest.approx(2 / 1.5, rel=1e-12)
    assert rep.literal_residual[0] == pytest.approx(2 / 1.5 * (1 - f), rel=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 2 * np.pi), st.integers(0, 2**31))
def test_norms_invariant_under_normal_reframing(angle, seed):
    g = graph_examples()[2]  # codimension two
    rot = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
    U = disk_params(np.random.default_rng(seed), 5, 0.9)
    a = mean_curvature(g, U)
    b = mean_curvature(g, U, normal_rotation=rot)
    np.testing.assert_allclose(a.norm_hyperbolic, b.norm_hyperbolic, atol=1e-8)
    np.testing.assert_allclose(a.norm_euclidean, b.norm_euclidean, atol=1e-8)


def test_ray_parameters_hit_levels():
    cap = sphere_cap(np.pi / 3)
    levels = np.array([1.0, 3.0, 8.0])
    U = ray_parameters(cap, np.array([[1.0, 0.0], [0.0, 1.0]]), levels).reshape(-1, 2)
    r = 2 * np.arctanh(np.linalg.norm(cap(U), axis=1))
    np.testing.assert_allclose(r, np.repeat(levels, 2), atol=1e-9)


def test_epsilon_r_geodesic_disk_and_empty_set():
    d = totally_geodesic_disk()
    for r in (0.5, 3.0, 10.0):
        assert epsilon_r([d], np.zeros(3), r).value <= 1e-6
    assert epsilon_r([d], np.zeros(3), 100.0).value == np.inf
    with pytest.raises(ValueError):
        epsilon_r([], np.zeros(3), 1.0)


def test_epsilon_r_tilted_cap_does_not_decay():
    theta = np.pi / 3
    cap = sphere_cap(theta)
    cache = {}
    vals = [epsilon_r([cap], np.zeros(3), r, cache=cache).value for r in (2, 4, 6, 8)]
    np.testing.assert_allclose(vals, 2 * np.cos(theta), atol=1e-6)


def test_epsilon_r_graphs_decrease():
    for g in graph_examples():
        cache = {}
        vals = [epsilon_r([g], np.zeros(g.ambient), r, cache=cache).value for r in (2, 4, 6, 8)]
        assert all(a > b for a, b in zip(vals, vals[1:])), (g.name, vals)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(0, 20), min_size=2, max_size=6))
def test_epsilon_r_non_increasing(radii):
    g = graph_examples()[1]
    sampler = Sampler(n_directions=16, dr=0.2)
    cache = {}
    radii = sorted(radii)
    vals = [epsilon_r([g], np.zeros(3), r, sampler, cache).value for r in radii]
    assert all(a >= b for a, b in zip(vals, vals[1:]))


def test_orthogonality_defect():
    # closed form on an orthogonal cap of radius rho: |x^perp| = (1 - |x|^2) / (2 rho)
    cap = sphere_cap(np.pi / 2, radius=10.5)
    tilt = sphere_cap(np.pi / 3)
    disk = totally_geodesic_disk()
    dirs = np.array([[1.0, 0.0], [0.6, 0.8]])
    levels = 2 * np.arctanh(np.array([0.99, 0.999, 1 - 1e-6]))
    d_orth = orthogonality_defect(cap, ray_parameters(cap, dirs, levels).reshape(-1, 2)).reshape(3, 2)
    expected = (1 - np.array([0.99, 0.999, 1 - 1e-6]) ** 2) / 21.0
    np.testing.assert_allclose(d_orth, np.repeat(expected[:, None], 2, axis=1), rtol=1e-6)
    assert np.all(d_orth[:2] <= 1e-3)
    assert np.all(d_orth[1] < d_orth[0])
    d_tilt = orthogonality_defect(tilt, ray_parameters(tilt, dirs, levels).reshape(-1, 2)).reshape(3, 2)
    assert np.all(np.abs(d_tilt[-1] - 0.5) < 0.01)
    U = ray_parameters(disk, dirs, levels).reshape(-1, 2)
    assert orthogonality_defect(disk, U).max() <= 1e-10
