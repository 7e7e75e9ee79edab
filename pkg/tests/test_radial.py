import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from hypspec.radial import (
    IsoperimetricProfile,
    MollificationError,
    PsiProfile,
    QuadratureRule,
    ResolutionError,
    WindowProfile,
    ball_cheeger,
    check_mollification,
    epsilon_R,
    lemma_est_sweep,
    log_sinh,
    mollify,
    psi_residual,
    supports_disjoint,
    verify_lemma_est,
    weighted_integrals,
)


def test_log_sinh_matches_direct_and_survives_large_arguments():
    t = np.array([1e-3, 0.5, 3.0, 40.0])
    np.testing.assert_allclose(log_sinh(t), np.log(np.sinh(t)), rtol=1e-13)
    assert np.isfinite(log_sinh(5000.0))


def test_epsilon_R_known_value():
    assert epsilon_R(3, 2.0, 2 * np.pi) == 32.0


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 6), st.floats(0.05, 5.0), st.floats(1.0, 100.0), st.floats(1.01, 3.0))
def test_epsilon_R_decreases_in_R(m, excess, R, factor):
    lam = (m - 1) ** 2 / 4 + excess
    assert epsilon_R(m, lam, R * factor) < epsilon_R(m, lam, R)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 7), st.floats(0.01, 10.0), st.floats(0.05, 600.0))
def test_psi_solves_radial_equation(m, excess, t):
    lam = (m - 1) ** 2 / 4 + excess
    p = PsiProfile(m, lam)
    v, dv, d2v = p(np.array([t]))
    scale = max(1.0, np.abs(d2v[0]), np.abs(dv[0]), lam * np.abs(v[0]))
    assert psi_residual(m, lam, np.array([t]))[0] <= 1e-10 * scale


def test_psi_derivatives_match_finite_differences():
    p = PsiProfile(4, 3.0)
    t = np.array([0.7, 2.0, 5.0])
    h = 1e-5
    v, dv, d2v = p(t)
    fd1 = (p(t + h)[0] - p(t - h)[0]) / (2 * h)
    fd2 = (p(t + h)[1] - p(t - h)[1]) / (2 * h)
    np.testing.assert_allclose(dv, fd1, rtol=1e-8)
    np.testing.assert_allclose(d2v, fd2, rtol=1e-8)


def test_lambda_below_threshold_rejected():
    with pytest.raises(ValueError):
        PsiProfile(3, 1.0).beta


@pytest.mark.parametrize("a,b", [(0.1, 1.0), (0.5, 9.0), (3.0, 20.0)])
def test_sinh_weight_quadrature_m2(a, b):
    rule = QuadratureRule(a, b, 30)
    got = rule.integrate_sinh(lambda t: np.ones_like(t), 2)
    exact = np.cosh(b) - np.cosh(a)
    assert abs(got - exact) <= 1e-12 * exact


def test_window_norm_closed_form():
    # |psi|^2 sinh^{m-1} = 1, so the norm is the integral of sin^4 over the window
    for m in (2, 3, 5):
        for R in (10.0, 37.0):
            ints = weighted_integrals(WindowProfile(m, (m - 1) ** 2 / 4 + 0.5, R), (m - 1) ** 2 / 4 + 0.5)
            assert ints.norm == pytest.approx(3 * R / 16, rel=1e-12)


@pytest.mark.parametrize("R", [8.0, 20.0, 55.0])
def test_residual_closed_form_m3(R):
    # for m = 3 the potential vanishes and |L v|^2 reduces to w''^2 + 4 beta^2 w'^2
    lam = 2.0
    k = 2 * np.pi / R
    rep = verify_lemma_est(3, lam, R)
    assert rep.lhs == pytest.approx(k**4 * R + 1.0 * k**2 * R, rel=1e-11)


def test_residual_against_adaptive_quadrature_m2():
    m, lam, R = 2, 0.9, 12.0
    w = WindowProfile(m, lam, R)

    def integrand(t):
        v, dv, d2v = w(np.array([t]))
        Lv = d2v + (m - 1) / np.tanh(t) * dv + lam * v
        return float(np.abs(Lv[0]) ** 2 * np.sinh(t))

    ref, _ = quad(integrand, R / 2, R, limit=400, epsabs=0, epsrel=1e-12)
    assert verify_lemma_est(m, lam, R).lhs == pytest.approx(ref, rel=1e-9)


@pytest.mark.parametrize("m", [2, 3, 4])
@pytest.mark.parametrize("R", [20.0, 80.0, 320.0])
def test_lemma_est_holds(m, R):
    rep = verify_lemma_est(m, (m - 1) ** 2 / 4 + 0.75, R)
    assert rep.passed
    assert rep.ratio < 0.35


def test_derivative_constants_bounded_uniformly():
    reps = lemma_est_sweep(3, 2.0, [20, 40, 80, 160, 320])
    assert all(r.derivative_bounds_pass for r in reps)
    # the constants settle to a limit rather than growing
    assert abs(reps[-1].C2 - reps[-2].C2) < 0.05


def test_large_radius_no_overflow():
    rep = verify_lemma_est(5, 4.5, 1000.0)
    assert np.isfinite(rep.lhs) and rep.passed


def test_resolution_error_on_coarse_rule():
    with pytest.raises(ResolutionError):
        verify_lemma_est(3, 2.0, 40.0, rule=QuadratureRule(20.0, 40.0, 2, order=3, breakpoints=(20.0, 40.0)))


@pytest.mark.parametrize("kernel", ["bump", "gaussian"])
def test_mollification_budgets(kernel):
    rep = check_mollification(3, 2.0, 40.0, 0.3, kernel=kernel)
    assert rep.ok, rep.ratios
    assert rep.ratios["aprox2"] == pytest.approx(1.0, abs=0.01)


def test_mollification_rejects_wide_kernel_and_reports_failure():
    with pytest.raises(ValueError):
        mollify(WindowProfile(3, 2.0, 40.0), 0.5)
    with pytest.raises(MollificationError):
        check_mollification(3, 2.0, 40.0, 0.3, cstar=0.1)


def test_mollified_derivative_is_consistent():
    mol = mollify(WindowProfile(2, 0.5, 30.0), 0.2)
    t = np.array([15.1, 17.0, 29.9])
    h = 1e-4
    fd = (mol(t + h)[0] - mol(t - h)[0]) / (2 * h)
    np.testing.assert_allclose(mol(t)[1], fd, rtol=1e-6, atol=1e-10)


def test_supports_disjoint():
    Rs = [20.0, 41.0, 83.0]
    assert supports_disjoint([mollify(WindowProfile(3, 2.0, R), 0.1) for R in Rs])
    assert not supports_disjoint([WindowProfile(3, 2.0, R) for R in (20.0, 30.0)])


@pytest.mark.parametrize("R", [0.5, 2.0, 10.0, 30.0])
def test_profile_m2_closed_form(R):
    p = IsoperimetricProfile(2)
    assert p.fprime(R)[0] == pytest.approx(np.tanh(R / 2), rel=1e-10)
    assert p.f(R)[0] == pytest.approx(2 * np.log(np.cosh(R / 2)), rel=1e-10)
    assert ball_cheeger(2, R) == pytest.approx(1 / np.tanh(R / 2), rel=1e-10)


def test_profile_m3_closed_form():
    p = IsoperimetricProfile(3)
    t = np.array([0.3, 1.0, 4.0, 12.0])
    exact = (np.sinh(t) * np.cosh(t) - t) / (2 * np.sinh(t) ** 2)
    np.testing.assert_allclose(p.fprime(t), exact, rtol=1e-10)


@pytest.mark.parametrize("m", [2, 3, 4, 6])
def test_profile_second_derivative_and_ode(m):
    p = IsoperimetricProfile(m)
    t = np.array([0.5, 2.0, 6.0])
    h = 1e-4
    fd = (p.fprime(t + h) - p.fprime(t - h)) / (2 * h)
    np.testing.assert_allclose(p.fsecond(t), fd, atol=1e-7)
    assert np.all(p.ode_residual(t) < 1e-8)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 6), st.floats(0.01, 40.0))
def test_profile_inequalities(m, t):
    p = IsoperimetricProfile(m)
    fp = p.fprime(t)[0]
    assert 0 < fp < 1 / (m - 1) + 1e-12
    assert m / np.tanh(t) * fp - 1 >= -1e-12
