import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from helix_ilos.errors import InvalidCertificateError, ParameterError
from helix_ilos.guidance import (
    GuidanceParams,
    GuidanceState,
    PathSpec,
    certify_stability,
    check_simplified_gains,
    default_certificate,
    error_system_matrices,
    error_system_rhs,
    ilos_field,
    integral_state_derivative,
    lyapunov_value,
    polar_path_frame,
    steady_state_speed,
    to_path_frame,
)
from helix_ilos.sim import fit_exponential_rate


def test_path_from_degrees_wraps():
    assert PathSpec.from_degrees(390.0).theta_r == pytest.approx(math.radians(30.0))
    assert PathSpec.from_degrees(-180.0).theta_r == pytest.approx(math.pi)
    assert PathSpec.from_degrees(45.0).theta_r == math.radians(45.0)
    with pytest.raises(ParameterError):
        PathSpec(4.0)


def test_guidance_params_validation():
    with pytest.raises(ParameterError):
        GuidanceParams(alpha_d=0.0, sigma0=0.01, k_d=0.15, delta_los=1e-3)
    with pytest.raises(ParameterError):
        GuidanceParams(alpha_d=600.0, sigma0=-0.1, k_d=0.15, delta_los=1e-3)
    with pytest.raises(ParameterError):
        GuidanceState(float("inf"))
    assert GuidanceParams(alpha_d=1.0, sigma0=0.0, k_d=0.0, delta_los=1.0).is_conventional


def test_path_frame_forms_agree():
    rng = np.random.default_rng(5)
    for _ in range(500):
        path = PathSpec(rng.uniform(-math.pi, math.pi))
        p = rng.normal(size=2) * 0.05
        a = to_path_frame(p, path)
        b = polar_path_frame(p, path)
        assert a.eps == pytest.approx(b.eps, abs=1e-15)
        assert a.z == pytest.approx(b.z, abs=1e-15)
    assert polar_path_frame((0.0, 0.0), PathSpec(1.0)).eps == 0.0


def test_field_on_path_points_along_path(study_guidance):
    path = PathSpec.from_degrees(30.0)
    v = ilos_field((0.0, 0.0), 0.0, path, study_guidance)
    speed = study_guidance.alpha_d * study_guidance.delta_los
    assert v[0] == pytest.approx(speed * math.cos(path.theta_r))
    assert v[1] == pytest.approx(speed * math.sin(path.theta_r))
    assert steady_state_speed(study_guidance, 9.3e-5) == pytest.approx(4.185e-5)


def test_field_pulls_towards_path(study_guidance):
    path = PathSpec(0.0)
    below = ilos_field((0.0, -1e-3), GuidanceState(0.0), path, study_guidance)
    above = ilos_field((0.0, 1e-3), GuidanceState(0.0), path, study_guidance)
    assert below[1] > 0 > above[1]


def test_integral_derivative_scalar_and_vector_agree(study_guidance):
    path = PathSpec.from_degrees(-60.0)
    p = (1e-3, 2e-3)
    eps = to_path_frame(p, path).eps
    assert integral_state_derivative(p, 0.1, study_guidance, path) == integral_state_derivative(eps, 0.1, study_guidance)
    # 경로 위, s = 0 이면 적분 상태는 움직이지 않는다
    assert integral_state_derivative(0.0, 0.0, study_guidance) == 0.0


def test_reference_gains_satisfy_simplified_condition(study_guidance):
    lhs, ok = check_simplified_gains(study_guidance)
    assert f"{lhs:.3f}" == "0.900"
    assert ok
    lhs_hi, ok_hi = check_simplified_gains(GuidanceParams(alpha_d=1200.0, sigma0=0.01, k_d=0.15, delta_los=0.75e-3))
    assert lhs_hi > 1.0 and not ok_hi


def test_reference_gains_do_not_certify_ges(study_guidance):
    cert = default_certificate(study_guidance)
    assert cert.simplified_ok
    assert not cert.ges_ok
    assert not cert.iss_ok


def test_identity_certificate():
    g = GuidanceParams(alpha_d=1.0, sigma0=0.0, k_d=1.0, delta_los=10.0)
    cert = default_certificate(g)
    np.testing.assert_allclose(cert.P, np.eye(2), atol=1e-12)
    np.testing.assert_allclose(cert.Gamma, 2.0 * np.eye(2), atol=1e-12)
    assert cert.iss_radius_per_dstar == pytest.approx(1.0)
    assert cert.ges_ok and cert.iss_ok
    assert cert.ges_threshold == pytest.approx(0.1)
    assert cert.iss_threshold == pytest.approx(1.1)


def test_certificate_rejects_bad_matrices():
    g = GuidanceParams(alpha_d=1.0, sigma0=0.0, k_d=1.0, delta_los=10.0)
    with pytest.raises(InvalidCertificateError):
        certify_stability(g, np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(InvalidCertificateError):
        certify_stability(g, np.array([[1.0, 0.0], [0.0, -1.0]]))
    with pytest.raises(InvalidCertificateError):
        certify_stability(g, np.eye(3))


def test_lyapunov_decreases_along_error_system():
    g = GuidanceParams(alpha_d=1.0, sigma0=0.0, k_d=1.0, delta_los=10.0)
    P = default_certificate(g).P
    rng = np.random.default_rng(2)
    for _ in range(1000):
        x = rng.normal(size=2) * rng.choice([1e-3, 1.0, 100.0])
        f = np.array(error_system_rhs(x, g))
        v_dot = 2.0 * x @ P @ f
        assert v_dot < -1.5 * (x @ x)
        assert lyapunov_value(P, x[0], x[1]) > 0


def test_error_matrices_match_rhs():
    g = GuidanceParams(alpha_d=2.0, sigma0=0.1, k_d=3.0, delta_los=1.5)
    A, H, B = error_system_matrices(g)
    x = np.array([0.3, -0.2])
    nonlinear = g.delta_los / (x @ H @ x + g.delta_los ** 2)
    expected = A @ x + nonlinear * (B @ x)
    np.testing.assert_allclose(error_system_rhs(x, g), expected, rtol=1e-14, atol=1e-16)


def _integrate(g: GuidanceParams, x0, d_perp: float, t_end: float = 20.0):
    return solve_ivp(
        lambda t, x: error_system_rhs(x, g, d_perp=d_perp),
        (0.0, t_end),
        x0,
        method="RK45",
        rtol=1e-9,
        atol=1e-12,
        dense_output=True,
    )


def test_certified_gains_decay_exponentially():
    g = GuidanceParams(alpha_d=1.5, sigma0=0.1, k_d=3.0, delta_los=2.0)
    cert = default_certificate(g)
    assert cert.ges_ok
    sol = _integrate(g, [0.8, -0.3], 0.0, t_end=10.0)
    t = np.linspace(1.0, 10.0, 50)
    norms = np.hypot(*sol.sol(t))
    _, rate = fit_exponential_rate(t, norms)
    assert rate > 0.5


def test_iss_ball_contains_tail():
    rng = np.random.default_rng(13)
    checked = 0
    while checked < 100:
        g = GuidanceParams(
            alpha_d=rng.uniform(1.0, 2.0),
            sigma0=rng.uniform(0.0, 0.2),
            k_d=rng.uniform(2.0, 4.0),
            delta_los=rng.uniform(1.0, 3.0),
        )
        cert = default_certificate(g)
        if not (cert.ges_ok and cert.iss_ok):
            continue
        d_star = rng.uniform(0.01, 0.2)
        d_perp = d_star * rng.choice([-1.0, 1.0])
        sol = _integrate(g, rng.normal(size=2), d_perp)
        tail = np.hypot(*sol.sol(np.linspace(15.0, 20.0, 50)))
        assert tail.max() <= d_star * cert.iss_radius_per_dstar
        checked += 1
