"""
ILOS(integral line-of-sight) 유도 법칙과 폐루프 오차계 안정성 검증

경로는 원점을 지나고 ê_x 와 theta_r 를 이루는 직선이다.
    eps = -sin(theta_r) p_x + cos(theta_r) p_z    (횡방향 오차)
    z   =  cos(theta_r) p_x + sin(theta_r) p_z    (경로 방향 위치)
    v_des = alpha_d R(theta_r) [delta_los, -eps - sigma0 s]
    s_dot = -k_d s + delta_los eps / ((eps + sigma0 s)^2 + delta_los^2)
"""

import math
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np
from scipy.linalg import solve_continuous_lyapunov

from .errors import InvalidCertificateError, ParameterError
from .logger import get_logger
from .utils import Vec2, wrap_angle


logger = get_logger("guidance")


@dataclass(frozen=True)
class PathSpec:
    theta_r: float = 0.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.theta_r) and -math.pi < self.theta_r <= math.pi):
            raise ParameterError(f"theta_r must lie in (-pi, pi], got {self.theta_r!r}")

    @classmethod
    def from_degrees(cls, theta_r_deg: float) -> "PathSpec":
        return cls(theta_r=wrap_angle(math.radians(theta_r_deg)))

    @property
    def direction(self) -> Vec2:
        return (math.cos(self.theta_r), math.sin(self.theta_r))

    @property
    def normal(self) -> Vec2:
        return (-math.sin(self.theta_r), math.cos(self.theta_r))


@dataclass(frozen=True)
class GuidanceParams:
    alpha_d: float
    sigma0: float
    k_d: float
    delta_los: float

    def __post_init__(self) -> None:
        if not self.alpha_d > 0:
            raise ParameterError(f"alpha_d must be > 0, got {self.alpha_d!r}")
        if not self.delta_los > 0:
            raise ParameterError(f"delta_los must be > 0, got {self.delta_los!r}")
        if not self.sigma0 >= 0:
            raise ParameterError(f"sigma0 must be >= 0, got {self.sigma0!r}")
        if not self.k_d >= 0:
            raise ParameterError(f"k_d must be >= 0, got {self.k_d!r}")

    @property
    def is_conventional(self) -> bool:
        return self.sigma0 == 0.0


@dataclass(frozen=True)
class GuidanceState:
    s: float = 0.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.s):
            raise ParameterError(f"integral state must be finite, got {self.s!r}")


@dataclass(frozen=True)
class ErrorCoords:
    eps: float
    z: float


@dataclass(frozen=True)
class StabilityCertificate:
    P: np.ndarray
    Gamma: np.ndarray
    ges_ok: bool
    iss_ok: bool
    iss_radius_per_dstar: float
    simplified_lhs: float
    simplified_ok: bool
    lambda_min_gamma: float
    ges_threshold: float
    iss_threshold: float


StateLike = Union[GuidanceState, float]


def state_value(s: StateLike) -> float:
    return s.s if isinstance(s, GuidanceState) else float(s)


# ---- float 커널 (시뮬레이션 내부 루프용) -------------------------------------

def cross_track(px: float, pz: float, cos_r: float, sin_r: float) -> float:
    return -sin_r * px + cos_r * pz


def field_xy(
    eps: float,
    s: float,
    cos_r: float,
    sin_r: float,
    alpha_d: float,
    sigma0: float,
    delta_los: float,
) -> Vec2:
    a = alpha_d * delta_los
    b = -alpha_d * (eps + sigma0 * s)
    return (cos_r * a - sin_r * b, sin_r * a + cos_r * b)


def integral_rate(eps: float, s: float, sigma0: float, k_d: float, delta_los: float) -> float:
    e = eps + sigma0 * s
    return -k_d * s + delta_los * eps / (e * e + delta_los * delta_los)


# ---- 공개 연산 ---------------------------------------------------------------

def to_path_frame(p: Sequence[float], path: PathSpec) -> ErrorCoords:
    c, s = math.cos(path.theta_r), math.sin(path.theta_r)
    return ErrorCoords(eps=-s * p[0] + c * p[1], z=c * p[0] + s * p[1])


def polar_path_frame(p: Sequence[float], path: PathSpec) -> ErrorCoords:
    """|p| sin(dtheta), |p| cos(dtheta) 형태. 원점에서는 (0, 0)."""
    r = math.hypot(p[0], p[1])
    if r == 0.0:
        return ErrorCoords(eps=0.0, z=0.0)
    dtheta = wrap_angle(math.atan2(p[1], p[0]) - path.theta_r)
    return ErrorCoords(eps=r * math.sin(dtheta), z=r * math.cos(dtheta))


def ilos_field(p: Sequence[float], s: StateLike, path: PathSpec, g: GuidanceParams) -> Vec2:
    c, sn = math.cos(path.theta_r), math.sin(path.theta_r)
    eps = cross_track(p[0], p[1], c, sn)
    return field_xy(eps, state_value(s), c, sn, g.alpha_d, g.sigma0, g.delta_los)


def integral_state_derivative(
    p_or_eps: Union[Sequence[float], float],
    s: StateLike,
    g: GuidanceParams,
    path: PathSpec = PathSpec(),
) -> float:
    """위치 벡터를 주면 path 로 eps 를 계산하고, 스칼라면 eps 로 본다."""
    if isinstance(p_or_eps, (int, float)):
        eps = float(p_or_eps)
    else:
        eps = to_path_frame(p_or_eps, path).eps
    return integral_rate(eps, state_value(s), g.sigma0, g.k_d, g.delta_los)


def error_system_matrices(g: GuidanceParams) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """x = [eps, s] 에 대해  x_dot = A x + delta/(x^T H x + delta^2) B x + [d_perp, 0]."""
    A = -g.alpha_d * np.array([[1.0, g.sigma0], [0.0, g.k_d / g.alpha_d]])
    H = np.array([[1.0, g.sigma0], [g.sigma0, g.sigma0 ** 2]])
    B = np.array([[0.0, 0.0], [1.0, 0.0]])
    return A, H, B


def error_system_rhs(
    x: Sequence[float],
    g: GuidanceParams,
    d_perp: float = 0.0,
    e11: float = 1.0,
) -> Vec2:
    """eps 의 미분은 eps 정의를 직접 미분한 것: e11 은 유도항에만 곱해진다."""
    eps, s = float(x[0]), float(x[1])
    eps_dot = -e11 * g.alpha_d * (eps + g.sigma0 * s) + d_perp
    return (eps_dot, integral_rate(eps, s, g.sigma0, g.k_d, g.delta_los))


def lyapunov_value(P: np.ndarray, eps: float, s: float) -> float:
    x = np.array([eps, s])
    return float(x @ P @ x)


def check_simplified_gains(g: GuidanceParams) -> Tuple[float, bool]:
    ratio = g.k_d / g.alpha_d
    ad = g.alpha_d * g.delta_los
    lhs = (g.sigma0 * ad) ** 2 + 2.0 * ad * (1.0 + ratio)
    return lhs, bool(ratio >= 0 and lhs <= 1.0)


def steady_state_speed(g: GuidanceParams, e11: float) -> float:
    return e11 * g.alpha_d * g.delta_los


def certify_stability(g: GuidanceParams, P: np.ndarray) -> StabilityCertificate:
    P = np.asarray(P, dtype=float)
    if P.shape != (2, 2):
        raise InvalidCertificateError(f"P must be 2x2, got shape {P.shape}")
    if not np.allclose(P, P.T, rtol=0.0, atol=1e-12 * max(1.0, float(np.abs(P).max()))):
        raise InvalidCertificateError("P is not symmetric")
    P = 0.5 * (P + P.T)
    p_eigs = np.linalg.eigvalsh(P)
    if not p_eigs[0] > 0:
        raise InvalidCertificateError(f"P is not positive definite (eigenvalues {p_eigs.tolist()})")

    A, _, _ = error_system_matrices(g)
    Gamma = -(A.T @ P + P @ A)
    Gamma = 0.5 * (Gamma + Gamma.T)
    g_eigs = np.linalg.eigvalsh(Gamma)
    lam_min = float(g_eigs[0])

    p12 = float(P[0, 1])
    p22 = float(P[1, 1])
    root = math.sqrt(p12 * p12 + p22 * p22)
    ges_threshold = (p12 + root) / g.delta_los
    iss_threshold = p12 / g.delta_los + root * (g.alpha_d + 1.0 / g.delta_los)
    gamma_pd = lam_min > 0

    lhs, simplified_ok = check_simplified_gains(g)
    cert = StabilityCertificate(
        P=P,
        Gamma=Gamma,
        ges_ok=bool(gamma_pd and lam_min > ges_threshold),
        iss_ok=bool(gamma_pd and lam_min > iss_threshold),
        iss_radius_per_dstar=float(p_eigs[-1] / p_eigs[0]),
        simplified_lhs=lhs,
        simplified_ok=simplified_ok,
        lambda_min_gamma=lam_min,
        ges_threshold=ges_threshold,
        iss_threshold=iss_threshold,
    )
    logger.debug(
        "[certify] lambda_min(Gamma)=%.6g ges_thr=%.6g iss_thr=%.6g ges=%s iss=%s",
        lam_min,
        ges_threshold,
        iss_threshold,
        cert.ges_ok,
        cert.iss_ok,
    )
    return cert


def default_certificate(g: GuidanceParams) -> StabilityCertificate:
    """A^T P + P A = -I 를 풀고 lambda_max(P) = 1 로 정규화한 P 로 검증한다."""
    A, _, _ = error_system_matrices(g)
    try:
        P = solve_continuous_lyapunov(A.T, -np.eye(2))
    except (np.linalg.LinAlgError, ValueError) as e:
        raise InvalidCertificateError(f"Lyapunov equation has no solution: {e}") from e
    P = 0.5 * (P + P.T)
    eigs = np.linalg.eigvalsh(P)
    if not (np.all(np.isfinite(P)) and eigs[0] > 0):
        raise InvalidCertificateError(
            f"no positive definite certificate for alpha_d={g.alpha_d}, sigma0={g.sigma0}, k_d={g.k_d}"
        )
    return certify_stability(g, P / eigs[-1])


__all__ = [
    "PathSpec",
    "GuidanceParams",
    "GuidanceState",
    "ErrorCoords",
    "StabilityCertificate",
    "cross_track",
    "field_xy",
    "integral_rate",
    "to_path_frame",
    "polar_path_frame",
    "ilos_field",
    "integral_state_derivative",
    "error_system_matrices",
    "error_system_rhs",
    "lyapunov_value",
    "check_simplified_gains",
    "steady_state_speed",
    "certify_stability",
    "default_certificate",
]
