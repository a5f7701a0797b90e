"""
최적 결정 전략(ODS) 제어기

매 시점 다음 QP 를 푼다 (step-out 한계 |u| <= omega_so).
    min_u  1/2 u^T A_mu u + G_mu^T u
    A_mu = e11_hat^2 diag(q1, q2),   G_mu = e11_hat diag(q1, q2) (d_hat - v_des)
제약이 없으면 해는 (v_des - d_hat) / e11_hat 이다.

- solve_trs: 내부해 또는 경계해(라그랑주 승수를 이분법으로)
- solve_trs_quartic: 경계해의 승수를 4차 방정식 근으로 구한다
- control_law: 가중치가 같을 때의 닫힌 형태(절대연속)
"""

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import bisect

from .constants import BISECTION_MAX_ITER, SATURATION_SLACK
from .errors import InconsistentProblemError, NumericalFailureError, ParameterError
from .guidance import GuidanceParams, PathSpec, StateLike, state_value, ilos_field
from .logger import get_logger
from .utils import Vec2, as_vec2


logger = get_logger("controller")

_NEWTON_STEPS = 6


@dataclass(frozen=True)
class ControllerParams:
    """q1/q2 가 None 이면 1/(omega0 e11_hat^2) 로 본다 (가중치 동일 = 연속 제어 법칙)."""

    omega_so: float
    q1: Optional[float] = None
    q2: Optional[float] = None
    omega0: float = 1.0
    e11_hat: float = 1.0
    d_mu_hat: Vec2 = (0.0, 0.0)

    def __post_init__(self) -> None:
        if not (self.omega_so > 0 and math.isfinite(self.omega_so)):
            raise ParameterError(f"omega_so must be > 0, got {self.omega_so!r}")
        if not self.omega0 > 0:
            raise ParameterError(f"omega0 must be > 0, got {self.omega0!r}")
        if self.e11_hat == 0 or not math.isfinite(self.e11_hat):
            raise ParameterError(f"e11_hat must be finite and non-zero, got {self.e11_hat!r}")
        for name in ("q1", "q2"):
            q = getattr(self, name)
            if q is not None and not q > 0:
                raise ParameterError(f"{name} must be > 0, got {q!r}")
        object.__setattr__(self, "d_mu_hat", as_vec2(self.d_mu_hat))

    @property
    def weights(self) -> Vec2:
        default_q = 1.0 / (self.omega0 * self.e11_hat ** 2)
        return (
            default_q if self.q1 is None else float(self.q1),
            default_q if self.q2 is None else float(self.q2),
        )

    @property
    def equal_weights(self) -> bool:
        q1, q2 = self.weights
        return q1 == q2

    @property
    def effective_omega0(self) -> float:
        """가중치가 같을 때 내부해 u = -omega0_eff G 의 계수."""
        return 1.0 / (self.weights[0] * self.e11_hat ** 2)


def equal_weight_params(
    omega_so: float,
    omega0: float = 1.0,
    e11_hat: float = 1.0,
    d_mu_hat: Sequence[float] = (0.0, 0.0),
) -> ControllerParams:
    return ControllerParams(omega_so=omega_so, omega0=omega0, e11_hat=e11_hat, d_mu_hat=as_vec2(d_mu_hat))


@dataclass(frozen=True)
class TrsProblem:
    """A_mu 는 대각이므로 대각 성분 a 와 G_mu 성분 g 만 들고 있다."""

    a: Vec2
    g: Vec2
    omega_so: float

    def __post_init__(self) -> None:
        a = as_vec2(self.a)
        if not (a[0] > 0 and a[1] > 0):
            raise ParameterError(f"A_mu must be positive definite, got diag{a!r}")
        if not self.omega_so > 0:
            raise ParameterError(f"omega_so must be > 0, got {self.omega_so!r}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "g", as_vec2(self.g))

    @property
    def A_mu(self) -> np.ndarray:
        return np.diag(self.a)

    @property
    def G_mu(self) -> np.ndarray:
        return np.array(self.g)

    def unconstrained_minimizer(self) -> Vec2:
        return (-self.g[0] / self.a[0], -self.g[1] / self.a[1])


@dataclass(frozen=True)
class TrsSolution:
    u_star: Vec2
    lambda_star: float
    saturated: bool
    kkt_residual: float


@dataclass(frozen=True)
class KktReport:
    norm_violation: float
    stationarity: float
    complementarity: float
    dual_feasibility: float
    psd_violation: float

    @property
    def max_residual(self) -> float:
        return max(
            self.norm_violation,
            self.stationarity,
            self.complementarity,
            self.dual_feasibility,
            self.psd_violation,
        )

    @property
    def feasible(self) -> bool:
        return self.norm_violation <= SATURATION_SLACK


def build_trs(v_des: Sequence[float], params: ControllerParams) -> TrsProblem:
    e = params.e11_hat
    q1, q2 = params.weights
    d = params.d_mu_hat
    return TrsProblem(
        a=(e * e * q1, e * e * q2),
        g=(e * q1 * (d[0] - v_des[0]), e * q2 * (d[1] - v_des[1])),
        omega_so=params.omega_so,
    )


def trs_objective(prob: TrsProblem, u: Sequence[float]) -> float:
    return 0.5 * (prob.a[0] * u[0] * u[0] + prob.a[1] * u[1] * u[1]) + prob.g[0] * u[0] + prob.g[1] * u[1]


def verify_kkt(prob: TrsProblem, sol: TrsSolution) -> KktReport:
    u = sol.u_star
    lam = sol.lambda_star
    u_norm = math.hypot(u[0], u[1])
    r1 = (prob.a[0] + lam) * u[0] + prob.g[0]
    r2 = (prob.a[1] + lam) * u[1] + prob.g[1]
    return KktReport(
        norm_violation=max(0.0, u_norm - prob.omega_so),
        stationarity=math.hypot(r1, r2),
        complementarity=abs(lam * (prob.omega_so - u_norm)),
        dual_feasibility=max(0.0, -lam),
        psd_violation=max(0.0, -(min(prob.a) + lam)),
    )


def _secular(prob: TrsProblem, lam: float) -> float:
    g1, g2 = prob.g
    a1, a2 = prob.a
    return (g1 / (a1 + lam)) ** 2 + (g2 / (a2 + lam)) ** 2 - prob.omega_so ** 2


def _secular_slope(prob: TrsProblem, lam: float) -> float:
    g1, g2 = prob.g
    a1, a2 = prob.a
    return -2.0 * (g1 * g1 / (a1 + lam) ** 3 + g2 * g2 / (a2 + lam) ** 3)


def _polish(prob: TrsProblem, lam: float) -> float:
    """단조 감소 secular 함수 위에서 뉴턴 몇 번. 음수로 나가면 0 으로 자른다."""
    for _ in range(_NEWTON_STEPS):
        f = _secular(prob, lam)
        if f == 0.0:
            break
        slope = _secular_slope(prob, lam)
        if slope == 0.0:
            break
        nxt = max(0.0, lam - f / slope)
        if nxt == lam:
            break
        lam = nxt
    return lam


def _boundary_solution(prob: TrsProblem, lam: float) -> TrsSolution:
    u = (-prob.g[0] / (prob.a[0] + lam), -prob.g[1] / (prob.a[1] + lam))
    n = math.hypot(u[0], u[1])
    # 반올림으로 반경을 넘는 경우 원판 위로 되돌린다
    if n > prob.omega_so:
        u = (u[0] * prob.omega_so / n, u[1] * prob.omega_so / n)
    sol = TrsSolution(u_star=u, lambda_star=lam, saturated=True, kkt_residual=0.0)
    return TrsSolution(u_star=u, lambda_star=lam, saturated=True, kkt_residual=verify_kkt(prob, sol).max_residual)


def _interior_solution(prob: TrsProblem) -> TrsSolution:
    u = prob.unconstrained_minimizer()
    sol = TrsSolution(u_star=u, lambda_star=0.0, saturated=False, kkt_residual=0.0)
    return TrsSolution(u_star=u, lambda_star=0.0, saturated=False, kkt_residual=verify_kkt(prob, sol).max_residual)


def within_step_out(u_mag: float, omega_so: float) -> bool:
    """|u| <= omega_so (반올림 오차 SATURATION_SLACK 허용)"""
    return u_mag <= omega_so + SATURATION_SLACK


def is_interior(prob: TrsProblem) -> bool:
    u = prob.unconstrained_minimizer()
    return math.hypot(u[0], u[1]) < prob.omega_so


def solve_trs(prob: TrsProblem) -> TrsSolution:
    if is_interior(prob):
        return _interior_solution(prob)

    # 경계: sum g_i^2/(a_i+lam)^2 = omega^2, 왼쪽은 lam 에 대해 순감소
    f0 = _secular(prob, 0.0)
    if f0 <= 0.0:
        return _boundary_solution(prob, 0.0)
    hi = math.hypot(prob.g[0], prob.g[1]) / prob.omega_so
    try:
        lam = bisect(
            lambda x: _secular(prob, x),
            0.0,
            hi,
            xtol=max(hi * 1e-16, 1e-300),
            rtol=4.0 * np.finfo(float).eps,
            maxiter=BISECTION_MAX_ITER,
        )
    except RuntimeError as e:
        logger.error("[trs] bisection did not converge: %s", e)
        raise NumericalFailureError(f"multiplier bisection failed after {BISECTION_MAX_ITER} iterations") from e
    return _boundary_solution(prob, _polish(prob, float(lam)))


def quartic_coefficients(prob: TrsProblem) -> np.ndarray:
    """lam_t = lam + a1, w = a2 - a1 로 치환한 secular 방정식의 다항식 형태 (높은 차수부터)."""
    a1, a2 = prob.a
    g1, g2 = prob.g
    w = a2 - a1
    r2 = prob.omega_so ** 2
    c1 = g1 * g1 / r2
    gg = (g1 * g1 + g2 * g2) / r2
    return np.array([1.0, 2.0 * w, w * w - gg, -2.0 * w * c1, -w * w * c1])


def solve_trs_quartic(prob: TrsProblem) -> TrsSolution:
    if is_interior(prob):
        raise InconsistentProblemError("quartic route applies to the boundary case only")
    a1 = prob.a[0]
    roots = np.roots(quartic_coefficients(prob))
    scale = max(1.0, float(np.max(np.abs(roots))) if roots.size else 1.0)
    tol = 1e-7 * scale

    candidates = []
    for r in roots:
        if abs(r.imag) > tol:
            continue
        lam = float(r.real) - a1
        if lam >= -tol and min(prob.a) + lam >= -tol:
            candidates.append(max(0.0, lam))
    if not candidates:
        raise InconsistentProblemError(
            f"no admissible real root (roots={roots.tolist()}, a={prob.a}, g={prob.g})"
        )
    lam = min(candidates, key=lambda x: abs(_secular(prob, x)))
    return _boundary_solution(prob, _polish(prob, lam))


def equal_weight_control(g1: float, g2: float, omega0: float, omega_so: float) -> Tuple[float, float, bool]:
    """u = -omega0 G (|G| <= omega_so/omega0), 아니면 -omega_so G/|G|. (u_x, u_z, saturated)"""
    g_norm = math.hypot(g1, g2)
    if g_norm * omega0 <= omega_so:
        return -omega0 * g1, -omega0 * g2, False
    k = omega_so / g_norm
    return -k * g1, -k * g2, True


def control_from_velocity(v_des: Sequence[float], params: ControllerParams) -> Tuple[float, float, bool]:
    """(u_x, u_z, saturated). 가중치가 다르면 solve_trs 로 넘어간다."""
    prob = build_trs(v_des, params)
    if params.equal_weights:
        return equal_weight_control(prob.g[0], prob.g[1], params.effective_omega0, params.omega_so)
    sol = solve_trs(prob)
    return sol.u_star[0], sol.u_star[1], sol.saturated


def control_law(
    p: Sequence[float],
    s: StateLike,
    path: PathSpec,
    g: GuidanceParams,
    params: ControllerParams,
) -> Vec2:
    v_des = ilos_field(p, state_value(s), path, g)
    ux, uz, _ = control_from_velocity(v_des, params)
    return (ux, uz)


def lipschitz_bound(g: GuidanceParams, params: ControllerParams) -> float:
    """(eps, s) 에 대한 가중치 동일 법칙의 립시츠 상수. 포화 투영은 비확장."""
    return g.alpha_d * math.sqrt(1.0 + g.sigma0 ** 2) / abs(params.e11_hat)


__all__ = [
    "ControllerParams",
    "TrsProblem",
    "TrsSolution",
    "KktReport",
    "equal_weight_params",
    "build_trs",
    "trs_objective",
    "verify_kkt",
    "is_interior",
    "within_step_out",
    "solve_trs",
    "quartic_coefficients",
    "solve_trs_quartic",
    "equal_weight_control",
    "control_from_velocity",
    "control_law",
    "lipschitz_bound",
]
