"""
나선형 마이크로 스위머 플랜트 모델

- HelixGeometry / DragCoefficients: 나선 형상과 점성 항력 계수
- DerivedParams: 저항력 이론 결합 계수와 추진 이득 e11
- plant_derivative: 평면 축약 동역학  p_dot = e11 * u + d_mu
- feedforward_command: 중력 보상 피드포워드 (방향 psi, 크기 |u|)

각도는 내부적으로 라디안만 쓴다. 도 단위는 설정 파일 경계에서만 받는다.
"""

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

from .constants import PROTOTYPE_E11, PROTOTYPE_N_H, PROTOTYPE_R_H, PROTOTYPE_THETA_H_DEG
from .errors import NoPropulsionError, ParameterError, SingularConfigurationError
from .logger import get_logger
from .utils import Vec2, as_vec2, norm2, rotate


@dataclass(frozen=True)
class HelixGeometry:
    theta_h: float
    n_h: float
    r_h: float
    r_c: float = 0.0
    r_m: float = 0.0
    k_h_mag: float = 0.0

    def __post_init__(self) -> None:
        if not (0.0 < self.theta_h < math.pi / 2):
            raise ParameterError(f"theta_h must lie in (0, pi/2) rad, got {self.theta_h!r}")
        if math.sin(self.theta_h) == 0.0:
            raise ParameterError("sin(theta_h) = 0: coupling coefficients are undefined")
        if not self.n_h > 0:
            raise ParameterError(f"n_h must be > 0, got {self.n_h!r}")
        if not self.r_h > 0:
            raise ParameterError(f"r_h must be > 0, got {self.r_h!r}")
        if not self.k_h_mag >= 0:
            raise ParameterError(f"k_h_mag must be >= 0, got {self.k_h_mag!r}")


@dataclass(frozen=True)
class DragCoefficients:
    xi_par: float
    xi_perp: float
    xi_vm: float = 0.0

    def __post_init__(self) -> None:
        if not self.xi_par > 0:
            raise ParameterError(f"xi_par must be > 0, got {self.xi_par!r}")
        # 같으면 추진이 없는 퇴화 케이스(e11 = 0)로 허용, 역전은 거부
        if not self.xi_perp >= self.xi_par:
            raise ParameterError(
                f"xi_perp ({self.xi_perp!r}) must not be smaller than xi_par ({self.xi_par!r})"
            )
        if not self.xi_vm >= 0:
            raise ParameterError(f"xi_vm must be >= 0, got {self.xi_vm!r}")


@dataclass(frozen=True)
class DerivedParams:
    a1: float
    a2: float
    b11: float
    b13: float
    b22: float
    b23: float
    b33: float
    e11: float


@dataclass(frozen=True)
class SwimmerParams:
    """플랜트가 실제로 쓰는 것은 e11 뿐이다. 형상/항력은 있으면 출처 기록용으로 보관."""

    e11: float
    derived: Optional[DerivedParams] = None
    geometry: Optional[HelixGeometry] = None
    drag: Optional[DragCoefficients] = None

    def __post_init__(self) -> None:
        if not math.isfinite(self.e11):
            raise ParameterError(f"e11 must be finite, got {self.e11!r}")

    @classmethod
    def from_e11(cls, e11: float, geometry: Optional[HelixGeometry] = None) -> "SwimmerParams":
        return cls(e11=float(e11), geometry=geometry)

    @classmethod
    def from_geometry(cls, geometry: HelixGeometry, drag: DragCoefficients) -> "SwimmerParams":
        derived = compute_derived_params(geometry, drag)
        return cls(e11=derived.e11, derived=derived, geometry=geometry, drag=drag)


@dataclass(frozen=True)
class PlantState:
    p: Vec2
    t: float = 0.0

    def __post_init__(self) -> None:
        p = as_vec2(self.p)
        if not (math.isfinite(p[0]) and math.isfinite(p[1]) and math.isfinite(self.t)):
            raise ParameterError(f"non-finite plant state p={p!r} t={self.t!r}")
        object.__setattr__(self, "p", p)


@dataclass(frozen=True)
class DisturbanceSpec:
    """
    속도 영역 외란 d_mu (이미 D 를 곱한 값).
    segments: (시작 시각, (d_x, d_z)) 의 시간순 튜플. 세그먼트가 하나면 상수 외란.
    """

    segments: Tuple[Tuple[float, Vec2], ...] = ((0.0, (0.0, 0.0)),)
    d_star: Optional[float] = None
    calibrated: bool = field(default=False, compare=False)
    provenance: str = field(default="explicit", compare=False)

    def __post_init__(self) -> None:
        if not self.segments:
            raise ParameterError("disturbance needs at least one segment")
        segs = tuple((float(t0), as_vec2(d)) for t0, d in self.segments)
        starts = [t0 for t0, _ in segs]
        if starts != sorted(starts):
            raise ParameterError("disturbance switch times must be non-decreasing")
        if self.d_star is not None:
            for t0, d in segs:
                if not norm2(d) < self.d_star:
                    raise ParameterError(
                        f"|d_mu| = {norm2(d)!r} at t={t0!r} violates the declared bound d_star={self.d_star!r}"
                    )
        object.__setattr__(self, "segments", segs)

    @property
    def kind(self) -> str:
        return "constant" if len(self.segments) == 1 else "piecewise"

    @classmethod
    def constant(cls, d_mu: Vec2, **kwargs: object) -> "DisturbanceSpec":
        return cls(segments=((0.0, as_vec2(d_mu)),), **kwargs)  # type: ignore[arg-type]

    @classmethod
    def none(cls) -> "DisturbanceSpec":
        return cls()


def disturbance_at(d: DisturbanceSpec, t: float) -> Vec2:
    current = d.segments[0][1]
    for t0, value in d.segments:
        if t0 <= t:
            current = value
        else:
            break
    return current


def compute_derived_params(geom: HelixGeometry, drag: DragCoefficients) -> DerivedParams:
    """결합 계수들. e11 = -b11 / a1."""
    s = math.sin(geom.theta_h)
    c = math.cos(geom.theta_h)
    if s == 0.0:
        raise ParameterError("sin(theta_h) = 0: coupling coefficients are undefined")
    xp, xn, xv = drag.xi_par, drag.xi_perp, drag.xi_vm
    n, r = geom.n_h, geom.r_h

    a_h1 = 2.0 * math.pi * n * r * (xp * c * c + xn * s * s) / s
    a_h2 = math.pi * n * r * (xn + xp * s * s + xn * c * c) / s
    b11 = 2.0 * math.pi * n * r * r * (xp - xn) * c
    a1 = a_h1 + xv
    a2 = a_h2 + xv
    derived = DerivedParams(
        a1=a1,
        a2=a2,
        b11=b11,
        b13=-b11 / math.tan(geom.theta_h),
        b22=-3.0 * b11 / 4.0,
        b23=xv * geom.k_h_mag,
        b33=-b11 / 4.0,
        e11=-b11 / a1,
    )
    if derived.e11 == 0.0:
        get_logger("model").warning("[model] xi_par == xi_perp: propulsion gain e11 is zero")
    return derived


def e11_closed_form(geom: HelixGeometry, drag: DragCoefficients) -> float:
    """결합 계수를 거치지 않고 e11 을 직접 계산하는 닫힌 식."""
    s = math.sin(geom.theta_h)
    c = math.cos(geom.theta_h)
    n, r = geom.n_h, geom.r_h
    num = -2.0 * math.pi * n * r * r * (drag.xi_par - drag.xi_perp) * c * s
    den = 2.0 * math.pi * n * r * (drag.xi_par * c * c + drag.xi_perp * s * s) + drag.xi_vm * s
    return num / den


def prototype_swimmer() -> SwimmerParams:
    """코일 권선 시제품. 항력 계수가 공개되지 않았으므로 e11 을 직접 지정한다."""
    geometry = HelixGeometry(
        theta_h=math.radians(PROTOTYPE_THETA_H_DEG),
        n_h=PROTOTYPE_N_H,
        r_h=PROTOTYPE_R_H,
    )
    return SwimmerParams.from_e11(PROTOTYPE_E11, geometry=geometry)


def plant_derivative(state: PlantState, u: Vec2, e11: float, d: DisturbanceSpec) -> Vec2:
    d_mu = disturbance_at(d, state.t)
    return (e11 * u[0] + d_mu[0], e11 * u[1] + d_mu[1])


def feedforward_command(
    v_des: Vec2,
    f_d_mag: float,
    alpha: float,
    params: DerivedParams,
) -> Tuple[float, float]:
    """
    중력 보상 피드포워드. f_d 는 추진이 떠받쳐야 하는 힘(예: 무게의 반대 방향),
    alpha 와 반환값 psi 는 v_des 방향에서 반시계로 잰 각도.
    반환: (psi [rad], |u| [rad/s])
    """
    if params.e11 == 0.0:
        raise NoPropulsionError("e11 = 0: the swimmer cannot be propelled by rotation")
    v_mag = norm2(v_des)
    if v_mag == 0.0 and f_d_mag == 0.0:
        raise SingularConfigurationError("both |v_des| and |f_d| are zero")
    num = f_d_mag * math.sin(alpha) / params.a2
    den = v_mag + f_d_mag * math.cos(alpha) / params.a2
    if den == 0.0 or abs(den) <= 1e-15 * max(v_mag, abs(num), 1e-300):
        raise SingularConfigurationError(
            f"direction equation is singular (|v_des| + |f_d| cos(alpha)/a2 = {den!r})"
        )
    psi = math.atan(num / den)
    u_mag = (v_mag * math.cos(psi) + f_d_mag * math.cos(alpha - psi) / params.a1) / params.e11
    return psi, u_mag


def _reference_direction(v_des: Vec2) -> float:
    if norm2(v_des) == 0.0:
        return 0.0
    return math.atan2(v_des[1], v_des[0])


def feedforward_closed_loop_velocity(
    v_des: Vec2,
    f_d_mag: float,
    alpha: float,
    psi: float,
    u_mag: float,
    params: DerivedParams,
) -> Vec2:
    """
    e11 * u + d_mu 를 증명의 분해식으로 재구성한다.
    나선축 k 는 v_des 에서 psi, f_d 는 v_des 에서 alpha 만큼 회전한 방향이고
    유도 드리프트는 d_mu = -D f_d,  D = k k^T / a1 + k_perp k_perp^T / a2.
    """
    ref = _reference_direction(v_des)
    k = (math.cos(ref + psi), math.sin(ref + psi))
    k_perp = (-k[1], k[0])
    f = rotate(ref + alpha, (f_d_mag, 0.0))
    f_par = f[0] * k[0] + f[1] * k[1]
    f_perp = f[0] * k_perp[0] + f[1] * k_perp[1]
    d_mu = (
        -(f_par / params.a1) * k[0] - (f_perp / params.a2) * k_perp[0],
        -(f_par / params.a1) * k[1] - (f_perp / params.a2) * k_perp[1],
    )
    return (
        params.e11 * u_mag * k[0] + d_mu[0],
        params.e11 * u_mag * k[1] + d_mu[1],
    )


__all__ = [
    "HelixGeometry",
    "DragCoefficients",
    "DerivedParams",
    "SwimmerParams",
    "PlantState",
    "DisturbanceSpec",
    "disturbance_at",
    "compute_derived_params",
    "e11_closed_form",
    "prototype_swimmer",
    "plant_derivative",
    "feedforward_command",
    "feedforward_closed_loop_velocity",
]
