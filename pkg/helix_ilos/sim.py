"""
폐루프 시뮬레이션 (플랜트 + ILOS 유도 + ODS 제어기)

고정 간격 고전 RK4. 제어 입력은 각 스테이지에서 다시 계산한다(연속 제어).
hold_dt 를 주면 그 주기로 샘플링한 u 를 다음 샘플까지 모든 스테이지에 유지한다.
트레이스 시각은 누적합이 아니라 k * dt 로 찍는다.
"""

import dataclasses
import itertools
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .constants import DEFAULT_TAIL_WINDOW, DIVERGENCE_RADIUS
from .controller import ControllerParams, control_from_velocity, equal_weight_control, within_step_out
from .errors import DivergedRunError, ParameterError
from .guidance import GuidanceParams, PathSpec, check_simplified_gains, cross_track, field_xy, integral_rate
from .logger import get_logger
from .model import DisturbanceSpec, SwimmerParams, disturbance_at
from .utils import Vec2, as_vec2, norm2, worker_count


logger = get_logger("sim")

MODES = ("ilos", "conventional_los")


@dataclass(frozen=True)
class SimScenario:
    swimmer: SwimmerParams
    path: PathSpec
    guidance: GuidanceParams
    controller: ControllerParams
    disturbance: DisturbanceSpec = DisturbanceSpec()
    p0: Vec2 = (0.0, 0.0)
    s0: float = 0.0
    t_end: float = 100.0
    dt: float = 1e-3
    mode: str = "ilos"
    hold_dt: Optional[float] = None
    name: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ParameterError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ParameterError(f"dt must be > 0, got {self.dt!r}")
        if not self.t_end >= self.dt:
            raise ParameterError(f"t_end ({self.t_end!r}) must be >= dt ({self.dt!r})")
        if not math.isfinite(self.s0):
            raise ParameterError(f"s0 must be finite, got {self.s0!r}")
        object.__setattr__(self, "p0", as_vec2(self.p0))
        if self.hold_dt is not None:
            ratio = self.hold_dt / self.dt
            if not (self.hold_dt > 0 and abs(ratio - round(ratio)) <= 1e-9 * ratio and round(ratio) >= 1):
                raise ParameterError(f"hold_dt ({self.hold_dt!r}) must be a positive integer multiple of dt")
        # conventional LOS: 적분 이득 0, s 는 s0 로 고정
        if self.mode == "conventional_los" and self.guidance.sigma0 != 0.0:
            object.__setattr__(self, "guidance", dataclasses.replace(self.guidance, sigma0=0.0))

    @property
    def steps(self) -> int:
        return int(math.floor(self.t_end / self.dt + 1e-9))

    @property
    def hold_every(self) -> Optional[int]:
        if self.hold_dt is None:
            return None
        return int(round(self.hold_dt / self.dt))


class TraceRecord(NamedTuple):
    t: float
    p_x: float
    p_z: float
    eps: float
    z: float
    s: float
    u_x: float
    u_z: float
    u_mag: float
    v_x: float
    v_z: float
    saturated: bool


@dataclass(frozen=True)
class ClosedLoopState:
    k: int
    p: Vec2
    s: float
    held_u: Optional[Tuple[float, float, bool]] = None


@dataclass(frozen=True)
class RunMetrics:
    mean_abs_eps_tail: float
    tail_window: float
    ss_rotation_speed: float
    max_u_mag: float
    converged: bool
    ss_speed: float = 0.0
    final_eps: float = 0.0


class _ClosedLoop:
    """시나리오 상수를 미리 풀어둔 미분 계산기. 내부 루프는 float 튜플만 쓴다."""

    def __init__(self, scenario: SimScenario) -> None:
        self.scenario = scenario
        g = scenario.guidance
        ctl = scenario.controller
        self.cos_r = math.cos(scenario.path.theta_r)
        self.sin_r = math.sin(scenario.path.theta_r)
        self.alpha_d = g.alpha_d
        self.sigma0 = g.sigma0
        self.k_d = g.k_d
        self.delta = g.delta_los
        self.freeze_s = scenario.mode == "conventional_los"
        self.e11 = scenario.swimmer.e11
        segments = scenario.disturbance.segments
        self.constant_d: Optional[Vec2] = segments[0][1] if len(segments) == 1 else None
        self.ctl = ctl
        self.equal = ctl.equal_weights
        q1, q2 = ctl.weights
        self.gx_scale = ctl.e11_hat * q1
        self.gz_scale = ctl.e11_hat * q2
        self.omega0 = ctl.effective_omega0
        self.omega_so = ctl.omega_so
        self.d_hat = ctl.d_mu_hat
        self.dt = scenario.dt
        self.hold_every = scenario.hold_every

    def disturbance(self, t: float) -> Vec2:
        if self.constant_d is not None:
            return self.constant_d
        return disturbance_at(self.scenario.disturbance, t)

    def control(self, px: float, pz: float, s: float) -> Tuple[float, float, bool, float]:
        eps = cross_track(px, pz, self.cos_r, self.sin_r)
        vx, vz = field_xy(eps, s, self.cos_r, self.sin_r, self.alpha_d, self.sigma0, self.delta)
        if self.equal:
            ux, uz, sat = equal_weight_control(
                self.gx_scale * (self.d_hat[0] - vx),
                self.gz_scale * (self.d_hat[1] - vz),
                self.omega0,
                self.omega_so,
            )
            return ux, uz, sat, eps
        ux, uz, sat = control_from_velocity((vx, vz), self.ctl)
        return ux, uz, sat, eps

    def rates(
        self, t: float, px: float, pz: float, s: float, held: Optional[Tuple[float, float, bool]]
    ) -> Tuple[float, float, float, float, float, bool, float]:
        """(px_dot, pz_dot, s_dot, u_x, u_z, saturated, eps)"""
        if held is None:
            ux, uz, sat, eps = self.control(px, pz, s)
        else:
            ux, uz, sat = held
            eps = cross_track(px, pz, self.cos_r, self.sin_r)
        dx, dz = self.disturbance(t)
        if self.freeze_s:
            sdot = 0.0
        else:
            sdot = integral_rate(eps, s, self.sigma0, self.k_d, self.delta)
        return self.e11 * ux + dx, self.e11 * uz + dz, sdot, ux, uz, sat, eps

    def record(
        self, t: float, px: float, pz: float, s: float, r: Tuple[float, float, float, float, float, bool, float]
    ) -> TraceRecord:
        vx, vz, _, ux, uz, sat, eps = r
        return TraceRecord(
            t=t,
            p_x=px,
            p_z=pz,
            eps=eps,
            z=self.cos_r * px + self.sin_r * pz,
            s=s,
            u_x=ux,
            u_z=uz,
            u_mag=math.hypot(ux, uz),
            v_x=vx,
            v_z=vz,
            saturated=sat,
        )

    def held_for(self, state: ClosedLoopState) -> Optional[Tuple[float, float, bool]]:
        if self.hold_every is None:
            return None
        if state.held_u is None or state.k % self.hold_every == 0:
            ux, uz, sat, _ = self.control(state.p[0], state.p[1], state.s)
            return (ux, uz, sat)
        return state.held_u

    def advance(self, state: ClosedLoopState) -> Tuple[ClosedLoopState, TraceRecord]:
        dt = self.dt
        h = 0.5 * dt
        t = state.k * dt
        px, pz = state.p
        s = state.s
        held = self.held_for(state)

        r1 = self.rates(t, px, pz, s, held)
        r2 = self.rates(t + h, px + h * r1[0], pz + h * r1[1], s + h * r1[2], held)
        r3 = self.rates(t + h, px + h * r2[0], pz + h * r2[1], s + h * r2[2], held)
        r4 = self.rates(t + dt, px + dt * r3[0], pz + dt * r3[1], s + dt * r3[2], held)

        w = dt / 6.0
        nx = px + w * (r1[0] + 2.0 * r2[0] + 2.0 * r3[0] + r4[0])
        nz = pz + w * (r1[1] + 2.0 * r2[1] + 2.0 * r3[1] + r4[1])
        ns = s + w * (r1[2] + 2.0 * r2[2] + 2.0 * r3[2] + r4[2])

        rec = self.record(t, px, pz, s, r1)
        return ClosedLoopState(k=state.k + 1, p=(nx, nz), s=ns, held_u=held), rec

    def final_record(self, state: ClosedLoopState) -> TraceRecord:
        t = state.k * self.dt
        held = self.held_for(state)
        r = self.rates(t, state.p[0], state.p[1], state.s, held)
        return self.record(t, state.p[0], state.p[1], state.s, r)


def _is_diverged(state: ClosedLoopState) -> bool:
    px, pz = state.p
    if not (math.isfinite(px) and math.isfinite(pz) and math.isfinite(state.s)):
        return True
    return math.hypot(px, pz) > DIVERGENCE_RADIUS


def initial_state(scenario: SimScenario) -> ClosedLoopState:
    return ClosedLoopState(k=0, p=scenario.p0, s=scenario.s0)


def step(state: ClosedLoopState, scenario: SimScenario) -> Tuple[ClosedLoopState, TraceRecord]:
    """한 dt 전진. 반환 레코드는 전진 전(스텝 경계) 상태의 것."""
    nxt, rec = _ClosedLoop(scenario).advance(state)
    if _is_diverged(nxt):
        raise DivergedRunError(
            f"state left the admissible region at t={nxt.k * scenario.dt:.6g}s (p={nxt.p}, s={nxt.s})",
            last_record=rec,
            trace=[rec],
        )
    return nxt, rec


def run_metrics(
    trace: Sequence[TraceRecord],
    tail_window: float = DEFAULT_TAIL_WINDOW,
) -> RunMetrics:
    if not trace:
        raise ParameterError("empty trace")
    t_last = trace[-1].t
    window = min(max(tail_window, 0.0), t_last - trace[0].t)
    start = t_last - window - 1e-9 * max(1.0, t_last)
    tail = [r for r in trace if r.t >= start]
    eps = np.array([r.eps for r in tail])
    u_mag = np.array([r.u_mag for r in tail])
    speed = np.hypot([r.v_x for r in tail], [r.v_z for r in tail])
    mean_abs = float(np.mean(np.abs(eps)))
    spread = float(np.ptp(eps))
    return RunMetrics(
        mean_abs_eps_tail=mean_abs,
        tail_window=window,
        ss_rotation_speed=float(np.mean(u_mag)),
        max_u_mag=max(r.u_mag for r in trace),
        converged=spread <= max(0.1 * mean_abs, 1e-6),
        ss_speed=float(np.mean(speed)),
        final_eps=trace[-1].eps,
    )


def run(
    scenario: SimScenario,
    tail_window: float = DEFAULT_TAIL_WINDOW,
) -> Tuple[List[TraceRecord], RunMetrics]:
    loop = _ClosedLoop(scenario)
    state = initial_state(scenario)
    trace: List[TraceRecord] = []
    n = scenario.steps
    extra = {"scenario": scenario.name or scenario.mode}
    logger.info(
        "[sim] start mode=%s alpha_d=%s steps=%d dt=%s",
        scenario.mode,
        scenario.guidance.alpha_d,
        n,
        scenario.dt,
        extra=extra,
    )
    started = time.monotonic()
    for _ in range(n):
        state, rec = loop.advance(state)
        trace.append(rec)
        if _is_diverged(state):
            logger.error(
                "[sim] diverged at t=%.6gs p=%s s=%s",
                state.k * scenario.dt,
                state.p,
                state.s,
                extra=extra,
            )
            raise DivergedRunError(
                f"run diverged at t={state.k * scenario.dt:.6g}s (|p| > {DIVERGENCE_RADIUS} m or non-finite state)",
                last_record=rec,
                trace=trace,
            )
    trace.append(loop.final_record(state))
    metrics = run_metrics(trace, tail_window)
    if not within_step_out(metrics.max_u_mag, scenario.controller.omega_so):
        logger.warning(
            "[sim] max |u|=%r exceeds the step-out limit %r",
            metrics.max_u_mag,
            scenario.controller.omega_so,
            extra=extra,
        )
    logger.info(
        "[sim] done in %.2fs tail|eps|=%.4fmm ss|u|=%.4frad/s",
        time.monotonic() - started,
        metrics.mean_abs_eps_tail * 1e3,
        metrics.ss_rotation_speed,
        extra=extra,
    )
    return trace, metrics


# ---- 외란 보정 ---------------------------------------------------------------

def calibrate_disturbance(
    target_offset: float,
    g: GuidanceParams,
    e11: float,
    path: PathSpec = PathSpec(),
) -> DisturbanceSpec:
    """conventional LOS 정상상태 eps_ss = d_perp / (e11 alpha_d) 를 뒤집는다."""
    if not e11 * g.alpha_d > 0:
        raise ParameterError(f"e11 * alpha_d must be > 0, got {e11 * g.alpha_d!r}")
    d_perp = target_offset * e11 * g.alpha_d
    n = path.normal
    d = (d_perp * n[0], d_perp * n[1])
    logger.info("[sim] analytic calibration target=%r d_perp=%r", target_offset, d_perp)
    return DisturbanceSpec.constant(d, calibrated=True, provenance=f"analytic target={target_offset!r}")


def _tail_error_for(scenario: SimScenario, magnitude: float, sign: float, tail_window: float) -> float:
    n = scenario.path.normal
    d = DisturbanceSpec.constant((sign * magnitude * n[0], sign * magnitude * n[1]))
    _, metrics = run(dataclasses.replace(scenario, disturbance=d), tail_window)
    return metrics.mean_abs_eps_tail


def calibrate_disturbance_closed_loop(
    scenario: SimScenario,
    target_offset: float,
    *,
    rel_tol: float = 2e-3,
    max_iter: int = 8,
    tail_window: float = DEFAULT_TAIL_WINDOW,
) -> DisturbanceSpec:
    """
    conventional LOS 로 실제 시뮬레이션한 꼬리 오차가 |target| 이 되도록
    외란 크기를 할선법으로 맞춘다. 해석식 보정값에서 출발한다.
    """
    conv = dataclasses.replace(scenario, mode="conventional_los")
    target = abs(target_offset)
    sign = 1.0 if target_offset >= 0 else -1.0
    n = conv.path.normal
    if target == 0.0:
        return DisturbanceSpec.constant((0.0, 0.0), calibrated=True, provenance="closed_loop target=0.0")

    analytic = calibrate_disturbance(target, conv.guidance, conv.swimmer.e11, conv.path)
    m_prev = norm2(analytic.segments[0][1])
    f_prev = _tail_error_for(conv, m_prev, sign, tail_window) - target
    m = m_prev
    if abs(f_prev) > rel_tol * target:
        # 꼬리 오차는 외란 크기에 거의 비례하므로 첫 추정은 비례 스케일
        m = m_prev * target / (f_prev + target) if f_prev + target > 0 else 2.0 * m_prev
        for i in range(max_iter):
            f = _tail_error_for(conv, m, sign, tail_window) - target
            logger.info("[sim] closed-loop calibration iter=%d d_perp=%r err=%+.5fmm", i, m, f * 1e3)
            if abs(f) <= rel_tol * target or f == f_prev:
                break
            m_next = m - f * (m - m_prev) / (f - f_prev)
            m_prev, f_prev = m, f
            m = m_next if m_next > 0 else 0.5 * m
        else:
            logger.warning("[sim] closed-loop calibration stopped after %d iterations", max_iter)

    return DisturbanceSpec.constant(
        (sign * m * n[0], sign * m * n[1]),
        calibrated=True,
        provenance=f"closed_loop target={target_offset!r} alpha_d={conv.guidance.alpha_d!r}",
    )


def fit_exponential_rate(times: Sequence[float], values: Sequence[float]) -> Tuple[float, float]:
    """values ~ C exp(-c t) 최소제곱 적합. 양수 값만 쓴다. (C, c)"""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    mask = v > 0
    if mask.sum() < 2:
        raise ParameterError("need at least two positive samples to fit a decay rate")
    slope, intercept = np.polyfit(t[mask], np.log(v[mask]), 1)
    return float(np.exp(intercept)), float(-slope)


# ---- 파라미터 스윕 -----------------------------------------------------------

def with_overrides(scenario: SimScenario, overrides: Mapping[str, Any]) -> SimScenario:
    """'guidance.alpha_d' 처럼 점으로 이어진 필드 경로에 값을 덮어쓴 시나리오."""
    for path, value in overrides.items():
        parts = path.split(".")
        if len(parts) == 1:
            if not hasattr(scenario, parts[0]):
                raise ParameterError(f"unknown scenario field {path!r}")
            scenario = dataclasses.replace(scenario, **{parts[0]: value})
        elif len(parts) == 2:
            head, leaf = parts
            sub = getattr(scenario, head, None)
            if sub is None or not dataclasses.is_dataclass(sub) or not hasattr(sub, leaf):
                raise ParameterError(f"unknown scenario field {path!r}")
            if isinstance(sub, SwimmerParams) and leaf == "e11":
                new_sub: Any = SwimmerParams.from_e11(value, geometry=sub.geometry)
            else:
                new_sub = dataclasses.replace(sub, **{leaf: value})
            scenario = dataclasses.replace(scenario, **{head: new_sub})
        else:
            raise ParameterError(f"field path too deep: {path!r}")
    return scenario


@dataclass(frozen=True)
class SweepRow:
    point: Dict[str, Any]
    metrics: Optional[RunMetrics]
    simplified_lhs: float
    simplified_ok: bool
    error: Optional[str] = None


def grid_points(grid: Mapping[str, Sequence[Any]]) -> List[Dict[str, Any]]:
    if not grid:
        raise ParameterError("sweep grid is empty")
    keys = sorted(grid)
    for k in keys:
        if len(grid[k]) == 0:
            raise ParameterError(f"sweep grid entry {k!r} has no values")
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


def _run_point(args: Tuple[SimScenario, Dict[str, Any], float]) -> SweepRow:
    base, point, tail_window = args
    try:
        scenario = with_overrides(base, point)
    except (ParameterError, TypeError) as e:
        logger.error("[sweep] invalid grid point %s: %s", point, e, extra={"grid_point": point})
        return SweepRow(point=point, metrics=None, simplified_lhs=float("nan"), simplified_ok=False, error=str(e))
    lhs, ok = check_simplified_gains(scenario.guidance)
    try:
        _, metrics = run(scenario, tail_window)
    except Exception as e:
        logger.error("[sweep] point %s failed: %s", point, e, extra={"grid_point": point})
        return SweepRow(point=point, metrics=None, simplified_lhs=lhs, simplified_ok=ok, error=str(e))
    if not ok:
        logger.warning("[sweep] point %s violates the simplified gain condition (lhs=%.4f)", point, lhs)
    return SweepRow(point=point, metrics=metrics, simplified_lhs=lhs, simplified_ok=ok)


def sweep(
    base: SimScenario,
    grid: Mapping[str, Sequence[Any]],
    *,
    workers: Optional[int] = None,
    tail_window: float = DEFAULT_TAIL_WINDOW,
) -> List[SweepRow]:
    points = grid_points(grid)
    n = worker_count(workers, len(points))
    logger.info("[sweep] %d points on %d worker(s)", len(points), n)
    jobs = [(base, p, tail_window) for p in points]
    if n == 1:
        return [_run_point(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(_run_point, jobs))


__all__ = [
    "MODES",
    "SimScenario",
    "TraceRecord",
    "ClosedLoopState",
    "RunMetrics",
    "SweepRow",
    "initial_state",
    "step",
    "run",
    "run_metrics",
    "calibrate_disturbance",
    "calibrate_disturbance_closed_loop",
    "fit_exponential_rate",
    "with_overrides",
    "grid_points",
    "sweep",
]
