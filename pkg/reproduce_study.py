"""
ILOS vs. conventional LOS 비교 연구 재현 스크립트

주요 기능
- conventional LOS (alpha_d = 600) 의 꼬리 오차가 목표값(기본 1.8 mm)이 되도록 외란을 폐루프 보정
- 같은 외란에서 ILOS 600 / conventional 600 / conventional 1200 실행
- 실행마다 trace.csv, manifest.txt, metrics.txt, trace.svg 기록
- 비교표 compare.csv 기록 + 출력, 판정 기준 확인 결과 로그

사용 예시
  python reproduce_study.py --out runs/study --workers 3

환경변수
- SLACK_WEBHOOK_URL: 비교표/오류 알림 (선택)
- HELIX_ILOS_THREADS: 병렬 실행 수 상한
"""

import argparse
import dataclasses
import os
import sys
from typing import Any, Dict, List, Optional, Sequence

from dotenv import load_dotenv

from helix_ilos.artifacts import write_run_artifacts, write_table_csv
from helix_ilos.cli import COMPARE_COLUMNS, compare_row, run_many
from helix_ilos.constants import (
    DEFAULT_ALPHA_D,
    DEFAULT_DELTA_LOS,
    DEFAULT_DT,
    DEFAULT_K_D,
    DEFAULT_OMEGA0,
    DEFAULT_OMEGA_SO_HZ,
    DEFAULT_P0,
    DEFAULT_SIGMA0,
    DEFAULT_T_END,
    DEFAULT_TAIL_WINDOW,
    TWO_PI,
)
from helix_ilos.controller import ControllerParams
from helix_ilos.errors import HelixIlosError
from helix_ilos.guidance import GuidanceParams, PathSpec, check_simplified_gains
from helix_ilos.logger import get_logger, setup_logging
from helix_ilos.model import prototype_swimmer
from helix_ilos.plot import write_trace_svg
from helix_ilos.sim import SimScenario, calibrate_disturbance_closed_loop
from helix_ilos.slack import format_table, notify_run_table


DEFAULT_TARGET_OFFSET = -1.8e-3


def study_scenario(
    mode: str = "ilos",
    alpha_d: float = DEFAULT_ALPHA_D,
    *,
    t_end: float = DEFAULT_T_END,
    dt: float = DEFAULT_DT,
) -> SimScenario:
    """시제품 스위머, theta_r = 0 직선, 기본 게인. 외란은 보정 전이라 0."""
    return SimScenario(
        swimmer=prototype_swimmer(),
        path=PathSpec(0.0),
        guidance=GuidanceParams(
            alpha_d=alpha_d,
            sigma0=DEFAULT_SIGMA0,
            k_d=DEFAULT_K_D,
            delta_los=DEFAULT_DELTA_LOS,
        ),
        controller=ControllerParams(omega_so=DEFAULT_OMEGA_SO_HZ * TWO_PI, omega0=DEFAULT_OMEGA0),
        p0=DEFAULT_P0,
        t_end=t_end,
        dt=dt,
        mode=mode,
        name=f"{mode}_{alpha_d:g}",
    )


def check_outcome(rows: Sequence[Dict[str, Any]], target_mm: float) -> List[str]:
    """판정 기준 위반 목록 (빈 목록이면 통과)."""
    by_name = {r["run"]: r for r in rows}
    problems: List[str] = []
    if any(r.get("error") for r in rows):
        problems.append("one or more runs failed")
        return problems
    ilos = by_name["ilos_600"]["mean_abs_eps_tail_mm"]
    conv = by_name["conventional_los_600"]["mean_abs_eps_tail_mm"]
    conv_hi = by_name["conventional_los_1200"]["mean_abs_eps_tail_mm"]
    if abs(conv - target_mm) > 0.02 * target_mm:
        problems.append(f"conventional 600 tail error {conv:.4f} mm is not within 2% of {target_mm:.4f} mm")
    if not (ilos <= 0.15 and ilos * 10.0 <= conv):
        problems.append(f"ILOS tail error {ilos:.4f} mm is not <= 0.15 mm and 10x below conventional")
    if abs(conv_hi - target_mm / 2.0) > 0.25 * target_mm / 2.0:
        problems.append(f"conventional 1200 tail error {conv_hi:.4f} mm is not within 25% of {target_mm / 2.0:.4f} mm")
    if not by_name["ilos_600"]["ss_rotation_speed_rad_s"] < by_name["conventional_los_1200"]["ss_rotation_speed_rad_s"]:
        problems.append("ILOS steady rotation speed is not below conventional LOS at alpha_d = 1200")
    return problems


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv()

    parser = argparse.ArgumentParser(description="ILOS vs. conventional LOS 비교 연구 재현")
    parser.add_argument("--out", type=str, default="runs/study", help="출력 디렉터리")
    parser.add_argument(
        "--target-offset",
        type=float,
        default=DEFAULT_TARGET_OFFSET,
        help="conventional LOS (alpha_d=600) 꼬리 오차 목표 [m], 부호 = 법선 방향",
    )
    parser.add_argument("--t-end", type=float, default=DEFAULT_T_END, help="실행 길이 [s]")
    parser.add_argument("--dt", type=float, default=DEFAULT_DT, help="적분 간격 [s]")
    parser.add_argument("--tail-window", type=float, default=DEFAULT_TAIL_WINDOW, help="꼬리 구간 길이 [s]")
    parser.add_argument("--workers", type=int, default=None, help="병렬 실행 수")
    parser.add_argument("--no-plots", action="store_true", help="SVG 생성 생략")
    # Logging 옵션
    parser.add_argument("--log-level", type=str, default=os.getenv("LOG_LEVEL", "INFO"), help="로그 레벨")
    parser.add_argument("--json-logs", action="store_true", help="로그를 JSON 포맷으로 출력")
    parser.add_argument("--log-file", type=str, default=os.getenv("LOG_FILE"), help="로그 파일 경로")
    # Slack 옵션
    parser.add_argument(
        "--slack-webhook-url",
        type=str,
        default=os.getenv("SLACK_WEBHOOK_URL"),
        help="Slack Incoming Webhook URL (환경변수 SLACK_WEBHOOK_URL 기본)",
    )
    parser.add_argument(
        "--slack-log-level",
        type=str,
        default=os.getenv("SLACK_LOG_LEVEL", "ERROR"),
        help="Slack로 전송할 최소 로그 레벨",
    )
    args = parser.parse_args(argv)

    setup_logging(
        level=args.log_level,
        json_logs=args.json_logs,
        log_file=args.log_file,
        slack_webhook_url=args.slack_webhook_url,
        slack_min_level=args.slack_log_level,
    )
    log = get_logger("study")

    base = study_scenario(t_end=args.t_end, dt=args.dt)
    lhs, ok = check_simplified_gains(base.guidance)
    log.info("[study] simplified gain condition lhs=%.3f ok=%s", lhs, ok)

    conv_600 = study_scenario("conventional_los", DEFAULT_ALPHA_D, t_end=args.t_end, dt=args.dt)
    try:
        d = calibrate_disturbance_closed_loop(conv_600, args.target_offset, tail_window=args.tail_window)
    except HelixIlosError as e:
        log.error("[study] calibration failed: %s", e)
        print(f"error: {e}", file=sys.stderr)
        return 3
    d_mu = d.segments[0][1]
    log.info("[study] calibrated d_mu=(%r, %r) source=%s", d_mu[0], d_mu[1], d.provenance)

    scenarios = [
        dataclasses.replace(study_scenario("ilos", 600.0, t_end=args.t_end, dt=args.dt), disturbance=d),
        dataclasses.replace(conv_600, disturbance=d),
        dataclasses.replace(study_scenario("conventional_los", 1200.0, t_end=args.t_end, dt=args.dt), disturbance=d),
    ]
    results = run_many(scenarios, args.tail_window, args.workers)

    rows = []
    provenance = {
        "omega_so_input": f"{DEFAULT_OMEGA_SO_HZ!r} hz",
        "calibrate_offset": repr(args.target_offset),
    }
    for scenario, (trace, metrics, error) in zip(scenarios, results):
        if trace is not None and metrics is not None:
            out_dir = os.path.join(args.out, scenario.name)
            write_run_artifacts(out_dir, scenario, trace, metrics, provenance)
            if not args.no_plots:
                write_trace_svg(
                    os.path.join(out_dir, "trace.svg"),
                    trace,
                    omega_so=scenario.controller.omega_so,
                    theta_r=scenario.path.theta_r,
                    title=f"{scenario.name} (alpha_d = {scenario.guidance.alpha_d:g})",
                )
        else:
            log.error("[study] run %s failed: %s", scenario.name, error)
        rows.append(compare_row(scenario.name, "builtin", scenario, metrics, error))

    os.makedirs(args.out, exist_ok=True)
    write_table_csv(os.path.join(args.out, "compare.csv"), COMPARE_COLUMNS, rows)
    print(format_table(COMPARE_COLUMNS, rows))

    problems = check_outcome(rows, abs(args.target_offset) * 1e3)
    for p in problems:
        log.warning("[study] %s", p)
    if not problems:
        log.info("[study] comparison matches the expected ordering and bands")
    notify_run_table("helix-ilos study", rows, COMPARE_COLUMNS, webhook_url=args.slack_webhook_url)
    return 3 if any(r["error"] for r in rows) else 0


if __name__ == "__main__":
    sys.exit(main())
