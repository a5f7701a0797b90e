import argparse
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from dotenv import load_dotenv

from .artifacts import (
    metrics_report,
    read_trace,
    write_run_artifacts,
    write_table_csv,
    write_trace,
)
from .config import grid_from_args, load_scenario
from .constants import DEFAULT_TAIL_WINDOW, TWO_PI
from .errors import ConfigError, DivergedRunError, HelixIlosError, InvalidCertificateError, TraceFormatError
from .guidance import certify_stability, check_simplified_gains, default_certificate
from .logger import get_logger, setup_logging
from .plot import write_trace_svg
from .sim import RunMetrics, SimScenario, TraceRecord, calibrate_disturbance, calibrate_disturbance_closed_loop, run, sweep
from .slack import format_table, notify_run_table
from .utils import format_float, worker_count


EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
# 발산 외의 실행 실패 (TRS 수치 실패 등)
EXIT_RUN_FAILED = EXIT_DIVERGED

COMPARE_COLUMNS = [
    "run",
    "config",
    "mode",
    "alpha_d",
    "mean_abs_eps_tail_mm",
    "ss_rotation_speed_rad_s",
    "ss_rotation_speed_hz",
    "converged",
    "error",
]

log = get_logger("cli")


def _fail(code: int, reason: str) -> int:
    print(f"error: {reason}", file=sys.stderr)
    return code


def _print_report(report: Dict[str, Any]) -> None:
    for key, value in report.items():
        text = format_float(value) if isinstance(value, float) else str(value)
        print(f"{key} = {text}")


# ---- simulate ----------------------------------------------------------------

def cmd_simulate(args: argparse.Namespace) -> int:
    try:
        loaded = load_scenario(args.config, allow_extra_sections=True)
    except ConfigError as e:
        return _fail(EXIT_CONFIG, str(e))
    scenario = loaded.scenario
    try:
        trace, metrics = run(scenario, args.tail_window)
    except DivergedRunError as e:
        if e.trace:
            os.makedirs(args.out, exist_ok=True)
            write_trace(os.path.join(args.out, "trace.csv"), e.trace)
        log.error("[cli] %s: %s", args.config, e, extra={"scenario": scenario.name})
        return _fail(EXIT_DIVERGED, str(e))
    except HelixIlosError as e:
        log.error("[cli] %s: run failed: %s", args.config, e, extra={"scenario": scenario.name})
        return _fail(EXIT_RUN_FAILED, f"run failed: {e}")
    write_run_artifacts(args.out, scenario, trace, metrics, loaded.provenance)
    _print_report(metrics_report(metrics, scenario))
    return EXIT_OK


# ---- compare -----------------------------------------------------------------

def _safe_run(job: Tuple[SimScenario, float]) -> Tuple[Optional[List[TraceRecord]], Optional[RunMetrics], Optional[str]]:
    scenario, tail_window = job
    try:
        trace, metrics = run(scenario, tail_window)
    except HelixIlosError as e:
        return None, None, str(e)
    return trace, metrics, None


def run_many(
    scenarios: Sequence[SimScenario],
    tail_window: float = DEFAULT_TAIL_WINDOW,
    workers: Optional[int] = None,
) -> List[Tuple[Optional[List[TraceRecord]], Optional[RunMetrics], Optional[str]]]:
    jobs = [(s, tail_window) for s in scenarios]
    n = worker_count(workers, len(jobs))
    if n == 1:
        return [_safe_run(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(_safe_run, jobs))


def compare_row(label: str, config: str, scenario: SimScenario, metrics: Optional[RunMetrics], error: Optional[str]) -> Dict[str, Any]:
    row: Dict[str, Any] = {
        "run": label,
        "config": config,
        "mode": scenario.mode,
        "alpha_d": scenario.guidance.alpha_d,
        "error": error or "",
    }
    if metrics is not None:
        row.update(
            mean_abs_eps_tail_mm=metrics.mean_abs_eps_tail * 1e3,
            ss_rotation_speed_rad_s=metrics.ss_rotation_speed,
            ss_rotation_speed_hz=metrics.ss_rotation_speed / TWO_PI,
            converged="true" if metrics.converged else "false",
        )
    return row


def cmd_compare(args: argparse.Namespace) -> int:
    configs = [("a", args.config_a), ("b", args.config_b)]
    scenarios = []
    try:
        for label, path in configs:
            scenarios.append((label, path, load_scenario(path, allow_extra_sections=True)))
    except ConfigError as e:
        return _fail(EXIT_CONFIG, str(e))

    results = run_many([s.scenario for _, _, s in scenarios], args.tail_window, args.workers)
    rows = []
    diverged = False
    for (label, path, loaded), (trace, metrics, error) in zip(scenarios, results):
        if error is not None:
            diverged = True
            log.error("[cli] compare run %s (%s) failed: %s", label, path, error)
        elif trace is not None and metrics is not None:
            write_run_artifacts(os.path.join(args.out, label), loaded.scenario, trace, metrics, loaded.provenance)
        rows.append(compare_row(label, path, loaded.scenario, metrics, error))

    os.makedirs(args.out, exist_ok=True)
    write_table_csv(os.path.join(args.out, "compare.csv"), COMPARE_COLUMNS, rows)
    print(format_table(COMPARE_COLUMNS, rows))
    notify_run_table("helix-ilos compare", rows, COMPARE_COLUMNS, webhook_url=args.slack_webhook_url)
    return EXIT_DIVERGED if diverged else EXIT_OK


# ---- certify -----------------------------------------------------------------

def certificate_report(args: argparse.Namespace) -> Dict[str, Any]:
    loaded = load_scenario(args.config, allow_extra_sections=True)
    g = loaded.scenario.guidance
    lhs, ok = check_simplified_gains(g)
    report: Dict[str, Any] = {
        "mode": loaded.scenario.mode,
        "alpha_d": g.alpha_d,
        "sigma0": g.sigma0,
        "k_d": g.k_d,
        "delta_los": g.delta_los,
        "simplified_lhs": f"{lhs:.3f}",
        "simplified_lhs_exact": lhs,
        "simplified_ok": "true" if ok else "false",
    }
    try:
        if args.p11 is not None:
            P = np.array([[args.p11, args.p12], [args.p12, args.p22]], dtype=float)
            cert = certify_stability(g, P)
            report["certificate"] = "user"
        else:
            cert = default_certificate(g)
            report["certificate"] = "lyapunov(Gamma=I)"
    except InvalidCertificateError as e:
        report["certificate"] = f"unavailable ({e})"
        report["ges_ok"] = "false"
        report["iss_ok"] = "false"
        return report
    report.update(
        {
            "p11": float(cert.P[0, 0]),
            "p12": float(cert.P[0, 1]),
            "p22": float(cert.P[1, 1]),
            "lambda_min_gamma": cert.lambda_min_gamma,
            "ges_threshold": cert.ges_threshold,
            "iss_threshold": cert.iss_threshold,
            "ges_ok": "true" if cert.ges_ok else "false",
            "iss_ok": "true" if cert.iss_ok else "false",
            "iss_radius_per_dstar": cert.iss_radius_per_dstar,
        }
    )
    return report


def cmd_certify(args: argparse.Namespace) -> int:
    if (args.p11 is None) != (args.p22 is None):
        return _fail(EXIT_CONFIG, "--p11 and --p22 must be given together")
    try:
        report = certificate_report(args)
    except ConfigError as e:
        return _fail(EXIT_CONFIG, str(e))
    log.info(
        "[certify] %s: ges=%s iss=%s lhs=%s",
        args.config,
        report["ges_ok"],
        report["iss_ok"],
        report["simplified_lhs"],
    )
    _print_report(report)
    return EXIT_OK


# ---- plot --------------------------------------------------------------------

def cmd_plot(args: argparse.Namespace) -> int:
    try:
        trace = read_trace(args.trace)
    except TraceFormatError as e:
        return _fail(EXIT_CONFIG, str(e))
    if not trace:
        return _fail(EXIT_CONFIG, f"{args.trace}: trace has no rows")
    write_trace_svg(
        args.out,
        trace,
        omega_so=args.omega_so,
        theta_r=math.radians(args.theta_r_deg),
        title=args.title or os.path.basename(args.trace),
    )
    return EXIT_OK


# ---- sweep -------------------------------------------------------------------

def cmd_sweep(args: argparse.Namespace) -> int:
    try:
        base = load_scenario(args.config, allow_extra_sections=True).scenario
        grid = grid_from_args(args.grid)
    except ConfigError as e:
        return _fail(EXIT_CONFIG, str(e))
    try:
        rows = sweep(base, grid, workers=args.workers, tail_window=args.tail_window)
    except HelixIlosError as e:
        return _fail(EXIT_CONFIG, str(e))

    keys = sorted(grid)
    columns = keys + [
        "mean_abs_eps_tail_mm",
        "ss_rotation_speed_rad_s",
        "max_u_mag_rad_s",
        "converged",
        "simplified_lhs",
        "simplified_ok",
        "error",
    ]
    table = []
    for r in rows:
        row: Dict[str, Any] = dict(r.point)
        row["simplified_lhs"] = r.simplified_lhs
        row["simplified_ok"] = "true" if r.simplified_ok else "false"
        row["error"] = r.error or ""
        if r.metrics is not None:
            row["mean_abs_eps_tail_mm"] = r.metrics.mean_abs_eps_tail * 1e3
            row["ss_rotation_speed_rad_s"] = r.metrics.ss_rotation_speed
            row["max_u_mag_rad_s"] = r.metrics.max_u_mag
            row["converged"] = "true" if r.metrics.converged else "false"
        table.append(row)

    os.makedirs(args.out, exist_ok=True)
    write_table_csv(os.path.join(args.out, "sweep.csv"), columns, table)
    print(format_table(columns, table))
    notify_run_table("helix-ilos sweep", table, columns, webhook_url=args.slack_webhook_url)
    return EXIT_OK


# ---- calibrate ---------------------------------------------------------------

def cmd_calibrate(args: argparse.Namespace) -> int:
    try:
        scenario = load_scenario(args.config, allow_extra_sections=True).scenario
    except ConfigError as e:
        return _fail(EXIT_CONFIG, str(e))
    try:
        if args.closed_loop:
            d = calibrate_disturbance_closed_loop(scenario, args.target, tail_window=args.tail_window)
        else:
            d = calibrate_disturbance(args.target, scenario.guidance, scenario.swimmer.e11, scenario.path)
    except DivergedRunError as e:
        return _fail(EXIT_DIVERGED, str(e))
    except HelixIlosError as e:
        return _fail(EXIT_CONFIG, str(e))
    d_mu = d.segments[0][1]
    print(f"# {d.provenance}")
    print(f"d_mu_x = {format_float(d_mu[0])}")
    print(f"d_mu_z = {format_float(d_mu[1])}")
    return EXIT_OK


# ---- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="helix-ilos",
        description="나선형 마이크로 스위머 ILOS 경로 추종 시뮬레이터",
    )
    # Logging 옵션
    parser.add_argument(
        "--log-level",
        type=str,
        default=os.getenv("LOG_LEVEL", "INFO"),
        help="로그 레벨 (DEBUG, INFO, WARNING, ERROR, CRITICAL)",
    )
    parser.add_argument("--json-logs", action="store_true", help="로그를 JSON 포맷으로 출력")
    parser.add_argument(
        "--log-file",
        type=str,
        default=os.getenv("LOG_FILE"),
        help="로그 파일 경로 (지정 시 회전 파일 핸들러 활성화)",
    )
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

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="시나리오 1개 실행 -> trace.csv, manifest.txt, metrics.txt")
    p.add_argument("--config", required=True, help="시나리오 파일 (매니페스트도 가능)")
    p.add_argument("--out", required=True, help="출력 디렉터리")
    p.add_argument("--tail-window", type=float, default=DEFAULT_TAIL_WINDOW, help="꼬리 구간 길이 [s]")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="두 시나리오 나란히 실행 -> compare.csv")
    p.add_argument("--config-a", required=True)
    p.add_argument("--config-b", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--tail-window", type=float, default=DEFAULT_TAIL_WINDOW)
    p.add_argument("--workers", type=int, default=None, help="병렬 실행 수 (HELIX_ILOS_THREADS 가 상한)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("certify", help="게인 조건/GES/ISS 검증 리포트")
    p.add_argument("--config", required=True)
    p.add_argument("--p11", type=float, default=None, help="사용자 P 행렬 (생략 시 Lyapunov 방정식으로 구성)")
    p.add_argument("--p12", type=float, default=0.0)
    p.add_argument("--p22", type=float, default=None)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("plot", help="trace.csv -> SVG")
    p.add_argument("--trace", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--omega-so", type=float, default=None, help="step-out 한계선 [rad/s] (생략 시 포화 행에서 추정)")
    p.add_argument("--theta-r-deg", type=float, default=0.0, help="목표 직선 방향 [deg]")
    p.add_argument("--title", type=str, default=None)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("sweep", help="파라미터 격자 실행 -> sweep.csv")
    p.add_argument("--config", required=True)
    p.add_argument("--grid", action="append", required=True, help="KEY=V1,V2,... (반복 가능)")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--tail-window", type=float, default=DEFAULT_TAIL_WINDOW)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("calibrate", help="목표 정상상태 오프셋에 맞는 외란 d_mu 계산")
    p.add_argument("--config", required=True)
    p.add_argument("--target", type=float, required=True, help="목표 오프셋 [m] (부호 = 방향)")
    p.add_argument("--closed-loop", action="store_true", help="해석식 대신 시뮬레이션 기반 할선법")
    p.add_argument("--tail-window", type=float, default=DEFAULT_TAIL_WINDOW)
    p.set_defaults(func=cmd_calibrate)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv()

    parser = build_parser()
    args = parser.parse_args(argv)

    setup_logging(
        level=args.log_level,
        json_logs=args.json_logs,
        log_file=args.log_file,
        slack_webhook_url=args.slack_webhook_url,
        slack_min_level=args.slack_log_level,
    )
    return int(args.func(args))


if __name__ == "__main__":
    sys.exit(main())
