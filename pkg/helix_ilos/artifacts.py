"""실행 산출물: trace.csv, manifest.txt, metrics.txt (모두 임시파일 + rename 으로 기록)"""

import math
import os
from typing import Any, Dict, List, Mapping, Optional, Sequence

from .constants import TRACE_HEADER, TWO_PI, VERSION
from .config import serialize_scenario
from .errors import TraceFormatError
from .guidance import check_simplified_gains
from .logger import get_logger
from .sim import RunMetrics, SimScenario, TraceRecord
from .utils import atomic_write_text, format_float


logger = get_logger("artifacts")

TRACE_FILE = "trace.csv"
MANIFEST_FILE = "manifest.txt"
METRICS_FILE = "metrics.txt"

_FIELDS = TRACE_HEADER.split(",")


def format_trace_row(rec: TraceRecord) -> str:
    values = [format_float(v) for v in rec[:-1]]
    values.append("1" if rec.saturated else "0")
    return ",".join(values)


def trace_to_csv(trace: Sequence[TraceRecord]) -> str:
    lines = [TRACE_HEADER]
    lines.extend(format_trace_row(r) for r in trace)
    return "\n".join(lines) + "\n"


def write_trace(path: str, trace: Sequence[TraceRecord]) -> None:
    atomic_write_text(path, trace_to_csv(trace))


def parse_trace(text: str, source: str = "<string>") -> List[TraceRecord]:
    lines = text.splitlines()
    if not lines or lines[0].strip() != TRACE_HEADER:
        raise TraceFormatError(f"{source}: header must be exactly {TRACE_HEADER!r}")
    records: List[TraceRecord] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != len(_FIELDS):
            raise TraceFormatError(f"{source}: line {lineno}: expected {len(_FIELDS)} columns, got {len(cells)}")
        try:
            nums = [float(c) for c in cells[:-1]]
        except ValueError as e:
            raise TraceFormatError(f"{source}: line {lineno}: {e}") from None
        if cells[-1] not in ("0", "1"):
            raise TraceFormatError(f"{source}: line {lineno}: saturated must be 0 or 1, got {cells[-1]!r}")
        if not all(math.isfinite(x) for x in nums):
            raise TraceFormatError(f"{source}: line {lineno}: non-finite value")
        records.append(TraceRecord(*nums, saturated=cells[-1] == "1"))
    return records


def read_trace(path: str) -> List[TraceRecord]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise TraceFormatError(f"cannot read {path}: {e}") from e
    return parse_trace(text, source=path)


def metrics_report(metrics: RunMetrics, scenario: SimScenario) -> Dict[str, Any]:
    """표시용 단위(mm, Hz)는 여기서만 쓴다. 키 이름에 단위를 붙인다."""
    lhs, ok = check_simplified_gains(scenario.guidance)
    return {
        "mean_abs_eps_tail_mm": metrics.mean_abs_eps_tail * 1e3,
        "tail_window_s": metrics.tail_window,
        "ss_rotation_speed_rad_s": metrics.ss_rotation_speed,
        "ss_rotation_speed_hz": metrics.ss_rotation_speed / TWO_PI,
        "max_u_mag_rad_s": metrics.max_u_mag,
        "converged": "true" if metrics.converged else "false",
        "simplified_lhs": lhs,
        "simplified_ok": "true" if ok else "false",
    }


def format_metrics(report: Mapping[str, Any]) -> str:
    lines = []
    for key, value in report.items():
        text = format_float(value) if isinstance(value, float) else str(value)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"


def parse_metrics(text: str) -> Dict[str, str]:
    out: Dict[str, str] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#") or "=" not in line:
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        out[key] = value
    return out


def build_provenance(scenario: SimScenario, extra: Optional[Mapping[str, str]] = None) -> Dict[str, str]:
    d = scenario.disturbance.segments[0][1]
    prov: Dict[str, str] = {
        "code_version": VERSION,
        "omega_so_rad_s": format_float(scenario.controller.omega_so),
        "disturbance_source": scenario.disturbance.provenance,
        "d_mu": f"{format_float(d[0])} {format_float(d[1])}",
        "e11_source": "geometry+drag" if scenario.swimmer.drag is not None else "direct",
    }
    if extra:
        prov.update(extra)
    return prov


def manifest_text(
    scenario: SimScenario,
    metrics: RunMetrics,
    provenance: Optional[Mapping[str, str]] = None,
) -> str:
    return serialize_scenario(
        scenario,
        provenance=build_provenance(scenario, provenance),
        metrics=metrics_report(metrics, scenario),
        header=f"helix-ilos run manifest ({scenario.name or scenario.mode})\nreplay: helix-ilos simulate --config manifest.txt",
    )


def write_run_artifacts(
    out_dir: str,
    scenario: SimScenario,
    trace: Sequence[TraceRecord],
    metrics: RunMetrics,
    provenance: Optional[Mapping[str, str]] = None,
) -> Dict[str, str]:
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "trace": os.path.join(out_dir, TRACE_FILE),
        "manifest": os.path.join(out_dir, MANIFEST_FILE),
        "metrics": os.path.join(out_dir, METRICS_FILE),
    }
    write_trace(paths["trace"], trace)
    atomic_write_text(paths["manifest"], manifest_text(scenario, metrics, provenance))
    atomic_write_text(paths["metrics"], format_metrics(metrics_report(metrics, scenario)))
    logger.info("[cli] wrote %d trace rows to %s", len(trace), out_dir)
    return paths


def write_table_csv(path: str, columns: Sequence[str], rows: Sequence[Mapping[str, Any]]) -> None:
    lines = [",".join(columns)]
    for row in rows:
        cells = []
        for c in columns:
            v = row.get(c, "")
            cells.append(format_float(v) if isinstance(v, float) else str(v))
        lines.append(",".join(cells))
    atomic_write_text(path, "\n".join(lines) + "\n")


__all__ = [
    "TRACE_FILE",
    "MANIFEST_FILE",
    "METRICS_FILE",
    "format_trace_row",
    "trace_to_csv",
    "write_trace",
    "parse_trace",
    "read_trace",
    "metrics_report",
    "format_metrics",
    "parse_metrics",
    "build_provenance",
    "manifest_text",
    "write_run_artifacts",
    "write_table_csv",
]
