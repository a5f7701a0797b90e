"""
트레이스 -> 정적 SVG (4 패널)

1. 궤적과 목표 직선 (mm)
2. 횡방향 오차 eps(t) (mm)
3. 회전 속도 |u|(t) 와 step-out 한계선 (rad/s)
4. 적분 상태 s(t)

같은 트레이스는 항상 바이트 단위로 같은 SVG 를 만든다 (좌표는 고정 소수점 문자열).
"""

import math
from html import escape
from typing import List, Optional, Sequence, Tuple

from .logger import get_logger
from .sim import TraceRecord
from .utils import atomic_write_text


logger = get_logger("plot")

WIDTH = 900
PANEL_H = 210
MARGIN_L = 80
MARGIN_R = 20
MARGIN_T = 36
GAP = 56
MAX_POINTS = 2000

_STYLE = (
    "<style>"
    "text{font-family:sans-serif;font-size:11px;fill:#222}"
    ".title{font-size:13px;font-weight:bold}"
    ".axis{stroke:#444;stroke-width:1}"
    ".grid{stroke:#ddd;stroke-width:1}"
    ".trace{fill:none;stroke:#1f77b4;stroke-width:1.5}"
    ".ref{fill:none;stroke:#d62728;stroke-width:1.2;stroke-dasharray:6,4}"
    "</style>"
)


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _tick(x: float) -> str:
    if x == 0:
        return "0"
    if abs(x) >= 1e4 or abs(x) < 1e-2:
        return f"{x:.2e}"
    return f"{x:.3g}"


def _decimate(n: int) -> List[int]:
    if n <= MAX_POINTS:
        return list(range(n))
    stride = math.ceil(n / MAX_POINTS)
    idx = list(range(0, n, stride))
    if idx[-1] != n - 1:
        idx.append(n - 1)
    return idx


def _range(values: Sequence[float], extra: Sequence[float] = ()) -> Tuple[float, float]:
    vals = list(values) + list(extra)
    lo, hi = min(vals), max(vals)
    if hi == lo:
        pad = abs(lo) * 0.1 or 1.0
        return lo - pad, hi + pad
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


class _Panel:
    def __init__(self, index: int, title: str, xlabel: str, ylabel: str,
                 xr: Tuple[float, float], yr: Tuple[float, float]) -> None:
        self.x0 = MARGIN_L
        self.y0 = MARGIN_T + index * (PANEL_H + GAP)
        self.w = WIDTH - MARGIN_L - MARGIN_R
        self.h = PANEL_H
        self.title = title
        self.xlabel = xlabel
        self.ylabel = ylabel
        self.xr = xr
        self.yr = yr
        self.parts: List[str] = []

    def px(self, x: float) -> float:
        return self.x0 + (x - self.xr[0]) / (self.xr[1] - self.xr[0]) * self.w

    def py(self, y: float) -> float:
        return self.y0 + self.h - (y - self.yr[0]) / (self.yr[1] - self.yr[0]) * self.h

    def frame(self) -> None:
        p = self.parts
        for i in range(5):
            fx = self.xr[0] + (self.xr[1] - self.xr[0]) * i / 4
            fy = self.yr[0] + (self.yr[1] - self.yr[0]) * i / 4
            gx, gy = self.px(fx), self.py(fy)
            p.append(f'<line class="grid" x1="{_fmt(gx)}" y1="{_fmt(self.y0)}" x2="{_fmt(gx)}" y2="{_fmt(self.y0 + self.h)}"/>')
            p.append(f'<line class="grid" x1="{_fmt(self.x0)}" y1="{_fmt(gy)}" x2="{_fmt(self.x0 + self.w)}" y2="{_fmt(gy)}"/>')
            p.append(f'<text x="{_fmt(gx)}" y="{_fmt(self.y0 + self.h + 14)}" text-anchor="middle">{_tick(fx)}</text>')
            p.append(f'<text x="{_fmt(self.x0 - 6)}" y="{_fmt(gy + 4)}" text-anchor="end">{_tick(fy)}</text>')
        p.append(f'<rect class="axis" x="{_fmt(self.x0)}" y="{_fmt(self.y0)}" width="{_fmt(self.w)}" height="{_fmt(self.h)}" fill="none"/>')
        p.append(f'<text class="title" x="{_fmt(self.x0)}" y="{_fmt(self.y0 - 8)}">{self.title}</text>')
        p.append(f'<text x="{_fmt(self.x0 + self.w / 2)}" y="{_fmt(self.y0 + self.h + 30)}" text-anchor="middle">{self.xlabel}</text>')
        cy = self.y0 + self.h / 2
        p.append(f'<text x="{_fmt(16)}" y="{_fmt(cy)}" text-anchor="middle" transform="rotate(-90 16 {_fmt(cy)})">{self.ylabel}</text>')

    def polyline(self, xs: Sequence[float], ys: Sequence[float], css: str = "trace") -> None:
        pts = " ".join(f"{_fmt(self.px(x))},{_fmt(self.py(y))}" for x, y in zip(xs, ys))
        self.parts.append(f'<polyline class="{css}" points="{pts}"/>')

    def render(self) -> str:
        return "\n".join(self.parts)


def infer_omega_so(trace: Sequence[TraceRecord]) -> Optional[float]:
    """포화된 행의 |u| 는 한계값과 같다. 포화가 없으면 알 수 없다."""
    sat = [r.u_mag for r in trace if r.saturated]
    return max(sat) if sat else None


def render_trace_svg(trace: Sequence[TraceRecord], *, omega_so: Optional[float] = None,
                     theta_r: float = 0.0, title: str = "helix-ilos run") -> str:
    if not trace:
        raise ValueError("cannot plot an empty trace")
    idx = _decimate(len(trace))
    rows = [trace[i] for i in idx]
    t = [r.t for r in rows]
    xs = [r.p_x * 1e3 for r in rows]
    zs = [r.p_z * 1e3 for r in rows]
    eps = [r.eps * 1e3 for r in rows]
    um = [r.u_mag for r in rows]
    ss = [r.s for r in rows]
    if omega_so is None:
        omega_so = infer_omega_so(trace)
    t_range = _range(t)

    panels: List[_Panel] = []

    xr = _range(xs)
    zr = _range(zs, [0.0])
    traj = _Panel(0, "trajectory vs. target line", "p_x [mm]", "p_z [mm]", xr, zr)
    traj.frame()
    # 목표 직선은 원점을 지나고 방향 theta_r
    c, s = math.cos(theta_r), math.sin(theta_r)
    if abs(c) > 1e-12:
        line_x = [xr[0], xr[1]]
        line_z = [x * s / c for x in line_x]
    else:
        line_x = [0.0, 0.0]
        line_z = [zr[0], zr[1]]
    traj.polyline(line_x, line_z, "ref")
    traj.polyline(xs, zs)
    panels.append(traj)

    err = _Panel(1, "cross-track error", "t [s]", "eps [mm]", t_range, _range(eps, [0.0]))
    err.frame()
    err.polyline(t, eps)
    panels.append(err)

    extra = [omega_so] if omega_so is not None else []
    ctl = _Panel(2, "rotation speed |u|", "t [s]", "|u| [rad/s]", t_range, _range(um, extra + [0.0]))
    ctl.frame()
    if omega_so is not None:
        ctl.polyline([t_range[0], t_range[1]], [omega_so, omega_so], "ref")
    ctl.polyline(t, um)
    panels.append(ctl)

    integ = _Panel(3, "integral state s", "t [s]", "s", t_range, _range(ss))
    integ.frame()
    integ.polyline(t, ss)
    panels.append(integ)

    height = MARGIN_T + 4 * (PANEL_H + GAP)
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" '
        f'viewBox="0 0 {WIDTH} {height}">'
    )
    body = "\n".join(p.render() for p in panels)
    caption = f'<text class="title" x="{MARGIN_L}" y="16">{escape(title)}</text>'
    return "\n".join([head, _STYLE, '<rect width="100%" height="100%" fill="white"/>', caption, body, "</svg>"]) + "\n"


def write_trace_svg(path: str, trace: Sequence[TraceRecord], **kwargs: object) -> None:
    atomic_write_text(path, render_trace_svg(trace, **kwargs))  # type: ignore[arg-type]
    logger.info("[cli] wrote plot %s (%d rows)", path, len(trace))


__all__ = ["render_trace_svg", "write_trace_svg", "infer_omega_so"]
