import math

import pytest

from helix_ilos.plot import MAX_POINTS, infer_omega_so, render_trace_svg, write_trace_svg
from helix_ilos.sim import TraceRecord, run


def _points_per_polyline(svg: str):
    out = []
    for chunk in svg.split('points="')[1:]:
        out.append(len(chunk.split('"', 1)[0].split()))
    return out


def test_svg_is_deterministic(short_scenario):
    trace, _ = run(short_scenario(t_end=0.1))
    a = render_trace_svg(trace, title="short")
    b = render_trace_svg(list(trace), title="short")
    assert a == b
    assert a.startswith("<svg") and a.rstrip().endswith("</svg>")
    # 포화 행에서 한계선을 추정한다
    assert infer_omega_so(trace) == pytest.approx(2.8 * 2.0 * math.pi)


def test_title_is_escaped(short_scenario):
    trace, _ = run(short_scenario(t_end=0.01))
    svg = render_trace_svg(trace, title="a<b & c>")
    assert "a&lt;b &amp; c&gt;" in svg
    assert "a<b" not in svg


def test_empty_trace_rejected():
    with pytest.raises(ValueError):
        render_trace_svg([])


def test_long_traces_are_decimated(short_scenario):
    trace, _ = run(short_scenario(t_end=5.0))
    assert len(trace) > MAX_POINTS
    svg = render_trace_svg(trace)
    counts = _points_per_polyline(svg)
    assert max(counts) <= MAX_POINTS + 1
    assert max(counts) > MAX_POINTS // 2


def test_single_row_and_unsaturated_trace(tmp_path):
    rec = TraceRecord(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, False)
    assert infer_omega_so([rec]) is None
    path = tmp_path / "one.svg"
    write_trace_svg(str(path), [rec], theta_r=math.pi / 2)
    assert path.read_text(encoding="utf-8").count("<polyline") == 5
