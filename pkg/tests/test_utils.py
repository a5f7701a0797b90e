import math

import pytest

from helix_ilos.utils import as_vec2, atomic_write_text, format_float, rotate, worker_count, wrap_angle


@pytest.mark.parametrize(
    "angle, expected",
    [
        (0.0, 0.0),
        (math.pi, math.pi),
        (-math.pi, math.pi),
        (3.0 * math.pi, math.pi),
        (2.0 * math.pi + 0.5, 0.5),
        (-2.0 * math.pi - 0.5, -0.5),
    ],
)
def test_wrap_angle(angle, expected):
    assert wrap_angle(angle) == pytest.approx(expected, abs=1e-12)
    assert -math.pi < wrap_angle(angle) <= math.pi


def test_wrap_angle_keeps_in_range_values_exact():
    for x in (0.1, -3.0, 3.14, math.pi):
        assert wrap_angle(x) == x


def test_worker_count_respects_env_cap(monkeypatch):
    monkeypatch.delenv("HELIX_ILOS_THREADS", raising=False)
    assert worker_count(8, jobs=3) == 3
    assert worker_count(0) == 1
    monkeypatch.setenv("HELIX_ILOS_THREADS", "2")
    assert worker_count(8) == 2
    assert worker_count() <= 2
    monkeypatch.setenv("HELIX_ILOS_THREADS", "many")
    assert worker_count(5) == 5


def test_vector_helpers():
    assert as_vec2([1, 2]) == (1.0, 2.0)
    with pytest.raises(ValueError):
        as_vec2((1.0, 2.0, 3.0))
    x, z = rotate(math.pi / 2, (1.0, 0.0))
    assert x == pytest.approx(0.0, abs=1e-15) and z == pytest.approx(1.0)


def test_format_float_round_trips():
    for x in (0.1, 1e-5, -1.0044e-4, 17.59291886010284, 2.8 * 2.0 * math.pi):
        assert float(format_float(x)) == x


def test_atomic_write_replaces_file(tmp_path):
    path = tmp_path / "sub" / "f.txt"
    atomic_write_text(str(path), "one")
    atomic_write_text(str(path), "two")
    assert path.read_text(encoding="utf-8") == "two"
    assert [p.name for p in path.parent.iterdir()] == ["f.txt"]
