import math
import os
import tempfile
from typing import Optional, Sequence, Tuple

from .constants import THREADS_ENV


Vec2 = Tuple[float, float]


def as_vec2(v: Sequence[float]) -> Vec2:
    """길이 2 시퀀스(tuple, list, ndarray)를 float 튜플로 정규화."""
    if len(v) != 2:
        raise ValueError(f"expected a 2-vector, got length {len(v)}")
    return (float(v[0]), float(v[1]))


def norm2(v: Sequence[float]) -> float:
    return math.hypot(v[0], v[1])


def rotate(theta: float, v: Sequence[float]) -> Vec2:
    c, s = math.cos(theta), math.sin(theta)
    return (c * v[0] - s * v[1], s * v[0] + c * v[1])


def wrap_angle(angle: float) -> float:
    """각도를 (-pi, pi] 로 접는다. 이미 범위 안이면 값을 건드리지 않는다."""
    if -math.pi < angle <= math.pi:
        return angle
    wrapped = math.atan2(math.sin(angle), math.cos(angle))
    if wrapped == -math.pi:
        return math.pi
    return wrapped


def format_float(x: float) -> str:
    """최단 왕복 10진 표현. repr 은 float(repr(x)) == x 를 보장한다."""
    return repr(float(x))


def atomic_write_text(path: str, text: str) -> None:
    """임시 파일에 쓰고 rename 해서 반쯤 쓰인 파일이 남지 않게 한다."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp_path, path)
    except BaseException:
        try:
            os.unlink(tmp_path)
        except OSError:
            pass
        raise


def worker_count(requested: Optional[int] = None, jobs: Optional[int] = None) -> int:
    """워커 수 = min(요청값 또는 CPU 수, HELIX_ILOS_THREADS 상한, 작업 수)."""
    n = requested if requested is not None else (os.cpu_count() or 1)
    env = os.getenv(THREADS_ENV)
    if env:
        try:
            n = min(n, int(env))
        except ValueError:
            pass
    n = max(1, n)
    if jobs is not None:
        n = min(n, max(1, jobs))
    return n
