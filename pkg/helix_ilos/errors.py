"""helix_ilos 예외 계층. 라이브러리는 예외를 던지고, 종료 코드 변환은 cli 에서만 한다."""

from typing import Any, List, Optional


class HelixIlosError(RuntimeError):
    pass


class ParameterError(HelixIlosError, ValueError):
    """타입 불변식(양수 게인, 각도 범위 등) 위반"""


class NoPropulsionError(HelixIlosError):
    pass


class SingularConfigurationError(HelixIlosError):
    pass


class InvalidCertificateError(HelixIlosError):
    pass


class NumericalFailureError(HelixIlosError):
    pass


class InconsistentProblemError(HelixIlosError):
    pass


class TraceFormatError(HelixIlosError):
    pass


class ConfigError(HelixIlosError):
    def __init__(self, message: str, *, key: Optional[str] = None, line: Optional[int] = None) -> None:
        self.key = key
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class DivergedRunError(HelixIlosError):
    """발산한 실행. 마지막 유효 레코드와 그때까지의 트레이스를 함께 들고 있다."""

    def __init__(self, message: str, *, last_record: Optional[Any] = None, trace: Optional[List[Any]] = None) -> None:
        super().__init__(message)
        self.last_record = last_record
        self.trace = list(trace or [])


__all__ = [
    "HelixIlosError",
    "ParameterError",
    "NoPropulsionError",
    "SingularConfigurationError",
    "InvalidCertificateError",
    "NumericalFailureError",
    "InconsistentProblemError",
    "TraceFormatError",
    "ConfigError",
    "DivergedRunError",
]
