"""
helix_ilos: 나선형 마이크로 스위머 직선 경로 추종 (ILOS 유도 + 최적 방향/속도 선택 제어)

모듈 구성
- constants: 시제품 파라미터, 기본 게인, 파일 포맷 상수
- errors: 예외 계층
- model: 플랜트 모델, 결합 계수, 피드포워드
- guidance: ILOS 유도 법칙, 오차 시스템, 안정성 인증
- controller: 신뢰영역 부분문제(TRS) 기반 회전 명령 선택
- sim: RK4 폐루프 시뮬레이션, 지표, 외란 보정, 파라미터 스윕
- config: 시나리오 파일 파서/직렬화
- artifacts: trace.csv / manifest.txt / metrics.txt
- plot: 트레이스 SVG
- cli: 명령행 진입점
"""

from .constants import VERSION
from .errors import (
    ConfigError,
    DivergedRunError,
    HelixIlosError,
    InconsistentProblemError,
    InvalidCertificateError,
    NoPropulsionError,
    NumericalFailureError,
    ParameterError,
    SingularConfigurationError,
    TraceFormatError,
)
from .model import DisturbanceSpec, SwimmerParams, prototype_swimmer
from .guidance import (
    GuidanceParams,
    PathSpec,
    StabilityCertificate,
    certify_stability,
    check_simplified_gains,
    default_certificate,
)
from .controller import ControllerParams, TrsProblem, TrsSolution, solve_trs, solve_trs_quartic
from .sim import RunMetrics, SimScenario, TraceRecord, run, sweep
from .config import load_scenario, serialize_scenario
from .logger import get_logger, setup_logging
from .slack import send_slack_message

__version__ = VERSION

__all__ = [
    "__version__",
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
    "SwimmerParams",
    "DisturbanceSpec",
    "prototype_swimmer",
    "PathSpec",
    "GuidanceParams",
    "StabilityCertificate",
    "certify_stability",
    "check_simplified_gains",
    "default_certificate",
    "ControllerParams",
    "TrsProblem",
    "TrsSolution",
    "solve_trs",
    "solve_trs_quartic",
    "SimScenario",
    "TraceRecord",
    "RunMetrics",
    "run",
    "sweep",
    "load_scenario",
    "serialize_scenario",
    "get_logger",
    "setup_logging",
    "send_slack_message",
]
