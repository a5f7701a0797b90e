"""helix_ilos 상수 모음 (물리 파라미터 기본값, 파일 포맷, 수치 허용오차)"""

import math

# 시제품 (코일 권선 구동 나선형 마이크로 스위머)
PROTOTYPE_THETA_H_DEG = 45.0
PROTOTYPE_N_H = 3.5
PROTOTYPE_R_H = 420e-6
PROTOTYPE_E11 = 9.3e-5

# 비교 시뮬레이션 기본 게인
DEFAULT_ALPHA_D = 600.0
DEFAULT_SIGMA0 = 0.01
DEFAULT_K_D = 0.15
DEFAULT_DELTA_LOS = 0.75e-3
DEFAULT_OMEGA_SO_HZ = 2.8
DEFAULT_OMEGA0 = 1.0
DEFAULT_P0 = (0.0, -40.0e-3)

DEFAULT_DT = 1e-3
DEFAULT_T_END = 100.0
DEFAULT_TAIL_WINDOW = 10.0

# |p| 가 이 값을 넘으면 발산으로 간주 (시나리오 스케일은 mm)
DIVERGENCE_RADIUS = 1.0

TWO_PI = 2.0 * math.pi

TRACE_HEADER = "t,p_x,p_z,eps,z,s,u_x,u_z,u_mag,v_x,v_z,saturated"

SCENARIO_SECTIONS = ("swimmer", "path", "guidance", "controller", "disturbance", "sim")
MANIFEST_SECTIONS = ("provenance", "metrics")

THREADS_ENV = "HELIX_ILOS_THREADS"

BISECTION_MAX_ITER = 200
SATURATION_SLACK = 1e-12

VERSION = "0.1.0"
