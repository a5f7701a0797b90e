import math
import os
from pathlib import Path
from typing import Callable

import pytest

from helix_ilos.controller import ControllerParams
from helix_ilos.guidance import GuidanceParams, PathSpec
from helix_ilos.model import DisturbanceSpec, prototype_swimmer
from helix_ilos.sim import SimScenario


ROOT = Path(__file__).resolve().parent.parent
SCENARIO_DIR = ROOT / "scenarios"


@pytest.fixture(autouse=True)
def _no_slack(monkeypatch: pytest.MonkeyPatch) -> None:
    # .env 에 웹훅이 있어도 테스트에서는 보내지 않는다
    monkeypatch.setenv("SLACK_WEBHOOK_URL", "")


@pytest.fixture
def study_guidance() -> GuidanceParams:
    return GuidanceParams(alpha_d=600.0, sigma0=0.01, k_d=0.15, delta_los=0.75e-3)


@pytest.fixture
def study_controller() -> ControllerParams:
    return ControllerParams(omega_so=2.8 * 2.0 * math.pi)


@pytest.fixture
def short_scenario(study_guidance: GuidanceParams, study_controller: ControllerParams) -> Callable[..., SimScenario]:
    def make(**overrides: object) -> SimScenario:
        kwargs = dict(
            swimmer=prototype_swimmer(),
            path=PathSpec(0.0),
            guidance=study_guidance,
            controller=study_controller,
            disturbance=DisturbanceSpec.constant((0.0, -1.0044e-4)),
            p0=(0.0, -0.04),
            t_end=0.5,
            dt=1e-3,
            mode="ilos",
            name="short",
        )
        kwargs.update(overrides)
        return SimScenario(**kwargs)  # type: ignore[arg-type]

    return make


SHORT_CONFIG = """\
# 짧은 ILOS 실행
[swimmer]
e11 = 9.3e-05

[path]
theta_r_deg = 0.0

[guidance]
alpha_d = 600.0
sigma0 = 0.01
k_d = 0.15
delta_los = 0.00075

[controller]
omega_so = 2.8
omega_so_unit = hz

[disturbance]
d_mu_x = 0.0
d_mu_z = -0.00010044

[sim]
p0_x = 0.0
p0_z = -0.04
t_end = 0.5
dt = 0.001
mode = {mode}
"""


@pytest.fixture
def write_config(tmp_path: Path) -> Callable[..., str]:
    def write(name: str = "short.ini", text: str = "", mode: str = "ilos") -> str:
        path = tmp_path / name
        path.write_text(text or SHORT_CONFIG.format(mode=mode), encoding="utf-8")
        return os.fspath(path)

    return write


@pytest.fixture
def scenario_path() -> Callable[[str], str]:
    def path(name: str) -> str:
        return os.fspath(SCENARIO_DIR / name)

    return path
