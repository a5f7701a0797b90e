import math

import numpy as np
import pytest

from helix_ilos.config import (
    grid_from_args,
    load_scenario,
    loads_scenario,
    parse_scenario_text,
    serialize_scenario,
)
from helix_ilos.controller import ControllerParams
from helix_ilos.errors import ConfigError
from helix_ilos.guidance import GuidanceParams, PathSpec
from helix_ilos.model import DisturbanceSpec, HelixGeometry, SwimmerParams, compute_derived_params
from helix_ilos.sim import SimScenario


MINIMAL = """\
[swimmer]
e11 = 9.3e-05
[guidance]
alpha_d = 600
sigma0 = 0.01
k_d = 0.15
delta_los = 0.00075
[controller]
omega_so = 2.8
omega_so_unit = {unit}
"""


def test_study_scenario_file(scenario_path):
    loaded = load_scenario(scenario_path("study_ilos.ini"))
    s = loaded.scenario
    assert s.name == "study_ilos"
    assert s.mode == "ilos"
    assert s.controller.omega_so == pytest.approx(2.8 * 2.0 * math.pi)
    assert loaded.provenance["omega_so_input"] == "2.8 hz"
    assert s.disturbance.segments[0][1] == (0.0, -1.0044e-4)
    assert s.p0 == (0.0, -0.04)
    assert s.swimmer.geometry is not None

    conv = load_scenario(scenario_path("study_los_1200.ini")).scenario
    assert conv.mode == "conventional_los"
    assert conv.guidance.alpha_d == 1200.0
    assert conv.guidance.sigma0 == 0.0


def test_units_and_defaults():
    rad = loads_scenario(MINIMAL.format(unit="rad_s")).scenario
    hz = loads_scenario(MINIMAL.format(unit="hz")).scenario
    assert rad.controller.omega_so == 2.8
    assert hz.controller.omega_so == pytest.approx(2.8 * 2.0 * math.pi, rel=1e-15)
    assert rad.t_end == 100.0 and rad.dt == 1e-3 and rad.mode == "ilos"
    assert rad.disturbance == DisturbanceSpec.none()
    assert rad.path.theta_r == 0.0


@pytest.mark.parametrize(
    "text, line, key",
    [
        ("[swimmer]\ne11 = 1\nbogus = 2\n", 3, "bogus"),
        ("[swimmer]\ne11 = 1\ne11 = 2\n", 3, "e11"),
        ("e11 = 1\n", 1, "e11"),
        ("[swimmer]\ne11\n", 2, None),
        ("[swimmer]\ne11 =\n", 2, "e11"),
        ("[nowhere]\n", 1, None),
    ],
)
def test_parse_errors_carry_line_and_key(text, line, key):
    with pytest.raises(ConfigError) as info:
        parse_scenario_text(text)
    assert info.value.line == line
    assert info.value.key == key
    assert f"line {line}" in str(info.value)


def test_semantic_errors():
    with pytest.raises(ConfigError, match="omega_so_unit"):
        loads_scenario(MINIMAL.replace("omega_so_unit = {unit}\n", ""))
    with pytest.raises(ConfigError, match="must be one of"):
        loads_scenario(MINIMAL.format(unit="rpm"))
    with pytest.raises(ConfigError, match="not a number"):
        loads_scenario(MINIMAL.format(unit="hz").replace("alpha_d = 600", "alpha_d = fast"))
    with pytest.raises(ConfigError, match="alpha_d"):
        loads_scenario(MINIMAL.format(unit="hz").replace("alpha_d = 600", "alpha_d = -600"))
    both = MINIMAL.format(unit="hz") + "[disturbance]\nd_mu_z = 1e-4\ncalibrate_offset = 0.0018\n"
    with pytest.raises(ConfigError, match="calibrate_offset"):
        loads_scenario(both)
    mixed = MINIMAL.format(unit="hz").replace("e11 = 9.3e-05", "e11 = 9.3e-05\nxi_par = 1e-3\nxi_perp = 2e-3")
    with pytest.raises(ConfigError, match="not both"):
        loads_scenario(mixed)
    partial = MINIMAL.format(unit="hz").replace("e11 = 9.3e-05", "e11 = 9.3e-05\nn_h = 3.5")
    with pytest.raises(ConfigError, match="incomplete"):
        loads_scenario(partial)


def test_geometry_route_computes_e11():
    text = MINIMAL.format(unit="hz").replace(
        "e11 = 9.3e-05",
        "theta_h_deg = 45\nn_h = 3.5\nr_h = 0.00042\nxi_par = 0.001\nxi_perp = 0.002\nxi_vm = 1e-6",
    )
    s = loads_scenario(text).scenario
    assert s.swimmer.drag is not None
    expected = compute_derived_params(s.swimmer.geometry, s.swimmer.drag).e11
    assert s.swimmer.e11 == expected > 0


def test_calibrate_offset_uses_analytic_value():
    text = MINIMAL.format(unit="hz") + "[disturbance]\ncalibrate_offset = -0.0018\n"
    loaded = loads_scenario(text)
    assert loaded.scenario.disturbance.segments[0][1][1] == pytest.approx(-1.0044e-4, rel=1e-12)
    assert loaded.provenance["calibrate_offset"] == "-0.0018"


def test_manifest_sections_need_opt_in():
    text = MINIMAL.format(unit="hz") + "[provenance]\ncode_version = 0.1.0\n[metrics]\nconverged = true\n"
    with pytest.raises(ConfigError, match="unknown section"):
        loads_scenario(text)
    loaded = loads_scenario(text, allow_extra_sections=True)
    assert loaded.extra["provenance"]["code_version"] == "0.1.0"
    assert loaded.extra["metrics"]["converged"] == "true"


def _random_scenario(rng: np.random.Generator) -> SimScenario:
    geometry = None
    if rng.random() < 0.5:
        geometry = HelixGeometry(
            theta_h=math.radians(rng.uniform(5.0, 85.0)),
            n_h=rng.uniform(1.0, 6.0),
            r_h=rng.uniform(1e-4, 1e-3),
            k_h_mag=rng.uniform(0.0, 1e-3),
        )
    weights = {}
    if rng.random() < 0.3:
        weights = {"q1": rng.uniform(0.1, 3.0), "q2": rng.uniform(0.1, 3.0)}
    dt = float(rng.choice([1e-3, 2e-3, 5e-3]))
    return SimScenario(
        swimmer=SwimmerParams.from_e11(rng.uniform(1e-6, 1e-3), geometry=geometry),
        path=PathSpec.from_degrees(rng.uniform(-179.0, 180.0)),
        guidance=GuidanceParams(
            alpha_d=rng.uniform(1.0, 2000.0),
            sigma0=rng.uniform(0.0, 0.1),
            k_d=rng.uniform(0.0, 1.0),
            delta_los=rng.uniform(1e-4, 1e-2),
        ),
        controller=ControllerParams(
            omega_so=rng.uniform(1.0, 50.0),
            omega0=rng.uniform(0.5, 2.0),
            e11_hat=rng.uniform(0.5, 2.0),
            d_mu_hat=tuple(rng.normal(size=2) * 1e-5),
            **weights,
        ),
        disturbance=DisturbanceSpec.constant(tuple(rng.normal(size=2) * 1e-4)),
        p0=tuple(rng.normal(size=2) * 0.05),
        s0=rng.normal() * 0.1,
        t_end=rng.uniform(1.0, 200.0),
        dt=dt,
        mode=str(rng.choice(["ilos", "conventional_los"])),
        hold_dt=dt * 5 if rng.random() < 0.2 else None,
    )


def test_serialize_round_trip():
    rng = np.random.default_rng(2024)
    for _ in range(500):
        scenario = _random_scenario(rng)
        text = serialize_scenario(scenario)
        back = loads_scenario(text).scenario
        assert back == scenario
        assert serialize_scenario(back) == text


def test_piecewise_disturbance_is_not_serializable(short_scenario):
    scenario = short_scenario(disturbance=DisturbanceSpec(segments=((0.0, (0.0, 0.0)), (1.0, (1e-5, 0.0)))))
    with pytest.raises(ConfigError):
        serialize_scenario(scenario)


def test_grid_from_args():
    grid = grid_from_args(["alpha_d=600,1200", "guidance.k_d = 0.1, 0.2", "mode=ilos,conventional_los"])
    assert grid == {
        "guidance.alpha_d": [600.0, 1200.0],
        "guidance.k_d": [0.1, 0.2],
        "mode": ["ilos", "conventional_los"],
    }
    for bad in (["alpha_d"], ["alpha_d="], ["wheel=1"], ["alpha_d=fast"]):
        with pytest.raises(ConfigError):
            grid_from_args(bad)
