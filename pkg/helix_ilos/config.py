"""
시나리오 파일 (줄 단위 `key = value`, `[section]` 헤더, `#` 주석)

    [swimmer]      e11 | theta_h_deg n_h r_h xi_par xi_perp xi_vm k_h_mag
    [path]         theta_r_deg
    [guidance]     alpha_d sigma0 k_d delta_los
    [controller]   omega_so omega_so_unit omega0 e11_hat d_mu_hat_x d_mu_hat_z q1 q2
    [disturbance]  d_mu_x d_mu_z | calibrate_offset, d_star
    [sim]          p0_x p0_z s0 t_end dt mode hold_dt

모든 값은 SI 단위. omega_so_unit 이 hz 면 2 pi 를 곱해 rad/s 로 저장한다.
매니페스트는 여기에 [provenance], [metrics] 섹션이 붙은 같은 형식이다.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple

from .constants import MANIFEST_SECTIONS, SCENARIO_SECTIONS, TWO_PI
from .controller import ControllerParams
from .errors import ConfigError, HelixIlosError
from .guidance import GuidanceParams, PathSpec
from .logger import get_logger
from .model import DisturbanceSpec, DragCoefficients, HelixGeometry, SwimmerParams
from .sim import MODES, SimScenario, calibrate_disturbance
from .utils import format_float


logger = get_logger("config")

SECTION_KEYS: Dict[str, Tuple[str, ...]] = {
    "swimmer": ("e11", "theta_h_deg", "n_h", "r_h", "xi_par", "xi_perp", "xi_vm", "k_h_mag"),
    "path": ("theta_r_deg",),
    "guidance": ("alpha_d", "sigma0", "k_d", "delta_los"),
    "controller": ("omega_so", "omega_so_unit", "omega0", "e11_hat", "d_mu_hat_x", "d_mu_hat_z", "q1", "q2"),
    "disturbance": ("d_mu_x", "d_mu_z", "calibrate_offset", "d_star"),
    "sim": ("p0_x", "p0_z", "s0", "t_end", "dt", "mode", "hold_dt"),
}

STRING_KEYS = {"omega_so_unit": ("rad_s", "hz"), "mode": MODES}

GEOMETRY_KEYS = ("theta_h_deg", "n_h", "r_h")
DRAG_KEYS = ("xi_par", "xi_perp")

# 스윕 그리드에서 설정 키 이름을 쓸 수 있게 필드 경로로 옮긴다
FIELD_PATHS: Dict[str, Tuple[str, Callable[[str], Any]]] = {
    "e11": ("swimmer.e11", float),
    "theta_r_deg": ("path.theta_r", lambda v: PathSpec.from_degrees(float(v)).theta_r),
    "alpha_d": ("guidance.alpha_d", float),
    "sigma0": ("guidance.sigma0", float),
    "k_d": ("guidance.k_d", float),
    "delta_los": ("guidance.delta_los", float),
    "omega_so": ("controller.omega_so", float),
    "omega0": ("controller.omega0", float),
    "e11_hat": ("controller.e11_hat", float),
    "q1": ("controller.q1", float),
    "q2": ("controller.q2", float),
    "s0": ("s0", float),
    "t_end": ("t_end", float),
    "dt": ("dt", float),
    "hold_dt": ("hold_dt", float),
    "mode": ("mode", str),
}


@dataclass
class ScenarioFile:
    """파싱만 끝난 원문. sections[name][key] = (값 문자열, 줄 번호)"""

    sections: Dict[str, Dict[str, Tuple[str, int]]] = field(default_factory=dict)
    extra: Dict[str, Dict[str, str]] = field(default_factory=dict)
    source: str = "<string>"

    def get(self, section: str, key: str) -> Optional[Tuple[str, int]]:
        return self.sections.get(section, {}).get(key)

    def has(self, section: str, key: str) -> bool:
        return self.get(section, key) is not None


@dataclass(frozen=True)
class LoadedScenario:
    scenario: SimScenario
    provenance: Dict[str, str]
    extra: Dict[str, Dict[str, str]]


def parse_scenario_text(text: str, *, allow_extra_sections: bool = False, source: str = "<string>") -> ScenarioFile:
    sf = ScenarioFile(source=source)
    section: Optional[str] = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section in SCENARIO_SECTIONS:
                sf.sections.setdefault(section, {})
            elif section in MANIFEST_SECTIONS and allow_extra_sections:
                sf.extra.setdefault(section, {})
            else:
                raise ConfigError(f"unknown section [{section}]", line=lineno)
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError("empty key", line=lineno)
        if section is None:
            raise ConfigError("key outside of any section", key=key, line=lineno)
        if section in sf.extra:
            sf.extra[section][key] = value
            continue
        if key not in SECTION_KEYS[section]:
            raise ConfigError(f"unknown key in [{section}]", key=key, line=lineno)
        if key in sf.sections[section]:
            raise ConfigError("duplicate key", key=key, line=lineno)
        if not value:
            raise ConfigError("missing value", key=key, line=lineno)
        sf.sections[section][key] = (value, lineno)
    return sf


def _float(sf: ScenarioFile, section: str, key: str, default: Optional[float] = None) -> float:
    entry = sf.get(section, key)
    if entry is None:
        if default is None:
            raise ConfigError(f"required key missing from [{section}]", key=key)
        return default
    value, lineno = entry
    try:
        x = float(value)
    except ValueError:
        raise ConfigError(f"not a number: {value!r}", key=key, line=lineno) from None
    if not math.isfinite(x):
        raise ConfigError(f"must be finite: {value!r}", key=key, line=lineno)
    return x


def _opt_float(sf: ScenarioFile, section: str, key: str) -> Optional[float]:
    return _float(sf, section, key) if sf.has(section, key) else None


def _choice(sf: ScenarioFile, section: str, key: str, default: Optional[str] = None) -> str:
    entry = sf.get(section, key)
    if entry is None:
        if default is None:
            raise ConfigError(f"required key missing from [{section}]", key=key)
        return default
    value, lineno = entry
    if value not in STRING_KEYS[key]:
        raise ConfigError(f"must be one of {STRING_KEYS[key]}, got {value!r}", key=key, line=lineno)
    return value


def _line_of(sf: ScenarioFile, section: str, key: str) -> Optional[int]:
    entry = sf.get(section, key)
    return entry[1] if entry else None


def _swimmer(sf: ScenarioFile) -> SwimmerParams:
    has_e11 = sf.has("swimmer", "e11")
    has_geometry = all(sf.has("swimmer", k) for k in GEOMETRY_KEYS)
    drag_given = [k for k in DRAG_KEYS + ("xi_vm",) if sf.has("swimmer", k)]

    geometry = None
    if has_geometry:
        geometry = HelixGeometry(
            theta_h=math.radians(_float(sf, "swimmer", "theta_h_deg")),
            n_h=_float(sf, "swimmer", "n_h"),
            r_h=_float(sf, "swimmer", "r_h"),
            k_h_mag=_float(sf, "swimmer", "k_h_mag", 0.0),
        )
    elif any(sf.has("swimmer", k) for k in GEOMETRY_KEYS):
        missing = [k for k in GEOMETRY_KEYS if not sf.has("swimmer", k)]
        raise ConfigError(f"incomplete helix geometry, missing {missing}", key=missing[0])

    if has_e11:
        if drag_given:
            raise ConfigError(
                "give either e11 or geometry + drag coefficients, not both",
                key=drag_given[0],
                line=_line_of(sf, "swimmer", drag_given[0]),
            )
        return SwimmerParams.from_e11(_float(sf, "swimmer", "e11"), geometry=geometry)

    if geometry is None or not all(sf.has("swimmer", k) for k in DRAG_KEYS):
        raise ConfigError("[swimmer] needs e11 or the full geometry + drag set", key="e11")
    drag = DragCoefficients(
        xi_par=_float(sf, "swimmer", "xi_par"),
        xi_perp=_float(sf, "swimmer", "xi_perp"),
        xi_vm=_float(sf, "swimmer", "xi_vm", 0.0),
    )
    return SwimmerParams.from_geometry(geometry, drag)


def _controller(sf: ScenarioFile, provenance: Dict[str, str]) -> ControllerParams:
    omega_so = _float(sf, "controller", "omega_so")
    unit = _choice(sf, "controller", "omega_so_unit")
    if unit == "hz":
        provenance["omega_so_input"] = f"{format_float(omega_so)} hz"
        omega_so = omega_so * TWO_PI
    return ControllerParams(
        omega_so=omega_so,
        q1=_opt_float(sf, "controller", "q1"),
        q2=_opt_float(sf, "controller", "q2"),
        omega0=_float(sf, "controller", "omega0", 1.0),
        e11_hat=_float(sf, "controller", "e11_hat", 1.0),
        d_mu_hat=(
            _float(sf, "controller", "d_mu_hat_x", 0.0),
            _float(sf, "controller", "d_mu_hat_z", 0.0),
        ),
    )


def _disturbance(
    sf: ScenarioFile,
    guidance: GuidanceParams,
    e11: float,
    path: PathSpec,
    provenance: Dict[str, str],
) -> DisturbanceSpec:
    explicit = [k for k in ("d_mu_x", "d_mu_z") if sf.has("disturbance", k)]
    d_star = _opt_float(sf, "disturbance", "d_star")
    if sf.has("disturbance", "calibrate_offset"):
        if explicit:
            raise ConfigError(
                "give either d_mu_x/d_mu_z or calibrate_offset, not both",
                key="calibrate_offset",
                line=_line_of(sf, "disturbance", "calibrate_offset"),
            )
        target = _float(sf, "disturbance", "calibrate_offset")
        d = calibrate_disturbance(target, guidance, e11, path)
        provenance["calibrate_offset"] = format_float(target)
        provenance["disturbance"] = d.provenance
        return DisturbanceSpec(segments=d.segments, d_star=d_star, calibrated=True, provenance=d.provenance)
    return DisturbanceSpec.constant(
        (_float(sf, "disturbance", "d_mu_x", 0.0), _float(sf, "disturbance", "d_mu_z", 0.0)),
        d_star=d_star,
    )


def scenario_from_file(sf: ScenarioFile, name: str = "") -> LoadedScenario:
    provenance: Dict[str, str] = {}
    try:
        swimmer = _swimmer(sf)
        path = PathSpec.from_degrees(_float(sf, "path", "theta_r_deg", 0.0))
        guidance = GuidanceParams(
            alpha_d=_float(sf, "guidance", "alpha_d"),
            sigma0=_float(sf, "guidance", "sigma0"),
            k_d=_float(sf, "guidance", "k_d"),
            delta_los=_float(sf, "guidance", "delta_los"),
        )
        controller = _controller(sf, provenance)
        disturbance = _disturbance(sf, guidance, swimmer.e11, path, provenance)
        scenario = SimScenario(
            swimmer=swimmer,
            path=path,
            guidance=guidance,
            controller=controller,
            disturbance=disturbance,
            p0=(_float(sf, "sim", "p0_x", 0.0), _float(sf, "sim", "p0_z", 0.0)),
            s0=_float(sf, "sim", "s0", 0.0),
            t_end=_float(sf, "sim", "t_end", 100.0),
            dt=_float(sf, "sim", "dt", 1e-3),
            mode=_choice(sf, "sim", "mode", "ilos"),
            hold_dt=_opt_float(sf, "sim", "hold_dt"),
            name=name,
        )
    except ConfigError:
        raise
    except HelixIlosError as e:
        # 타입 불변식 위반도 설정 오류로 보고한다
        raise ConfigError(f"{sf.source}: {e}") from e
    return LoadedScenario(scenario=scenario, provenance=provenance, extra=dict(sf.extra))


def loads_scenario(text: str, *, allow_extra_sections: bool = False, name: str = "", source: str = "<string>") -> LoadedScenario:
    sf = parse_scenario_text(text, allow_extra_sections=allow_extra_sections, source=source)
    return scenario_from_file(sf, name=name)


def load_scenario(path: str, *, allow_extra_sections: bool = False) -> LoadedScenario:
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from e
    stem = path.rsplit("/", 1)[-1].rsplit(".", 1)[0]
    loaded = loads_scenario(text, allow_extra_sections=allow_extra_sections, name=stem, source=path)
    logger.debug("[config] loaded %s mode=%s", path, loaded.scenario.mode)
    return loaded


def _degrees_exact(rad: float) -> float:
    """radians(x) == rad 이 되는 x 를 degrees(rad) 근처에서 찾는다 (왕복 보존)."""
    x = math.degrees(rad)
    if math.radians(x) == rad:
        return x
    lo = hi = x
    for _ in range(16):
        lo = math.nextafter(lo, -math.inf)
        hi = math.nextafter(hi, math.inf)
        if math.radians(lo) == rad:
            return lo
        if math.radians(hi) == rad:
            return hi
    return x


def _section(name: str, items: List[Tuple[str, Any]]) -> List[str]:
    lines = [f"[{name}]"]
    for key, value in items:
        text = value if isinstance(value, str) else format_float(value)
        lines.append(f"{key} = {text}")
    lines.append("")
    return lines


def serialize_scenario(
    scenario: SimScenario,
    *,
    provenance: Optional[Mapping[str, Any]] = None,
    metrics: Optional[Mapping[str, Any]] = None,
    header: Optional[str] = None,
) -> str:
    if scenario.disturbance.kind != "constant":
        raise ConfigError("piecewise disturbance schedules cannot be written to a scenario file")

    sw = scenario.swimmer
    swimmer_items: List[Tuple[str, Any]] = []
    if sw.drag is None:
        swimmer_items.append(("e11", sw.e11))
    if sw.geometry is not None:
        swimmer_items += [
            ("theta_h_deg", _degrees_exact(sw.geometry.theta_h)),
            ("n_h", sw.geometry.n_h),
            ("r_h", sw.geometry.r_h),
            ("k_h_mag", sw.geometry.k_h_mag),
        ]
    if sw.drag is not None:
        swimmer_items += [("xi_par", sw.drag.xi_par), ("xi_perp", sw.drag.xi_perp), ("xi_vm", sw.drag.xi_vm)]

    g = scenario.guidance
    ctl = scenario.controller
    controller_items: List[Tuple[str, Any]] = [
        ("omega_so", ctl.omega_so),
        ("omega_so_unit", "rad_s"),
        ("omega0", ctl.omega0),
        ("e11_hat", ctl.e11_hat),
        ("d_mu_hat_x", ctl.d_mu_hat[0]),
        ("d_mu_hat_z", ctl.d_mu_hat[1]),
    ]
    if ctl.q1 is not None:
        controller_items.append(("q1", ctl.q1))
    if ctl.q2 is not None:
        controller_items.append(("q2", ctl.q2))

    d = scenario.disturbance.segments[0][1]
    disturbance_items: List[Tuple[str, Any]] = [("d_mu_x", d[0]), ("d_mu_z", d[1])]
    if scenario.disturbance.d_star is not None:
        disturbance_items.append(("d_star", scenario.disturbance.d_star))

    sim_items: List[Tuple[str, Any]] = [
        ("p0_x", scenario.p0[0]),
        ("p0_z", scenario.p0[1]),
        ("s0", scenario.s0),
        ("t_end", scenario.t_end),
        ("dt", scenario.dt),
        ("mode", scenario.mode),
    ]
    if scenario.hold_dt is not None:
        sim_items.append(("hold_dt", scenario.hold_dt))

    lines: List[str] = []
    if header:
        lines += [f"# {h}" for h in header.splitlines()] + [""]
    lines += _section("swimmer", swimmer_items)
    lines += _section("path", [("theta_r_deg", _degrees_exact(scenario.path.theta_r))])
    lines += _section(
        "guidance",
        [("alpha_d", g.alpha_d), ("sigma0", g.sigma0), ("k_d", g.k_d), ("delta_los", g.delta_los)],
    )
    lines += _section("controller", controller_items)
    lines += _section("disturbance", disturbance_items)
    lines += _section("sim", sim_items)
    if provenance:
        lines += _section("provenance", [(k, str(v)) for k, v in provenance.items()])
    if metrics:
        lines += _section("metrics", [(k, v if isinstance(v, float) else str(v)) for k, v in metrics.items()])
    return "\n".join(lines)


def grid_from_args(specs: List[str]) -> Dict[str, List[Any]]:
    """'alpha_d=600,1200' 형식. 설정 키 이름이나 점 경로(guidance.alpha_d) 모두 받는다."""
    grid: Dict[str, List[Any]] = {}
    for spec in specs:
        if "=" not in spec:
            raise ConfigError(f"grid entry must look like KEY=V1,V2: {spec!r}")
        key, values = (part.strip() for part in spec.split("=", 1))
        raw = [v.strip() for v in values.split(",") if v.strip()]
        if not raw:
            raise ConfigError("grid entry has no values", key=key)
        if key in FIELD_PATHS:
            field_path, convert = FIELD_PATHS[key]
        elif "." in key:
            field_path, convert = key, float
        else:
            raise ConfigError("unknown grid key", key=key)
        try:
            grid[field_path] = [convert(v) for v in raw]
        except ValueError:
            raise ConfigError(f"bad grid values {values!r}", key=key) from None
    return grid


__all__ = [
    "SECTION_KEYS",
    "FIELD_PATHS",
    "ScenarioFile",
    "LoadedScenario",
    "parse_scenario_text",
    "scenario_from_file",
    "loads_scenario",
    "load_scenario",
    "serialize_scenario",
    "grid_from_args",
]
