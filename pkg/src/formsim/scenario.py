"""Scenario files: versioned JSON documents that build a SimConfig.

A scenario can be referenced by preset name (shipped in formsim/data) or by
file path.  Every block is validated field by field; unknown keys are
rejected so typos fail loudly rather than silently falling back to defaults.
"""

from __future__ import annotations

import importlib.resources
import json
from dataclasses import dataclass
from pathlib import Path

from .autopilots import AutopilotGains, BaselineGains
from .errors import ScenarioError
from .nsb import TaskConfig
from .paths import make_path
from .simulate import InitialSpec, SimConfig
from .vessel import OceanCurrent, VesselParams

SCHEMA_VERSION = 1
PRESETS = ("sin300", "straight", "circle-r10", "baseline-vii")

__all__ = ["Scenario", "load_scenario", "scenario_from_dict", "PRESETS"]


@dataclass(frozen=True)
class Scenario:
    name: str
    config: SimConfig
    expected: dict
    source: str


def _take(block: dict, context: str, **spec):
    """Pop typed fields from a block; reject leftovers."""
    out = {}
    block = dict(block)
    for key, (typ, default) in spec.items():
        if key in block:
            val = block.pop(key)
            try:
                out[key] = typ(val)
            except (TypeError, ValueError) as exc:
                raise ScenarioError(f"{context}.{key}: {exc}") from exc
        elif default is ...:
            raise ScenarioError(f"{context}.{key}: required field missing")
        else:
            out[key] = default
    if block:
        raise ScenarioError(f"{context}: unknown field(s) {sorted(block)}")
    return out


def _pair(val):
    a, b = val
    return (float(a), float(b))


def _default_vessel() -> VesselParams:
    ref = importlib.resources.files("formsim").joinpath("data/default_vessel.json")
    return VesselParams.from_dict(json.loads(ref.read_text()))


def _resolve_vessel(spec, base_dir: Path | None) -> VesselParams:
    if spec == "default":
        return _default_vessel()
    if isinstance(spec, dict):
        try:
            return VesselParams.from_dict(spec)
        except ValueError as exc:
            raise ScenarioError(f"vessel: {exc}") from exc
    if isinstance(spec, str):
        path = Path(spec)
        if not path.is_absolute() and base_dir is not None:
            path = base_dir / path
        if not path.exists():
            raise ScenarioError(f"vessel: parameter file {path} not found")
        try:
            return VesselParams.from_json(path)
        except ValueError as exc:
            raise ScenarioError(f"vessel: {exc}") from exc
    raise ScenarioError("vessel: expected 'default', an inline object, or a file path")


def scenario_from_dict(doc: dict, base_dir: Path | None = None,
                       source: str = "<dict>") -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError("scenario document must be a JSON object")
    doc = dict(doc)
    schema = doc.pop("schema", None)
    if schema != SCHEMA_VERSION:
        raise ScenarioError(f"schema: expected {SCHEMA_VERSION}, got {schema!r}")
    name = doc.pop("name", None)
    if not isinstance(name, str) or not name:
        raise ScenarioError("name: required non-empty string")

    vessel = _resolve_vessel(doc.pop("vessel", "default"), base_dir)

    cur = _take(doc.pop("current", {}), "current", Vx=(float, 0.0), Vy=(float, 0.0))
    current = OceanCurrent(**cur)

    path_spec = doc.pop("path", None)
    if not isinstance(path_spec, dict):
        raise ScenarioError("path: required object with a 'kind' field")
    try:
        path = make_path(path_spec)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"path: {exc}") from exc

    guid = _take(doc.pop("guidance", {}), "guidance",
                 k_theta=(float, 1.0), mu=(float, 50.0), u_d=(float, 3.0))

    tasks = _take(doc.pop("tasks", {}), "tasks",
                  sigma_ca_d=(float, 20.0),
                  lambda_ca=(float, 1.0),
                  sigma_f_d_p=(_pair, (0.0, 20.0)),
                  lambda_f_p=(_pair, (2.5, 0.3)),
                  ca_hysteresis=(float, 0.5),
                  formation_feedforward=(bool, False))

    ap = dict(doc.pop("autopilot", {}))
    mode = ap.pop("mode", "adaptive")
    baseline_spec = ap.pop("baseline", {})
    gains_fields = _take(ap, "autopilot",
                         k_psi=(float, 1.2), k_r=(float, 1.3),
                         lam=(float, 100.0), k_d=(float, 10.0),
                         gamma_r=(float, 5.0), k_u=(float, 0.1),
                         k_e=(float, 0.1), gamma_u=(float, 1.0),
                         sign_eps=(float, 0.1), strict_sign=(bool, False))
    baseline_fields = _take(baseline_spec, "autopilot.baseline",
                            kp_u=(float, 1.0), ki_u=(float, 0.1),
                            kp_psi=(float, 2.0), kd_psi=(float, 5.0),
                            integral_limit=(float, 2.0))

    sim = _take(doc.pop("sim", {}), "sim",
                dt=(float, 0.01), t_end=(float, 600.0), seed=(int, 0),
                vdot_mode=(str, "truth"), sensor_noise_std=(float, 0.0),
                deriv_filter_tau=(float, 0.1), u_d_dot_max=(float, 0.5),
                v_max=(float, 1.0))

    init_block = dict(doc.pop("initial", {}))
    vessels = init_block.pop("vessels", None)
    theta0 = init_block.pop("theta0", None)
    init_fields = _take(init_block, "initial",
                        theta_start=(float, 0.0),
                        cross_track_offset=(float, 20.0),
                        along_track_offset=(float, 0.0),
                        formation_offset=(float, 10.0))
    if theta0 is not None:
        theta0 = float(theta0)
    if vessels is not None:
        if (len(vessels) != 2 or any(len(v) != 6 for v in vessels)):
            raise ScenarioError("initial.vessels: expected two 6-element state rows")
        vessels = tuple(tuple(float(q) for q in v) for v in vessels)
    initial = InitialSpec(vessels=vessels, theta0=theta0, **init_fields)

    expected = doc.pop("expected", {})
    if not isinstance(expected, dict):
        raise ScenarioError("expected: must be an object")
    if doc:
        raise ScenarioError(f"unknown top-level field(s) {sorted(doc)}")

    v_max = sim.pop("v_max")
    try:
        config = SimConfig(
            vessel=vessel,
            path=path,
            current=current,
            v_max=v_max,
            task=TaskConfig(**tasks),
            gains=AutopilotGains(**gains_fields),
            baseline=BaselineGains(**baseline_fields),
            autopilot_mode=mode,
            initial=initial,
            name=name,
            **guid,
            **sim,
        )
    except ValueError as exc:
        raise ScenarioError(str(exc)) from exc
    return Scenario(name=name, config=config, expected=expected, source=source)


def load_scenario(ref: str | Path) -> Scenario:
    """Load a scenario by preset name or JSON file path."""
    ref = str(ref)
    if ref in PRESETS:
        res = importlib.resources.files("formsim").joinpath(f"data/{ref}.json")
        doc = json.loads(res.read_text())
        return scenario_from_dict(doc, base_dir=None, source=f"preset:{ref}")
    path = Path(ref)
    if not path.exists():
        raise FileNotFoundError(
            f"scenario {ref!r} is neither a preset ({', '.join(PRESETS)}) nor a file"
        )
    with open(path) as fh:
        doc = json.load(fh)  # json.JSONDecodeError carries line/column
    return scenario_from_dict(doc, base_dir=path.parent, source=str(path))
