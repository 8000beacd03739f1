import json

import pytest

from formsim.errors import ScenarioError
from formsim.paths import SinusoidPath
from formsim.scenario import PRESETS, load_scenario, scenario_from_dict


def minimal_doc(**over):
    doc = {
        "schema": 1,
        "name": "t",
        "path": {"kind": "straight", "theta_min": -100.0, "theta_max": 100.0},
    }
    doc.update(over)
    return doc


def test_all_presets_load():
    for name in PRESETS:
        scn = load_scenario(name)
        assert scn.name == name
        assert scn.config.dt > 0.0


def test_sin300_preset_reference_values():
    scn = load_scenario("sin300")
    cfg = scn.config
    assert isinstance(cfg.path, SinusoidPath)
    assert cfg.current.Vx == -0.707 and cfg.current.Vy == -0.707
    assert cfg.u_d == 3.0 and cfg.mu == 50.0
    assert cfg.task.sigma_ca_d == 20.0 and cfg.task.lambda_ca == 1.0
    assert cfg.task.sigma_f_d_p == (0.0, 20.0)
    assert cfg.task.lambda_f_p == (2.5, 0.3)
    g = cfg.gains
    assert (g.k_psi, g.k_r, g.lam, g.k_d) == (1.2, 1.3, 100.0, 10.0)
    assert (g.k_u, g.k_e, g.gamma_r, g.gamma_u) == (0.1, 0.1, 5.0, 1.0)


def test_unknown_top_level_field_rejected():
    with pytest.raises(ScenarioError, match="unknown top-level"):
        scenario_from_dict(minimal_doc(extra=1))


def test_unknown_block_field_rejected():
    with pytest.raises(ScenarioError, match="guidance"):
        scenario_from_dict(minimal_doc(guidance={"mu": 50.0, "looky": 1}))


def test_wrong_schema_rejected():
    with pytest.raises(ScenarioError, match="schema"):
        scenario_from_dict(minimal_doc(schema=2))


def test_missing_path_rejected():
    doc = minimal_doc()
    del doc["path"]
    with pytest.raises(ScenarioError, match="path"):
        scenario_from_dict(doc)


def test_invalid_config_value_surfaces():
    with pytest.raises(ScenarioError, match="dt"):
        scenario_from_dict(minimal_doc(sim={"dt": 0.5}))


def test_vessel_inline_and_file(tmp_path, default_params):
    doc = minimal_doc(vessel=default_params.to_dict())
    scn = scenario_from_dict(doc)
    assert scn.config.vessel == default_params

    vp = tmp_path / "v.json"
    vp.write_text(json.dumps(default_params.to_dict()))
    doc = minimal_doc(vessel="v.json")
    scn = scenario_from_dict(doc, base_dir=tmp_path)
    assert scn.config.vessel == default_params


def test_explicit_initial_vessels_parse():
    doc = minimal_doc(initial={"vessels": [[0, 10, 0, 0, 0, 0], [0, -10, 0, 0, 0, 0]]})
    scn = scenario_from_dict(doc)
    assert scn.config.initial.vessels[0][1] == 10.0


def test_bad_initial_vessels_rejected():
    doc = minimal_doc(initial={"vessels": [[0, 10, 0], [0, -10, 0, 0, 0, 0]]})
    with pytest.raises(ScenarioError, match="vessels"):
        scenario_from_dict(doc)


def test_file_loading_reports_missing(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_scenario(tmp_path / "nope.json")


def test_file_loading(tmp_path):
    p = tmp_path / "s.json"
    p.write_text(json.dumps(minimal_doc()))
    scn = load_scenario(p)
    assert scn.source.endswith("s.json")
