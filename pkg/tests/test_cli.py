import json

import pytest

from apspec.cli import main

MATHIEU = {
    "dimension": 1,
    "module": {"generators": [[1.0]], "coordinates": [[1]],
               "decay_rate": 6.0, "decay_constant": 1.0},
    "coefficients": [
        {"coords": [1], "kind": "constant", "params": [1.0, 0.0]},
    ],
    "eps": [0.1],
    "h": [0.1],
    "tau": [1.0],
    "K": [0, 1],
    "zones": {"delta1": 0.25},
    "oracle": {"nk": 60, "radius": 32.0},
    "conditions": {"omega": 10.0, "K": 2, "L": 2},
}


def write_cfg(tmp_path, data=None, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data if data is not None else MATHIEU))
    return p


def run(tmp_path, command, cfg=None, extra=()):
    cfg_path = write_cfg(tmp_path, cfg)
    out = tmp_path / "out"
    code = main([command, "--config", str(cfg_path), "--out", str(out), *extra])
    return code, out


def test_conditions_command(tmp_path):
    code, out = run(tmp_path, "conditions")
    assert code == 0
    assert (out / "manifest.json").exists()
    body = (out / "conditions.csv").read_text()
    assert body.splitlines()[0] == "condition,status,margin,witness,note"
    assert "overall:" in (out / "conditions_summary.txt").read_text()


def test_manifest_records_resolved_config_and_overrides(tmp_path):
    code, out = run(tmp_path, "conditions", extra=["--override", "seed=7"])
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "conditions"
    assert manifest["overrides"] == {"seed": "7"}
    assert manifest["resolved_config"]["seed"] == 7
    # defaults are made explicit in the manifest
    assert manifest["resolved_config"]["M"] == 1


def test_ids_command_twelve_digit_output(tmp_path):
    code, out = run(tmp_path, "ids")
    assert code == 0
    lines = (out / "ids.csv").read_text().splitlines()
    assert lines[0].startswith("h,epsilon,tau,K,n_pipeline")
    assert len(lines) == 3  # header + K in {0, 1}
    val = lines[1].split(",")[4]
    mantissa = val.replace("-", "").replace(".", "").split("e")[0].lstrip("0")
    assert len(mantissa) <= 12


def test_ids_command_deterministic_rerun(tmp_path):
    _, out1 = run(tmp_path, "ids")
    body1 = (out1 / "ids.csv").read_text()
    cfg_path = write_cfg(tmp_path, name="cfg2.json")
    out2 = tmp_path / "out2"
    main(["ids", "--config", str(cfg_path), "--out", str(out2)])
    assert (out2 / "ids.csv").read_text() == body1


def test_zones_and_gauge_commands(tmp_path):
    code, out = run(tmp_path, "zones")
    assert code == 0
    zone_files = list(out.glob("zones_*.csv"))
    assert len(zone_files) == 1
    header = zone_files[0].read_text().splitlines()[0]
    assert header == "xi0,label,level,component,subspace"

    code, out = run(tmp_path, "gauge")
    assert code == 0
    lines = (out / "gauge_chains.csv").read_text().splitlines()
    assert lines[0].startswith("h,epsilon,tau,step,gamma,eps_k")
    assert len(lines) >= 2


def test_oracle_command(tmp_path):
    code, out = run(tmp_path, "oracle")
    assert code == 0
    lines = (out / "oracle.csv").read_text().splitlines()
    assert lines[0] == "h,epsilon,tau,n_oracle"
    assert float(lines[1].split(",")[3]) > 0


def test_converge_command(tmp_path):
    cfg = dict(MATHIEU, h=[0.2, 0.1, 0.05], K=[1], theta_exp=1.0,
               oracle={"nk": 60, "radius": 32.0})
    code, out = run(tmp_path, "converge", cfg=cfg)
    assert code == 0
    assert (out / "study.csv").exists()
    slopes = (out / "slopes.csv").read_text().splitlines()
    assert slopes[0] == "K,slope,slope_increment"


def test_propagate_command(tmp_path):
    cfg = dict(MATHIEU, h=[0.05], eps=[0.01],
               propagate={"q1_center": [0.1], "q1_margin": 0.1,
                          "q2_center": [0.8], "q2_margin": 0.1,
                          "q_width": 0.1, "T": 1.0, "k_samples": 4})
    code, out = run(tmp_path, "propagate", cfg=cfg)
    assert code == 0
    lines = (out / "propagation.csv").read_text().splitlines()
    assert lines[0] == "h,epsilon,T,norm"
    assert float(lines[1].split(",")[3]) < 1e-6  # separated boxes


def test_bad_config_exit_code(tmp_path):
    cfg_path = write_cfg(tmp_path, dict(MATHIEU, nonsense=1))
    assert main(["ids", "--config", str(cfg_path)]) == 2


def test_malformed_override_exit_code(tmp_path):
    cfg_path = write_cfg(tmp_path)
    assert main(["ids", "--config", str(cfg_path),
                 "--override", "no_equals"]) == 2


def test_missing_config_exit_code(tmp_path):
    assert main(["ids", "--config", str(tmp_path / "absent.json")]) == 2
