import json

import numpy as np
import pytest

from apspec.config import (RunConfig, apply_overrides, build_base,
                           build_module, build_perturbation, load_config,
                           parse_config, serialize_config)
from apspec.errors import ConfigurationError

MATHIEU_CFG = {
    "dimension": 1,
    "module": {"generators": [[1.0]], "coordinates": [[1]]},
    "coefficients": [
        {"coords": [1], "kind": "constant", "params": [1.0, 0.0]},
    ],
    "eps": [0.1],
    "h": [0.1],
    "tau": [1.0],
    "K": [2],
    "zones": {"delta1": 0.25},
}


def test_parse_and_roundtrip():
    cfg = parse_config(MATHIEU_CFG)
    assert cfg.dimension == 1
    assert cfg.eps == (0.1,)
    assert cfg.zones.delta1 == 0.25
    # serialize -> parse is the identity on the resolved config
    again = parse_config(json.loads(serialize_config(cfg)))
    assert again == cfg
    # and a second serialization is byte-identical
    assert serialize_config(again) == serialize_config(cfg)


def test_unknown_field_rejected_with_path():
    bad = dict(MATHIEU_CFG, zone={"delta1": 0.25})
    with pytest.raises(ConfigurationError, match="unknown field"):
        parse_config(bad)
    bad2 = dict(MATHIEU_CFG, zones={"delta_one": 0.25})
    with pytest.raises(ConfigurationError, match="config.zones"):
        parse_config(bad2)


def test_type_errors_carry_json_path():
    bad = dict(MATHIEU_CFG, eps="0.1")
    with pytest.raises(ConfigurationError, match="config.eps"):
        parse_config(bad)
    bad2 = dict(MATHIEU_CFG, eps=[0.1, "x"])
    with pytest.raises(ConfigurationError, match=r"config.eps\[1\]"):
        parse_config(bad2)


def test_validation_rules():
    with pytest.raises(ConfigurationError):
        parse_config(dict(MATHIEU_CFG, dimension=3))
    with pytest.raises(ConfigurationError):
        parse_config(dict(MATHIEU_CFG, h=[0.0]))
    with pytest.raises(ConfigurationError):
        parse_config(dict(MATHIEU_CFG, zones={"delta1": 0.7}))


def test_overrides_dotted_paths():
    cfg = parse_config(MATHIEU_CFG)
    out = apply_overrides(cfg, {"zones.delta1": "0.1", "eps": "[0.2, 0.05]",
                                "output_dir": "elsewhere"})
    assert out.zones.delta1 == 0.1
    assert out.eps == (0.2, 0.05)
    assert out.output_dir == "elsewhere"
    with pytest.raises(ConfigurationError, match="unknown field"):
        apply_overrides(cfg, {"zones.gamma": "1"})


def test_build_module_transposes_generators():
    cfg = parse_config({
        "dimension": 2,
        "module": {"generators": [[1.0, 0.0], [0.5, 2.0]],
                   "coordinates": [[1, 0], [0, 1]]},
        "coefficients": [{"coords": [1, 0]}],
    })
    mod = build_module(cfg)
    # generator vectors become columns: frequency (0,1) embeds to (0.5, 2.0)
    f = mod.frequency((0, 1))
    assert np.allclose(f.embedding, [0.5, 2.0])


def test_build_perturbation_mirrors_conjugate():
    cfg = parse_config({
        "dimension": 1,
        "module": {"generators": [[1.0]], "coordinates": [[1]]},
        "coefficients": [
            {"coords": [1], "kind": "constant", "params": [0.5, 0.25]},
        ],
    })
    pert = build_perturbation(cfg)
    mod = pert.module
    up = pert.coefficient(mod.frequency((1,)))(np.zeros(1))
    dn = pert.coefficient(mod.frequency((-1,)))(np.zeros(1))
    assert up == 0.5 + 0.25j
    assert dn == np.conj(up)
    assert pert.hermitian


def test_build_base_kinds():
    iso = build_base(parse_config(MATHIEU_CFG))
    assert iso(np.array([2.0])) == 4.0
    quart = build_base(parse_config(dict(
        MATHIEU_CFG, base={"kind": "quadratic_plus_quartic", "quartic": 0.5})))
    assert quart(np.array([1.0])) == pytest.approx(1.5)


def test_load_config_rejects_bad_json(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    with pytest.raises(ConfigurationError):
        load_config(p)


def test_defaults_are_complete():
    cfg = RunConfig()
    # every default survives the strict parser round trip
    assert parse_config(json.loads(serialize_config(cfg))) == cfg
