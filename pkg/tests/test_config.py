import math

import pytest

from magchain.config import (CatheterSpec, MagnetSpec,
                             SpringSpec, default_spec, load_spec, save_si_json,
                             save_spec, spec_to_document, to_si_dict)
from magchain.errors import ConfigError


def _doc():
    return {
        "schema_version": 1,
        "magnet": {"remanence_T": 1.42, "diameter_mm": 1.5, "length_mm": 2.0},
        "segments": {"count": 6, "spring_free_length_mm": 3.14,
                     "design_angle_deg": 90.0},
        "environment": {"field_mT": 40.0, "lumen_distance_mm": 80.0,
                        "lumen_direction_deg": 180.0, "steering_margin_deg": 20.0},
    }


def test_magnet_moment_closed_form():
    spec, _ = load_spec(_doc())
    volume = math.pi * (1.5e-3 / 2.0) ** 2 * 2e-3
    assert spec.magnet.volume == pytest.approx(volume, rel=1e-15)
    moment = 1.42 * volume / (4e-7 * math.pi)
    assert spec.magnet.moment == pytest.approx(moment, rel=1e-15)
    # pi cancels: hand value B_r (d/2)^2 l / 1e-7 / 4 = 3.99375e-3 A m^2
    assert spec.magnet.moment == pytest.approx(3.99375e-3, rel=1e-12)


def test_design_radius_from_arc():
    spec, _ = load_spec(_doc())
    s = spec.springs[0]
    assert s.design_radius == pytest.approx(3.14e-3 / (math.pi / 2), rel=1e-15)
    assert abs(s.design_radius - 2.0e-3) < 1.1e-6  # 2 mm to drawing precision


def test_unit_conversion_exact():
    _, env = load_spec(_doc())
    assert env.field_magnitude == 0.040
    spec, _ = load_spec(_doc())
    assert spec.magnet.length == 0.002
    assert env.lumen_distance == 0.080


def test_positivity_validation():
    doc = _doc()
    doc["environment"]["lumen_distance_mm"] = 0.0
    with pytest.raises(ConfigError, match="lumen_distance"):
        load_spec(doc)
    doc = _doc()
    doc["magnet"]["diameter_mm"] = -1.0
    with pytest.raises(ConfigError, match="diameter"):
        load_spec(doc)


def test_angle_range_validation():
    doc = _doc()
    doc["environment"]["lumen_direction_deg"] = 200.0
    with pytest.raises(ConfigError, match="lumen_direction"):
        load_spec(doc)
    doc = _doc()
    doc["environment"]["steering_margin_deg"] = 90.0
    with pytest.raises(ConfigError, match="steering_margin"):
        load_spec(doc)


def test_missing_key_names_path():
    doc = _doc()
    del doc["magnet"]["remanence_T"]
    with pytest.raises(ConfigError, match="magnet.remanence_T"):
        load_spec(doc)


def test_schema_version_checked():
    doc = _doc()
    doc["schema_version"] = 99
    with pytest.raises(ConfigError, match="schema_version"):
        load_spec(doc)


def test_default_spec_reference_point():
    spec, env = default_spec()
    assert spec.segment_count == 6
    assert spec.magnet.remanence == 1.42
    assert env.lumen_distance == 0.080
    assert env.field_magnitude == 0.040
    assert env.lumen_direction == math.pi
    assert env.steering_margin == pytest.approx(math.radians(20.0), rel=1e-15)
    assert all(s.bending_stiffness is None for s in spec.springs)
    for s in spec.springs:
        assert s.free_length == pytest.approx(s.design_radius * s.design_angle,
                                              rel=1e-14)


def test_lengths():
    spec, _ = default_spec()
    assert spec.segment_pitch == pytest.approx(5.14e-3, rel=1e-15)
    assert spec.free_length == pytest.approx(30.84e-3, rel=1e-12)
    # the clamped base magnet counts toward the error-normalization length
    assert spec.total_length == pytest.approx(32.84e-3, rel=1e-12)


def test_round_trip_equality():
    spec1, env1 = load_spec(_doc())
    spec2, env2 = load_spec(spec_to_document(spec1, env1))
    assert spec1 == spec2
    assert env1 == env2


def test_round_trip_with_stiffnesses(tmp_path):
    spec1, env1 = load_spec(_doc())
    spec1 = spec1.with_stiffnesses([3.81e-5, 13.37e-5, 18.71e-5, 21.28e-5,
                                    22.54e-5, 23.17e-5])
    path = tmp_path / "cfg.yaml"
    save_spec(spec1, env1, path)
    spec2, env2 = load_spec(path)
    assert spec1 == spec2
    assert env1 == env2


def test_stiffness_vector_and_assignment():
    spec, _ = default_spec()
    with pytest.raises(ConfigError, match="bending_stiffness"):
        spec.stiffness_vector()
    kb = [1e-5, 2e-5, 3e-5, 4e-5, 5e-5, 6e-5]
    filled = spec.with_stiffnesses(kb)
    assert filled.stiffness_vector().tolist() == kb
    assert filled.stiffness_vector(3).tolist() == kb[:3]
    with pytest.raises(ConfigError):
        spec.with_stiffnesses([1e-5, 2e-5])


def test_stiffness_list_length_checked():
    doc = _doc()
    doc["segments"]["bending_stiffness_Nm_per_rad"] = [1e-5, 2e-5]
    with pytest.raises(ConfigError, match="bending_stiffness"):
        load_spec(doc)


def test_spring_consistency_invariant():
    magnet = MagnetSpec(remanence=1.0, diameter=1e-3, length=2e-3)
    springs = (SpringSpec(index=1, free_length=3e-3, design_angle=1.0),
               SpringSpec(index=2, free_length=4e-3, design_angle=1.0))
    with pytest.raises(ConfigError, match="identical"):
        CatheterSpec(magnet=magnet, springs=springs)


def test_si_export(tmp_path):
    spec, env = default_spec()
    d = to_si_dict(spec, env)
    assert d["si_units"] is True
    assert d["magnet"]["dipole_moment_Am2"] == pytest.approx(3.99375e-3, rel=1e-12)
    assert d["environment"]["field_T"] == 0.040
    assert d["segments"]["total_length_m"] == pytest.approx(32.84e-3, rel=1e-12)
    path = tmp_path / "si.json"
    save_si_json(spec, env, path)
    import json
    assert json.loads(path.read_text())["segments"]["count"] == 6


def test_missing_config_file():
    with pytest.raises(ConfigError, match="not found"):
        load_spec("/nonexistent/config.yaml")


def test_parse_failure():
    with pytest.raises(ConfigError, match="parse"):
        load_spec("{:\nbroken yaml\n  - ][")


def test_environment_immutable():
    _, env = default_spec()
    with pytest.raises(Exception):
        env.field_magnitude = 0.05
