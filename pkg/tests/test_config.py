import json

import pytest

from facetflow.config import SCHEMA, ConfigError, load_config, parse_config, parse_mapping


def test_minimal_config_fills_defaults():
    cfg = parse_config('scenario = "explicit1d"\n')
    assert cfg.seed == 0
    assert cfg["facet1d"]["h"] == 1e-3
    # scenario defaults layered over the schema
    assert cfg["forcing"]["kind"] == "tent" and cfg["forcing"]["c"] == 3.0
    assert cfg["anisotropy"]["preset"] == "interval"


def test_user_values_override_scenario_defaults():
    cfg = parse_config('scenario = "explicit1d"\nseed = 4\n[forcing]\nc = 5\n')
    assert cfg["forcing"]["c"] == 5.0 and isinstance(cfg["forcing"]["c"], float)
    assert cfg.seed == 4


def test_misspelled_section_is_named():
    with pytest.raises(ConfigError) as exc:
        parse_config('scenario = "explicit1d"\n[forcign]\nc = 1\n')
    assert exc.value.key == "forcign"
    assert "forcign" in str(exc.value)


def test_missing_scenario():
    with pytest.raises(ConfigError, match="scenario: missing required key"):
        parse_config("seed = 1\n")


def test_unknown_scenario():
    with pytest.raises(ConfigError, match="unknown scenario"):
        parse_config('scenario = "nope"\n')


def test_syntax_error():
    with pytest.raises(ConfigError, match="<syntax>"):
        parse_config('scenario = \n')


# one rejection per key family: an unknown key and a type mismatch in every section
@pytest.mark.parametrize("section", sorted(SCHEMA))
def test_unknown_key_rejected_in_every_section(section):
    with pytest.raises(ConfigError) as exc:
        parse_mapping({"scenario": "explicit1d", section: {"bogus_key": 1}})
    assert exc.value.key == f"{section}.bogus_key"


@pytest.mark.parametrize("section", sorted(SCHEMA))
def test_type_mismatch_rejected_in_every_section(section):
    key, (types, _) = next(iter(SCHEMA[section].items()))
    bad = {"x": 1} if str not in types and list not in types else 3.5j
    bad = "text" if str not in types else [1, 2]
    with pytest.raises(ConfigError) as exc:
        parse_mapping({"scenario": "explicit1d", section: {key: bad}})
    assert exc.value.key == f"{section}.{key}"


def test_section_must_be_table():
    with pytest.raises(ConfigError, match="grid: expected a table"):
        parse_mapping({"scenario": "explicit1d", "grid": 3})


@pytest.mark.parametrize("key,value", [("seed", "one"), ("scenario", 3), ("out", 1)])
def test_top_level_types(key, value):
    raw = {"scenario": "explicit1d", key: value}
    with pytest.raises(ConfigError) as exc:
        parse_mapping(raw)
    assert exc.value.key == key


def test_bool_is_not_an_integer():
    with pytest.raises(ConfigError, match="got bool"):
        parse_mapping({"scenario": "explicit1d", "grid": {"size": True}})


def test_unknown_top_level_key():
    with pytest.raises(ConfigError) as exc:
        parse_mapping({"scenario": "explicit1d", "sead": 3})
    assert exc.value.key == "sead"


def test_round_trip_through_manifest(tmp_path):
    cfg = parse_config('scenario = "lip_bound"\nseed = 3\n[mobility]\nbeta = [1.0, 2.0]\n')
    text = json.dumps(cfg.to_dict())
    again = parse_config(text, "json")
    assert again == cfg
    p = tmp_path / "c.json"
    p.write_text(text)
    assert load_config(str(p)) == cfg


def test_grid_dimension_must_match_anisotropy():
    from facetflow.scenarios import build_anisotropy

    cfg = parse_mapping({"scenario": "prox", "grid": {"n": 1}})
    with pytest.raises(ConfigError) as exc:
        build_anisotropy(cfg)
    assert exc.value.key == "grid.n"
    assert build_anisotropy(parse_mapping({"scenario": "prox", "grid": {"n": 2}})).n == 2


def test_grid_spacing_overrides_length():
    from facetflow.scenarios import _grid_h

    assert _grid_h(parse_mapping({"scenario": "prox", "grid": {"size": 64}})) == 2.0 / 64
    assert _grid_h(parse_mapping({"scenario": "prox", "grid": {"size": 64, "h": 0.01}})) == 0.01
