import json

import pytest

from facetflow.cli import main


def _cfg(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


@pytest.fixture(scope="module")
def explicit_runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "c.toml"
    cfg.write_text('scenario = "explicit1d"\nseed = 2\n[output]\nsvg = false\n')
    codes = [main(["facet1d", "--config", str(cfg), "--out", str(root / f"run{k}")]) for k in range(2)]
    return root, codes


def test_explicit_run_succeeds_and_writes_manifest(explicit_runs):
    root, codes = explicit_runs
    assert codes == [0, 0]
    m = json.loads((root / "run0" / "manifest.json").read_text())
    assert m["passed"] and m["config"]["scenario"] == "explicit1d" and m["config"]["seed"] == 2
    assert all(c["passed"] for c in m["checks"])


def test_runs_are_byte_identical(explicit_runs):
    root, _ = explicit_runs
    csvs = sorted(p.relative_to(root / "run0") for p in (root / "run0").rglob("*.csv"))
    assert csvs
    for rel in csvs:
        assert (root / "run0" / rel).read_bytes() == (root / "run1" / rel).read_bytes(), rel


def test_family_mismatch_exits_2(tmp_path, capsys):
    assert main(["evolve", "--config", _cfg(tmp_path, 'scenario = "explicit1d"\n')]) == 2
    assert "belongs to 'facet1d'" in capsys.readouterr().err


def test_bad_key_exits_2_and_names_it(tmp_path, capsys):
    assert main(["facet1d", "--config", _cfg(tmp_path, 'scenario = "explicit1d"\n[forcign]\nc = 1\n')]) == 2
    assert "forcign: unknown key" in capsys.readouterr().err


def test_missing_config_file_exits_2(tmp_path):
    assert main(["facet1d", "--config", str(tmp_path / "absent.toml")]) == 2


def test_env_output_root(tmp_path, monkeypatch):
    monkeypatch.setenv("FACETFLOW_OUT", str(tmp_path / "env"))
    cfg = _cfg(tmp_path, 'scenario = "nonexistence"\n')
    assert main(["facet1d", "--config", cfg]) == 0
    assert (tmp_path / "env" / "nonexistence" / "manifest.json").exists()


def test_failed_check_exits_1_with_rerun_line(tmp_path, capsys):
    # a forcing strong enough to hold the facet together: no certificate
    cfg = _cfg(tmp_path, 'scenario = "nonexistence"\nseed = 5\n[forcing]\nscale = 3.0\n')
    assert main(["facet1d", "--config", cfg, "--out", str(tmp_path / "o")]) == 1
    err = capsys.readouterr().err
    assert "rerun with: facetflow facet1d --config" in err and "--seed 5" in err


def test_json_config_accepted(tmp_path):
    cfg = _cfg(tmp_path, json.dumps({"scenario": "nonexistence"}), "c.json")
    assert main(["facet1d", "--config", cfg, "--out", str(tmp_path / "o")]) == 0


def test_suite_runs_listed_scenarios(tmp_path, capsys):
    cfg = _cfg(tmp_path, 'scenario = "suite"\n[suite]\nscenarios = ["nonexistence", "explicit1d"]\n')
    assert main(["suite", "--config", cfg, "--out", str(tmp_path / "s")]) == 0
    assert (tmp_path / "s" / "nonexistence" / "manifest.json").exists()
    assert (tmp_path / "s" / "explicit1d" / "manifest.json").exists()
    assert "== explicit1d" in capsys.readouterr().out
