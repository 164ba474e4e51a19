import json

import pytest

from lingrowth import cli
from lingrowth.fieldio import read_field_binary, read_field_csv

SMALL = ["--set", "grid.nx=17", "--set", "grid.ny=17"]


def _run(tmp_path, *args):
    return cli.main(list(args) + ["--output-root", str(tmp_path), "-q"])


def test_check_density_passes(tmp_path, capsys):
    assert _run(tmp_path, "check-density", "--set", "mu=1.5") == 0
    outdir = capsys.readouterr().out.strip().splitlines()[-1]
    report = json.loads((tmp_path / outdir.split("/")[-1] / "report.json").read_text())
    assert all(report["verdicts"].values())


def test_config_error_exit_code(tmp_path, capsys):
    assert _run(tmp_path, "check-density", "--set", "mu=0.5") == 2
    assert "μ > 1 required" in capsys.readouterr().err
    assert _run(tmp_path, "solve", "--set", "gamma_2=0.3") == 2
    assert "did you mean 'scheme.gamma'" in capsys.readouterr().err
    assert _run(tmp_path, "solve", "--config", str(tmp_path / "missing.cfg")) == 2


def test_softplus_fails_lower_bound(tmp_path):
    assert _run(tmp_path, "check-density", "--preset", "appendix") == 1


def test_emit_config(capsys):
    assert cli.main(["solve", "--preset", "kink", "--emit-config"]) == 0
    text = capsys.readouterr().out
    assert "preset = kink" in text
    assert "deltas = 0.1, 0.01, 0.001, 0.0001" in text


def test_solve_writes_fields(tmp_path):
    assert _run(tmp_path, "solve", *SMALL, "--set", "output=s1", "--set", "delta=0.01") == 0
    d = tmp_path / "s1"
    u = read_field_binary(d / "field.bin")
    v = read_field_csv(d / "field.csv")
    assert u.grid.nx == 17
    assert (u.values == v.values).all()
    manifest = json.loads((d / "manifest.json").read_text())
    assert {"field.bin", "field.csv"} <= set(manifest["files"])
    assert "numpy" in manifest["versions"]


def test_path_run_is_deterministic(tmp_path):
    args = ["path", "--preset", "vanishing_viscosity", *SMALL]
    assert _run(tmp_path / "a", *args) == 0
    assert _run(tmp_path / "b", *args) == 0
    (da,) = (tmp_path / "a").iterdir()
    (db,) = (tmp_path / "b").iterdir()
    assert da.name == db.name
    csvs = sorted(p.name for p in da.glob("*.csv"))
    assert "path.csv" in csvs and "caccioppoli.csv" in csvs
    for name in csvs + ["report.json", "manifest.json"]:
        assert (da / name).read_bytes() == (db / name).read_bytes(), name
    for k in range(4):
        assert (da / f"field_{k}.bin").read_bytes() == (db / f"field_{k}.bin").read_bytes()


def test_run_id_depends_on_config():
    a = cli.load_config(None, "kink", [])
    b = cli.load_config(None, "kink", ["seed=1"])
    assert cli.run_id(a, "path") != cli.run_id(b, "path")
    assert cli.run_id(a, "path") != cli.run_id(a, "solve")
    assert cli.run_id(a, "path") == cli.run_id(cli.load_config(None, "kink", []), "path")


def test_failing_check_is_isolated(tmp_path, monkeypatch):
    def boom(cfg):
        raise RuntimeError("probe exploded")

    monkeypatch.setattr(cli, "pipeline_lemma1", boom)
    cfg = cli.load_config(None, None, ["experiments=lemma1, admissibility", "mu=1.5"])
    code, outdir, report = cli.run(cfg, "full", tmp_path)
    assert code == 1
    assert report.sections["lemma1"] == {"error": "RuntimeError: probe exploded"}
    assert report.verdicts["lemma1.error"] is False
    assert "admissibility" in report.sections
    assert report.failures() == ["lemma1.error"]


def test_thm18_gate_blocks_without_override(tmp_path):
    cfg = cli.load_config(None, "thm18", ["grid.nx=17", "grid.ny=17", "scheme.gamma=0.4"])
    code, _, report = cli.run(cfg, "path", tmp_path)
    assert code == 1
    assert "path" not in report.sections
    assert any("solves skipped" in f for f in report.flags)
    cfg = cli.load_config(None, "thm18", ["grid.nx=17", "grid.ny=17", "scheme.gamma=0.4",
                                          "override=true"])
    _, _, report = cli.run(cfg, "path", tmp_path)
    assert "path" in report.sections
    assert any("override" in f for f in report.flags)


def test_output_root_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.ENV_ROOT, str(tmp_path / "env"))
    assert cli.main(["admissible", "--preset", "affine", "-q"]) == 0
    assert any((tmp_path / "env").iterdir())


def test_lemma1_radial_preset(tmp_path):
    cfg = cli.load_config(None, "lemma1_radial", [])
    code, outdir, report = cli.run(cfg, "lemma1", tmp_path)
    assert code == 0
    assert report.sections["lemma1"]["verdict"] == "violated"
    assert (outdir / "lemma1.csv").read_text().startswith("c_k,r_k")


@pytest.mark.slow
@pytest.mark.parametrize("name", ["affine", "uniqueness", "kink", "contrast", "thm18"])
def test_shipped_presets_pass(tmp_path, name):
    cfg = cli.load_config(None, name, ["grid.nx=33", "grid.ny=33"])
    code, _, report = cli.run(cfg, "full", tmp_path)
    assert code == 0, report.failures()


def test_integrability_without_verdict_outside_regime(tmp_path):
    cfg = cli.load_config(None, "contrast", ["grid.nx=17", "grid.ny=17", "f1.mu=2.5"])
    code, _, report = cli.run(cfg, "path", tmp_path)
    assert report.sections["integrability"]["verdict_applies"] is False
    assert not any(k.startswith("integrability.") for k in report.verdicts)
    assert "gamma1" in report.sections["integrability"]
