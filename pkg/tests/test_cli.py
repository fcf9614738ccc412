import csv
import io
import json
import shutil
import subprocess

import numpy as np
import pytest

from spectral_flow_lab import cli
from spectral_flow_lab.config import ExperimentConfig
from spectral_flow_lab.errors import ConfigurationError, ResonanceError
from spectral_flow_lab.verify import Check


def write_config(tmp_path, **raw):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(raw))
    return str(path)


WORKED = {"potential": {"0": 1}, "band_grid": {"min": -1.9, "max": 1.9, "points": 39}}


def read_csv(text):
    return list(csv.DictReader(io.StringIO(text)))


# -- configuration


def test_config_defaults_and_path():
    cfg = ExperimentConfig.from_dict({})
    assert cfg.path().n_segments == 1
    assert not cfg.path().end
    cfg = ExperimentConfig.from_dict({"potentials": [{"0": 1}, {"0": 1, "3": -2}], "coupling": 0.5})
    assert cfg.path().n_segments == 2
    assert cfg.path().end.as_dict() == {0: 0.5, 3: -1.0}


@pytest.mark.parametrize(
    "raw",
    [
        {"schema": 2},
        {"unknown": 1},
        {"potential": {"0": 1}, "potentials": [{"0": 1}]},
        {"potential": {"a": 1}},
        {"potentials": {"0": 1}},
        {"band_grid": {"min": -2.5}},
        {"band_grid": {"points": 0}},
        {"truncation_N": 2000},
        {"potential": {"5000": 1}},
        {"output": {"format": "xml"}},
        {"threads": 0},
    ],
)
def test_config_rejects(raw):
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_dict(raw)


def test_config_echo_roundtrip():
    cfg = ExperimentConfig.from_dict({"potentials": [{"-2": 1.5}], "r_nodes": 16})
    again = ExperimentConfig.from_dict(json.loads(json.dumps(cfg.echo())))
    assert again == cfg


# -- ssf


def test_ssf_worked_example(tmp_path, capsys):
    out = tmp_path / "ssf.csv"
    code = cli.main(["ssf", "--config", write_config(tmp_path, **WORKED), "--output", str(out)])
    assert code == 0
    rows = read_csv(out.read_text())
    assert list(rows[0]) == cli.CSV_COLUMNS
    assert len(rows) == 39
    mid = rows[19]
    assert float(mid["lambda"]) == 0.0
    assert float(mid["xi_ac"]) == pytest.approx(0.1475836, abs=1e-7)
    assert float(mid["det_re"]) == pytest.approx(0.6, abs=1e-12)
    assert float(mid["det_im"]) == pytest.approx(-0.8, abs=1e-12)
    assert all(r["status"] == "ok" for r in rows)
    manifest = json.loads((tmp_path / "ssf.csv.manifest.json").read_text())
    assert manifest["schema"] == 1
    hit = [s for s in manifest["singular_steps"] if s["interval"][0] == 2.0]
    assert hit[0]["interval"][1] == pytest.approx(2.2360680, abs=1e-7)
    assert hit[0]["value"] == 1
    assert manifest["singular_steps"][-1]["interval"][1] is None


def test_ssf_empty_potential_is_zero(tmp_path, capsys):
    code = cli.main(["ssf", "--config", write_config(tmp_path)])
    assert code == 0
    rows = read_csv(capsys.readouterr().out)
    assert all(float(r["xi_ac"]) == 0.0 for r in rows)
    assert all(float(r["det_re"]) == 1.0 for r in rows)


def test_ssf_json_output(tmp_path):
    out = tmp_path / "ssf.json"
    cli.main(["ssf", "--config", write_config(tmp_path, **WORKED), "--output", str(out)])
    manifest = json.loads(out.read_text())
    assert manifest["schema"] == 1
    assert manifest["command"] == "ssf"
    assert manifest["config"]["potentials"] == [{"0": 1.0}]
    assert len(manifest["records"]) == 39


def test_output_is_deterministic_across_threads(tmp_path):
    cfg = write_config(tmp_path, potentials=[{"0": 1.5, "2": -1}, {"0": -0.5}], band_grid={"points": 25})
    outs = []
    for threads in ("1", "3", "1"):
        out = tmp_path / f"o{len(outs)}.csv"
        assert cli.main(["ssf", "--config", cfg, "--output", str(out), "--threads", threads]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_output_path_precedence(tmp_path, monkeypatch):
    from_cfg = tmp_path / "cfg.csv"
    from_env = tmp_path / "env.csv"
    from_flag = tmp_path / "flag.csv"
    cfg = write_config(tmp_path, band_grid={"points": 3}, output={"path": str(from_cfg)})
    cli.main(["ssf", "--config", cfg])
    assert from_cfg.exists()
    monkeypatch.setenv("SPECTRAL_FLOW_LAB_OUTPUT", str(from_env))
    cli.main(["ssf", "--config", cfg])
    assert from_env.exists()
    cli.main(["ssf", "--config", cfg, "--output", str(from_flag)])
    assert from_flag.exists()


# -- smatrix


def test_smatrix_zero_coupling_is_identity(tmp_path):
    out = tmp_path / "s.json"
    cfg = write_config(tmp_path, potential={"0": 1}, coupling=0.0, band_grid={"points": 7})
    assert cli.main(["smatrix", "--config", cfg, "--output", str(out)]) == 0
    for rec in json.loads(out.read_text())["records"]:
        s = np.array(rec["S"])[..., 0] + 1j * np.array(rec["S"])[..., 1]
        np.testing.assert_allclose(s, np.eye(2), atol=1e-15)


def test_smatrix_worked_example(tmp_path):
    out = tmp_path / "s.json"
    assert cli.main(["smatrix", "--config", write_config(tmp_path, **WORKED), "--output", str(out)]) == 0
    records = json.loads(out.read_text())["records"]
    rec = records[19]
    assert (rec["det_re"], rec["det_im"]) == (pytest.approx(0.6), pytest.approx(-0.8))
    for rec in records:
        assert abs(rec["xi_from_mu_grid"] - rec["xi_ac"]) <= 1 / 256 + 1e-6
        assert abs(rec["xi_from_mu_exact"] - rec["xi_ac"]) <= 1e-6
        assert len(rec["mu"]) == 256


# -- verify


def test_verify_texp_defaults(tmp_path, capsys):
    out = tmp_path / "v.json"
    assert cli.main(["verify", "--config", write_config(tmp_path), "--suite", "texp", "--output", str(out)]) == 0
    manifest = json.loads(out.read_text())
    det = [c for c in manifest["checks"]["texp"] if "determinant" in c["name"]][0]
    assert det["value"] <= 1e-8
    assert manifest["summary"]["passed"]


def test_verify_gauge(tmp_path):
    out = tmp_path / "v.json"
    cfg = write_config(tmp_path, potentials=[{"0": 1, "2": 1}, {"0": -2, "1": 0.5, "4": 3}])
    assert cli.main(["verify", "--config", cfg, "--suite", "gauge", "--output", str(out)]) == 0
    gauge = json.loads(out.read_text())["checks"]["gauge"][0]
    assert gauge["value"] <= 1e-10


def test_verify_all_empty_potential(tmp_path):
    out = tmp_path / "v.json"
    cfg = write_config(tmp_path, band_grid={"points": 9}, truncation_N=401)
    assert cli.main(["verify", "--config", cfg, "--output", str(out)]) == 0
    manifest = json.loads(out.read_text())
    assert set(manifest["checks"]) == set(cli.SUITES)
    assert manifest["summary"]["passed"]


# -- exit codes


def test_exit_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["ssf", "--config", str(bad)]) == 3
    assert cli.main(["ssf", "--config", str(tmp_path / "missing.json")]) == 3
    assert cli.main(["ssf", "--config", write_config(tmp_path, unknown=1)]) == 3
    assert cli.main(["ssf", "--config", write_config(tmp_path), "--threads", "0"]) == 3


def test_exit_flagged_quadrature(tmp_path, monkeypatch, capsys):
    monkeypatch.setattr(cli, "xi_ac_detail", lambda *a, **k: (0.0, 1.0, True))
    out = tmp_path / "o.csv"
    assert cli.main(["ssf", "--config", write_config(tmp_path, band_grid={"points": 3}), "--output", str(out)]) == 1
    assert {r["status"] for r in read_csv(out.read_text())} == {"quad_flag"}


def test_exit_domain_error_keeps_grid_rectangular(tmp_path, monkeypatch):
    def boom(path, lam, **kw):
        if lam > 0:
            raise ResonanceError(lam, 0.5, 1e13)
        return 0.0, 0.0, False

    monkeypatch.setattr(cli, "xi_ac_detail", boom)
    out = tmp_path / "o.csv"
    assert cli.main(["ssf", "--config", write_config(tmp_path, band_grid={"points": 5}), "--output", str(out)]) == 2
    rows = read_csv(out.read_text())
    assert len(rows) == 5
    assert [r["status"] for r in rows] == ["ok", "ok", "ok", "resonance", "resonance"]
    assert rows[-1]["xi_ac"] == "nan"


def test_exit_invariant_failure(tmp_path, monkeypatch, capsys):
    monkeypatch.setitem(cli.SUITE_FUNCS, "gauge", lambda cfg: [Check("forced", 1.0, 0.5, False)])
    assert cli.main(["verify", "--config", write_config(tmp_path), "--suite", "gauge"]) == 1


@pytest.mark.skipif(shutil.which("spectral-flow-lab") is None, reason="console script not installed")
def test_console_script(tmp_path):
    cfg = write_config(tmp_path, **WORKED)
    res = subprocess.run(["spectral-flow-lab", "ssf", "--config", cfg], capture_output=True, text=True)
    assert res.returncode == 0
    assert res.stdout.splitlines()[0] == ",".join(cli.CSV_COLUMNS)
