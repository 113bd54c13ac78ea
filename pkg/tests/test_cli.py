import json

import numpy as np
import pytest

from fksle.cli import run


def test_bessel_output_is_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(["bessel", "--d", "1.5", "--T", "0.1", "--seed", "4", "--out", str(a)]) == 0
    assert run(["bessel", "--d", "1.5", "--T", "0.1", "--seed", "4", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().splitlines()[0] == "t,X"


def test_validation_exit_codes(tmp_path, capsys):
    assert run(["bessel", "--d", "-1"]) == 2
    assert run(["sample"]) == 2
    assert run(["nonsense"]) == 2
    assert run(["domain", "--width", "0.05", "--height", "1", "--mesh", "0.1", "--out", str(tmp_path / "d.json")]) == 2


def test_config_errors_report_lines(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{\n  "version": 1,\n  "dt": 0.01,\n  "bogus": 3\n}\n')
    assert run(["bessel", "--config", str(cfg)]) == 2
    assert f"{cfg}:4" in capsys.readouterr().err
    cfg.write_text('{\n  "version": 1,\n  "dt": 0.01,\n}\n')
    assert run(["bessel", "--config", str(cfg)]) == 2
    assert f"{cfg}:4:1" in capsys.readouterr().err
    cfg.write_text('{"version": 2}')
    assert run(["bessel", "--config", str(cfg)]) == 2


def test_config_fills_options(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"version": 1, "T": 0.01, "dt": 0.005}))
    out = tmp_path / "x.csv"
    assert run(["bessel", "--config", str(cfg), "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 4


def test_report_exit_code(tmp_path):
    (tmp_path / "report.json").write_text(json.dumps({"passed": False}))
    assert run(["report", "--dir", str(tmp_path)]) == 3
    (tmp_path / "report.json").write_text(json.dumps({"passed": True}))
    assert run(["report", "--dir", str(tmp_path)]) == 0


def test_pipeline_chain(tmp_path, capsys):
    dom, cfgs, path, drv = (tmp_path / n for n in ("d.json", "c.bin", "p.csv", "w.csv"))
    assert run(["domain", "--width", "2", "--height", "1", "--mesh", "0.25", "--out", str(dom)]) == 0
    assert run(["sample", "--domain", str(dom), "--draws", "2", "--seed", "1", "--out", str(cfgs)]) == 0
    assert run(["explore", "--domain", str(dom), "--configs", str(cfgs), "--index", "1", "--out", str(path)]) == 0
    assert run(["drive", "--curve", str(path), "--out", str(drv)]) == 0
    lines = drv.read_text().splitlines()
    assert lines[0] == "t,W,V,theta"
    a = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]])
    assert np.all(np.diff(a[:, 0]) >= 0) and np.all(a[:, 3] >= -1e-9)
    assert run(["theta", "--curve", str(path), "--walkers", "2000", "--out", str(tmp_path / "th.json")]) == 0
    assert "value" in json.loads((tmp_path / "th.json").read_text())


def test_sle_command(tmp_path):
    out = tmp_path / "s.csv"
    assert run(["sle", "--T", "0.01", "--out", str(out)]) == 0
    assert out.read_text().splitlines()[0] == "t,W,V,theta"
