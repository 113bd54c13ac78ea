import json

import pytest

from fksle import store
from fksle.experiments import (RunManifest, exp_c2_statistic, exp_dobrushin_driver, exp_one_arm, exp_rsw,
                               exp_theta_agreement, exp_wired_theta, run_manifest)


def test_manifest_validation():
    with pytest.raises(ValueError):
        RunManifest.from_json({"experiment": "rsw", "colour": 1})
    with pytest.raises(ValueError):
        RunManifest.from_json({"experiment": "rsw", "version": 9})
    with pytest.raises(ValueError):
        RunManifest.from_json({"experiment": "nope"})
    m = RunManifest.from_json({"experiment": "rsw", "params": {"samples": 5}, "seed": 3})
    assert RunManifest.from_json(json.loads(json.dumps(m.to_json()))) == m


def test_rerun_is_byte_identical(tmp_path):
    m = {"experiment": "one_arm", "params": {"sizes": [8, 16], "draws": 40, "batches": 4, "boot": 20}, "seed": 1}
    run_manifest(m, tmp_path / "a")
    run_manifest(m, tmp_path / "b")
    ha = store.read_json(tmp_path / "a" / "manifest.json")["outputs"]
    hb = store.read_json(tmp_path / "b" / "manifest.json")["outputs"]
    assert ha == hb and "report.json" in ha


def test_dobrushin_smoke():
    r = exp_dobrushin_driver(delta=1 / 8, samples=12, chains=2, t_eval=(0.02, 0.04), h_min=1.0)
    assert r["n"] + r["excluded"] == 12
    assert len(r["kappa_hat"]) == 2


def test_wired_smoke():
    r = exp_wired_theta(delta=1 / 16, eps_factors=(10,), samples=6, chains=2, synthetic_runs=10, n_perm=19,
                        horizon=0.5)
    assert r["n"] + r["excluded"] == 6
    assert r["sweep"][0]["factor"] == 10


def test_one_arm_smoke():
    r = exp_one_arm(sizes=(8, 16, 32), draws=40, batches=4, boot=20)
    assert len(r["P"]) == 3 and all(0 <= p <= 1 for p in r["P"])
    assert 32 in r["quasi_multiplicativity"]


def test_rsw_smoke():
    r = exp_rsw(deltas=(1 / 8,), samples=40, selfdual_sizes=(8,))
    assert {row["bc"] for row in r["table"]} == {"free", "wired"}
    assert r["nested"]["contained"]


def test_c2_smoke():
    r = exp_c2_statistic(delta=1 / 16, samples=8, chains=2, ratios=(2, 4))
    assert r["forced_crossing"] == 1.0
    assert len(r["table"]) == 2


def test_theta_agreement_smoke():
    r = exp_theta_agreement(delta=1 / 16, paths=2, t_star=0.2, walkers=2000)
    assert len(r["rows"]) == 2
    assert all(row["theta_conformal"] >= 0 for row in r["rows"])
