"""Acceptance criteria 1-10 at their stated tolerances.

Each test records a PASS/FAIL line (printed in the terminal summary) before asserting.
The statistical experiments are long: run with `pytest tests/test_acceptance.py -v`.
"""
import numpy as np
import pytest
from scipy import stats

from fksle import store
from fksle.bessel import hitting_probability
from fksle.experiments import (exp_dobrushin_driver, exp_one_arm, exp_rsw, exp_theta_agreement, exp_wired_theta,
                               run_manifest)
from fksle.fk import DOBRUSHIN, FREE, WIRED, FKSampler, ModelParams, exact_law, partition
from fksle.harmonic import hcap_montecarlo
from fksle.lattice import build_from_sites
from fksle.loewner import extract_driving, forward_solve, hcap_of

# 1. FK exactness

GRAPHS = {
    "edge": [(0, 0), (1, 0)],
    "path": [(0, 0), (1, 0), (2, 0)],
    "corner": [(0, 0), (1, 0), (1, 1)],
    "square": [(0, 0), (1, 0), (0, 1), (1, 1)],
    "tee": [(0, 0), (1, 0), (2, 0), (1, 1), (1, 2)],
    "rect2x1": [(x, y) for x in range(3) for y in range(2)],
    "ell": [(0, 0), (1, 0), (2, 0), (0, 1), (1, 1), (2, 1), (0, 2), (1, 2)],
    "rect3x1": [(x, y) for x in range(4) for y in range(2)],
}


def _graph(sites):
    d = build_from_sites(sites, 1.0, {"a": (0.0, 0.0)})
    cyc = d.boundary_cycle
    b = d.sites[cyc[len(cyc) // 2]]
    return build_from_sites(sites, 1.0, {"a": (0.0, 0.0), "b": tuple(map(float, b))})


def _bcs(d):
    cyc = d.boundary_cycle
    return {"free": FREE, "wired": WIRED, "dobrushin": DOBRUSHIN,
            "partition": partition([cyc[0], cyc[len(cyc) // 2]])}


@pytest.mark.parametrize("name", list(GRAPHS))
def test_1_fk_exactness(name, criterion):
    d = _graph(GRAPHS[name])
    assert d.n_edges <= 10
    n = 100_000
    worst = 1.0
    for k, (label, bc) in enumerate(_bcs(d).items()):
        params = ModelParams(seed=100 + k)
        configs, probs = exact_law(d, bc, params)
        bits = FKSampler(d, bc, params).draw_bits(n)
        index = {c.tobytes(): i for i, c in enumerate(configs)}
        counts = np.bincount([index[b.tobytes()] for b in bits], minlength=len(configs))
        p = 1.0 if len(configs) == 1 else stats.chisquare(counts, probs * n).pvalue
        worst = min(worst, p)
    ok = worst > 0.01
    criterion(1, ok, f"{name}: min chi2 p={worst:.3g}")
    assert ok


# 2. Loewner round trip

def _lipschitz_driver(k, n):
    s = np.linspace(0, 1, n + 1)
    return 0.5 * np.sin((k + 1) * s) + 0.3 * s * (-1) ** k


def _roundtrip_error(k, n):
    W = _lipschitz_driver(k, n)
    rec, _ = extract_driving(forward_solve(W, 1 / n))
    return np.max(np.abs(rec.W - np.interp(rec.times, np.linspace(0, 1, n + 1), W)))


def test_2_loewner_roundtrip(criterion):
    e1 = np.array([_roundtrip_error(k, 100) for k in range(10)])
    e2 = np.array([_roundtrip_error(k, 200) for k in range(10)])
    ok = bool(np.all(e1 <= 0.05) and np.all(e2 / e1 <= 0.7))
    criterion(2, ok, f"max error {e1.max():.3g}, worst halving ratio {(e2 / e1).max():.3f}")
    assert ok


# 3. hcap laws

def _box(l, eps, n):
    return np.concatenate([-l + 1j * np.linspace(0, eps, 20), np.linspace(-l, l, n) + 1j * eps,
                           l + 1j * np.linspace(eps, 0, 20)[1:]])


def test_3_slit_hcap(criterion):
    err = max(abs(hcap_of(x + 1j * np.linspace(0, y, n)) - y * y / 4)
              for y in (0.1, 1.0, 3.0) for n in (2, 50, 1000) for x in (0.0, -0.7))
    ok = err <= 1e-6
    criterion(3, ok, f"slit |hcap - y^2/4| <= {err:.1e}")
    assert ok


@pytest.fixture(scope="module")
def flat_hull():
    l, eps = 1.0, 1e-3
    z = _box(l, eps, 16_000)
    return l, eps, hcap_of(z), hcap_montecarlo(z, walkers=20_000, seed=1)


@pytest.mark.xfail(strict=True, reason="the stated flat-hull constant l*eps/(2pi) is half the true capacity "
                                       "(see notes/decisions.md)")
def test_3_flat_hull_stated_bound(flat_hull, criterion):
    l, eps, h, _ = flat_hull
    bound = l * eps / (2 * np.pi)
    ok = h <= 1.05 * bound
    criterion(3, ok, f"flat hull hcap={h:.4g} vs stated bound l*eps/(2pi)={bound:.4g}")
    assert ok


def test_3_flat_hull_capacity(flat_hull):
    # both estimators agree with the thin-hull asymptotics l*eps/pi
    l, eps, h, (mc, se) = flat_hull
    target = l * eps / np.pi
    assert abs(h / target - 1) < 0.05
    assert abs(mc / target - 1) < 0.05


# 4. Bessel hitting law

@pytest.mark.parametrize("k,eps,M", [(0, 0.1, 1.0), (1, 0.05, 2.0), (2, 0.5, 1.0)])
def test_4_bessel_hitting(k, eps, M, criterion):
    p, se, _ = hitting_probability(1.5, eps, M, paths=100_000, seed=40 + k)
    target = np.sqrt(eps / M)
    ok = abs(p - target) <= 3 * se
    criterion(4, ok, f"(eps={eps}, M={M}) {p:.4f} vs {target:.4f} (se {se:.4f})")
    assert ok


# 5-9. statistical experiments at the stated sizes

def test_5_driver_variance(criterion):
    r = exp_dobrushin_driver(delta=1 / 64, samples=500, t_eval=(0.05, 0.1))
    ok = r["passed"]
    criterion(5, ok, f"kappa_hat/(16/3)={r['ratio']:.3f}, mean={r['mean'][0]:.3g}+-{r['mean_se'][0]:.2g}, "
                     f"excluded={r['excluded']}")
    assert ok


def test_6_boundary_angle(criterion):
    r = exp_wired_theta(delta=1 / 64)
    ok = r["passed"]
    criterion(6, ok, f"KS p={r['ks_p']:.3g}, independence p={r['independence_p']:.3g}, "
                     f"excursions={r['sweep'][0]['count']}, excluded={r['excluded']}")
    assert ok


def test_7_one_arm(criterion):
    r = exp_one_arm()
    ok = r["passed"]
    criterion(7, ok, f"slope={r['slope']:.4f}, 95% CI [{r['ci'][0]:.4f}, {r['ci'][1]:.4f}]")
    assert ok


def test_8_rsw(criterion):
    r = exp_rsw(samples=4000)
    ok = r["passed"]
    lo = min(row["p"] for row in r["table"])
    sd = ", ".join(f"n={s['n']}: {s['p_symmetric']:.3f}+-{s['se']:.3f}" for s in r["selfdual"])
    criterion(8, ok, f"min 2:1 crossing={lo:.3f}; symmetric 1:1 {sd}")
    assert ok


def test_9_theta_agreement(criterion):
    r = exp_theta_agreement(paths=20)
    ok = r["passed"]
    criterion(9, ok, f"{r['agree']}/20 paths agree")
    assert ok


# 10. determinism

SMALL = {
    "dobrushin_driver": {"delta": 0.125, "samples": 6, "chains": 2, "t_eval": [0.02, 0.04], "h_min": 1.0},
    "wired_theta": {"delta": 0.0625, "eps_factors": [10], "samples": 4, "chains": 2, "synthetic_runs": 10,
                    "n_perm": 19, "horizon": 0.5},
    "one_arm": {"sizes": [8, 16], "draws": 40, "batches": 4, "boot": 20},
    "rsw": {"deltas": [0.125], "samples": 40, "selfdual_sizes": [8]},
    "c2_statistic": {"delta": 0.0625, "samples": 6, "chains": 2, "ratios": [2, 4]},
    "theta_agreement": {"delta": 0.0625, "paths": 2, "t_star": 0.2, "walkers": 2000},
}


def test_10_determinism(tmp_path, criterion):
    bad = []
    for name, params in SMALL.items():
        m = {"experiment": name, "params": params, "seed": 7}
        run_manifest(m, tmp_path / name / "a")
        run_manifest(m, tmp_path / name / "b")
        ha = store.read_json(tmp_path / name / "a" / "manifest.json")["outputs"]
        hb = store.read_json(tmp_path / name / "b" / "manifest.json")["outputs"]
        if ha != hb:
            bad.append(name)
    ok = not bad
    criterion(10, ok, f"{len(SMALL) - len(bad)}/{len(SMALL)} manifests reproduce their hashes")
    assert ok
