import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from fksle.fk import (DOBRUSHIN, FREE, WIRED, EdgeConfig, FKSampler, ModelParams, P_C2, connected, critical_p,
                      exact_law, integrated_autocorr, partition, weight)
from fksle.lattice import LatticeDomain, build_from_sites, build_rectangle


def one_edge():
    return build_from_sites([(0, 0), (1, 0)], 1.0, {"a": (0.0, 0.0), "b": (1.0, 0.0)})


def square():
    return build_rectangle(1, 1, 1.0, {"a": (0.0, 0.0), "b": (1.0, 0.0), "c": (1.0, 1.0)})


def chi2_p(domain, bc, params, n):
    configs, probs = exact_law(domain, bc, params)
    bits = FKSampler(domain, bc, params).draw_bits(n)
    index = {c.tobytes(): i for i, c in enumerate(configs)}
    counts = np.bincount([index[b.tobytes()] for b in bits], minlength=len(configs))
    if len(configs) == 1:
        return 1.0
    return stats.chisquare(counts, probs * n).pvalue


def test_critical_p():
    assert critical_p(2) == pytest.approx(0.585786437626905, abs=1e-15)
    assert critical_p(1) == 0.5
    assert critical_p(4) == pytest.approx(2 / 3, abs=1e-15)
    with pytest.raises(ValueError):
        critical_p(0.5)


def test_weight_examples():
    p, q = 0.3, 2.0
    prm = ModelParams(p=p, q=q)
    d = one_edge()
    assert weight(d, [True], FREE, prm) == pytest.approx(p * q)
    assert weight(d, [False], FREE, prm) == pytest.approx((1 - p) * q * q)
    assert weight(d, [True], WIRED, prm) == pytest.approx(p * q)
    assert weight(d, [False], WIRED, prm) == pytest.approx((1 - p) * q)
    iso = LatticeDomain(1.0, np.array([[0, 0], [2, 0], [4, 0]]), np.zeros((0, 2), dtype=np.int64),
                        np.array([0]), {"a": 0, "b": 0, "c": 0})
    assert weight(iso, np.zeros(0, dtype=bool), FREE, prm) == pytest.approx(q**3)
    with pytest.raises(ValueError):
        weight(d, [True, False], FREE, prm)


def test_one_edge_marginal():
    n = 100_000
    bits = FKSampler(one_edge(), FREE, ModelParams(seed=11)).draw_bits(n)[:, 0]
    target = P_C2 / (P_C2 + (1 - P_C2) * 2)
    assert target == pytest.approx(np.sqrt(2) - 1, abs=1e-12)
    assert abs(bits.mean() - target) < 3 * np.sqrt(target * (1 - target) / n)
    cfg = EdgeConfig(bits)
    assert np.all(cfg.bits ^ cfg.dual)


def test_four_cycle_chi2():
    assert chi2_p(square(), FREE, ModelParams(seed=5), 100_000) > 0.01


def test_dobrushin_single_outcome():
    # every edge of the unit square is a boundary edge: the law is a point mass
    configs, probs = exact_law(square(), DOBRUSHIN, ModelParams())
    assert len(configs) == 1 and probs[0] == 1.0
    bits = FKSampler(square(), DOBRUSHIN, ModelParams(seed=1)).draw_bits(200)
    assert np.all(bits == configs[0])


def test_high_p_wired():
    d = build_rectangle(2, 2, 1.0)
    bits = FKSampler(d, WIRED, ModelParams(p=0.99, seed=2)).draw_bits(2000)
    full = bits.all(axis=1).mean()
    configs, probs = exact_law(d, WIRED, ModelParams(p=0.99))
    assert probs[np.flatnonzero(configs.all(axis=1))[0]] == probs.max()
    assert full > 0.8


def test_connected_examples():
    d = build_rectangle(2, 2, 1.0)
    ones, zeros = np.ones(d.n_edges, bool), np.zeros(d.n_edges, bool)
    assert connected(d, ones, FREE, [0], [8])
    assert not connected(d, zeros, FREE, [0], [8])
    b = d.boundary_cycle
    assert connected(d, zeros, WIRED, [b[0]], [b[4]])


def test_determinism_and_streams():
    d = build_rectangle(3, 2, 1.0)
    a = FKSampler(d, FREE, ModelParams(seed=9, thin=3)).draw_bits(50)
    b = FKSampler(d, FREE, ModelParams(seed=9, thin=3)).draw_bits(50, chunk=7)
    c = FKSampler(d, FREE, ModelParams(seed=9, thin=3), replica=1).draw_bits(50)
    s = FKSampler(d, FREE, ModelParams(seed=9, thin=3))
    one_by_one = np.array([s.draw().bits for _ in range(50)])
    assert np.array_equal(a, b) and np.array_equal(a, one_by_one)
    assert not np.array_equal(a, c)


def test_connectivity_matches_configurations():
    d = build_rectangle(3, 3, 1.0)
    pairs = [(0, 15), (5, 10), (0, 3)]
    bc = DOBRUSHIN
    prm = ModelParams(seed=4, thin=2)
    bits = FKSampler(d, bc, prm).draw_bits(300)
    conn = FKSampler(d, bc, prm).connectivity(300, pairs)
    ref = np.array([[connected(d, x, bc, [u], [v]) for u, v in pairs] for x in bits])
    assert np.array_equal(conn, ref)


def test_fkg_wired_dominates_free():
    d = build_rectangle(4, 4, 1.0)
    centre = int(np.flatnonzero((d.sites[:, 0] == 2) & (d.sites[:, 1] == 2))[0])
    target = int(np.flatnonzero((d.sites[:, 0] == 2) & (d.sites[:, 1] == 1))[0])
    n = 4000
    pw = FKSampler(d, WIRED, ModelParams(seed=3)).connectivity(n, [(centre, target)]).mean()
    pf = FKSampler(d, FREE, ModelParams(seed=3)).connectivity(n, [(centre, target)]).mean()
    assert pw >= pf - 3 * np.sqrt((pw * (1 - pw) + pf * (1 - pf)) / n)


def test_partition_wiring():
    d = build_rectangle(2, 1, 1.0, {"a": (0.0, 0.0), "b": (2.0, 0.0), "c": (2.0, 1.0)})
    left = np.flatnonzero(d.sites[:, 0] == 0)
    right = np.flatnonzero(d.sites[:, 0] == 2)
    bc = partition(left, right)
    zeros = np.zeros(d.n_edges, bool)
    assert connected(d, zeros, bc, [left[0]], [left[1]])
    assert not connected(d, zeros, bc, [left[0]], [right[0]])


def test_diagnostics():
    s = FKSampler(build_rectangle(4, 4, 1.0), FREE, ModelParams(seed=0, warmup=50))
    s.draw_bits(100)
    diag = s.diagnostics()
    assert diag["sweeps"] == 50 + 100 * 5
    assert 0 < diag["mean_open_fraction"] < 1
    assert diag["tau_int"] >= 0.5
    assert integrated_autocorr(np.ones(10)) == 0.5


def test_rejects_non_integer_q():
    with pytest.raises(ValueError):
        FKSampler(square(), FREE, ModelParams(q=2.5))


@given(st.integers(0, 2**15 - 1), st.floats(0.05, 0.95), st.sampled_from(["free", "wired", "dobrushin"]))
def test_exact_law_consistency(mask, p, kind):
    d = build_rectangle(2, 1, 1.0, {"a": (1.0, 0.0), "b": (1.0, 1.0), "c": (0.0, 0.5)})
    bc = {"free": FREE, "wired": WIRED, "dobrushin": DOBRUSHIN}[kind]
    prm = ModelParams(p=p)
    configs, probs = exact_law(d, bc, prm)
    assert probs.sum() == pytest.approx(1.0)
    bits = np.array([(mask >> i) & 1 for i in range(d.n_edges)], dtype=bool)
    w = weight(d, bits, bc, prm)
    listed = any(np.array_equal(bits, c) for c in configs)
    assert (w > 0) == listed
    # flipping one edge changes the weight by p/(1-p) times a power of q in {-1, 0, 1}
    if w > 0:
        _, fixed = bc.resolve(d)
        free = np.flatnonzero(fixed < 0)
        if len(free):
            e = free[mask % len(free)]
            b2 = bits.copy()
            b2[e] = ~b2[e]
            r = weight(d, b2, bc, prm) / w
            base = p / (1 - p) if b2[e] else (1 - p) / p
            assert min(abs(np.log(r / base) - k * np.log(2)) for k in (-1, 0, 1)) < 1e-9
