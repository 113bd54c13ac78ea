import numpy as np
import pytest
from hypothesis import given, strategies as st

from fksle.excursions import (discrete_driver_identity, discrete_stopping_times, distance_correlation,
                              excursion_statistics, hits_to_times, hitting_curve, ks_maxima,
                              permutation_test, synthetic_records)
from fksle.loewner import DriverRecord, extract_driving

DELTA = 1e-6  # 10 sqrt(delta) = 0.01


def record(theta, t=None):
    theta = np.asarray(theta, dtype=float)
    t = np.linspace(0, 0.1 * (len(theta) - 1), len(theta)) if t is None else t
    return DriverRecord(t, np.zeros_like(theta), theta, np.arange(len(theta)))


def test_start_above_threshold():
    ex = discrete_stopping_times(record([0.2, 0.05, 0.3]), [], 0.1, DELTA)
    assert list(ex.T) == [0] and len(ex.S) == 0


def test_never_exceeds():
    ex = discrete_stopping_times(record([0, 0.05, 0.02]), [0.1], 0.1, DELTA)
    assert len(ex) == 0


def test_synthetic_example():
    th = [0, 0.02, 0.05, 0.15, 0.2, 0.01, 0.0]
    rec = record(th)
    ex = discrete_stopping_times(rec, [0.1, 0.5], 0.1, DELTA)
    assert np.allclose(rec.times[ex.T], [0.3]) and np.allclose(rec.times[ex.S], [0.5])
    f = ex.features()
    assert f["max"][0] == pytest.approx(0.2) and f["duration"][0] == pytest.approx(0.2)
    assert f["complete"][0] == 1


def test_input_validation():
    with pytest.raises(ValueError):
        discrete_stopping_times(record([0, 1]), [], 0.005, DELTA)
    with pytest.raises(ValueError):
        discrete_stopping_times(record([0, 1]), [0.5, 0.1], 0.1, DELTA)


@given(st.integers(0, 10_000), st.floats(0.02, 0.3), st.floats(0.02, 0.3))
def test_first_exceedance_monotone_in_epsilon(seed, e1, e2):
    rng = np.random.default_rng(seed)
    th = np.abs(np.cumsum(rng.normal(0, 0.05, 200)))
    lo, hi = sorted((e1, e2))
    a = discrete_stopping_times(record(th), [], lo, DELTA)
    b = discrete_stopping_times(record(th), [], hi, DELTA)
    if len(b):
        assert len(a) and a.T[0] <= b.T[0]


def test_driver_identity_slit():
    rec, _ = extract_driving(1j * np.linspace(0, 1, 400))
    res = discrete_driver_identity(rec, 0.2)
    assert res["segments"] == 1 and res["residual"] < 1e-2
    bad = DriverRecord(rec.times, rec.W.copy(), rec.V.copy(), rec.index)
    k = len(rec.times) // 2
    bad.W[k:] += 0.1
    bad.V[k:] += 0.1
    assert discrete_driver_identity(bad, 0.2)["residual"] == pytest.approx(0.1, abs=1e-2)


def test_driver_identity_two_runs():
    t = np.linspace(0, 2, 2001)
    th = np.where(t < 1, 1.0, 0.01)
    th[t > 1.5] = 2.0
    V = np.concatenate([[0], np.cumsum(0.5 * (2 / th[:-1] + 2 / th[1:]) * np.diff(t))])
    rec = DriverRecord(t, V - th, V, np.arange(len(t)))
    res = discrete_driver_identity(rec, 0.5)
    assert res["segments"] == 2 and res["residual"] < 1e-9


def test_hits_to_times_nearest_not_earlier():
    rec = DriverRecord(np.array([0.0, 0.1, 0.2, 0.3]), np.zeros(4), np.zeros(4), np.array([0, 2, 5, 9]))
    assert np.allclose(hits_to_times(rec, [1, 5, 10]), [0.1, 0.2])
    assert len(hits_to_times(rec, [])) == 0


def test_distance_correlation_detects_dependence():
    rng = np.random.default_rng(0)
    x = rng.normal(size=80)
    _, p_ind = permutation_test(x, rng.normal(size=80), n_perm=199, seed=1)
    _, p_dep = permutation_test(x, x**2, n_perm=199, seed=1)
    assert p_ind > 0.01 and p_dep < 0.01
    assert distance_correlation(x, x) == pytest.approx(1.0)


def test_hitting_curve_formula():
    out = hitting_curve(np.array([1.0, 0.1, 0.5, 2.0]), np.full(4, 0.1), [0.4])
    assert out[0]["empirical"] == 0.75
    assert out[0]["predicted"] == pytest.approx(0.5)
    # an excursion cut by the horizon at 0.1 below M = 0.4 scores sqrt(0.1 / 0.4)
    out = hitting_curve(np.array([1.0, 0.2]), np.full(2, 0.1), [0.4], terminals=np.array([0.0, 0.1]))
    assert out[0]["empirical"] == pytest.approx(0.75)


def test_synthetic_hitting_curve():
    eps = 0.1
    recs = synthetic_records(16 / 3, eps, 1e-6, 1e-4, 1.0, runs=40, seed=3)
    st_ = excursion_statistics(recs, M=[0.2, 0.4], n_perm=99)
    assert st_["count"] > 0
    for row in st_["hitting"]:
        assert abs(row["empirical"] - row["predicted"]) <= 3 * row["stderr"]
    d, p = ks_maxima(st_["features"]["max"], st_["features"]["max"])
    assert d == 0 and p == 1
