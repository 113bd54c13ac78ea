"""Epsilon-excursions of the discrete boundary angle theta^n and their statistics."""
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .bessel import bessel_dimension, sle_driver, zero_touches
from .loewner import DriverRecord


def hits_to_times(record, steps):
    """Map path steps to capacity times: the first weld at or after each step (nearest not earlier)."""
    steps = np.sort(np.asarray(steps, dtype=np.int64))
    if record.index is None or len(steps) == 0:
        return np.empty(0)
    k = np.searchsorted(record.index, steps, side="left")
    k = k[k < len(record.times)]
    return np.unique(record.times[k])


@dataclass
class DiscreteExcursionRecord:
    epsilon: float
    delta: float
    driver: DriverRecord
    hit_times: np.ndarray
    T: np.ndarray              # driver indices of first exceedances
    S: np.ndarray              # driver indices of the following boundary hits
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.T)

    def segment(self, k):
        end = self.S[k] if k < len(self.S) else len(self.driver) - 1
        return slice(int(self.T[k]), int(end) + 1)

    def features(self, window=None):
        """Per-excursion features as a dict of arrays.

        max, duration, start, terminal, complete: over [T_k, S_k] (or to the horizon).
        wmax, wdur, wok: the same restricted to [T_k, T_k + window]; wok marks
        windows that end before the horizon, so they are free of censoring.
        T, pre_w, pre_theta: history before T_k (time, max |W - W_0|, mean theta). k: index.
        """
        th, t, W = self.driver.theta, self.driver.times, self.driver.W
        if window is None:
            window = 0.25 * t[-1]
        rows = []
        prev = 0
        for k in range(len(self.T)):
            sl = self.segment(k)
            seg = th[sl]
            Tk = int(self.T[k])
            end = sl.stop - 1
            w_end = min(end, int(np.searchsorted(t, t[Tk] + window, side="right")) - 1)
            pre_w = np.abs(W[prev:Tk + 1] - W[0]).max() if Tk >= prev else 0.0
            rows.append((seg.max(), t[end] - t[Tk], th[Tk], seg[-1], k < len(self.S),
                         th[Tk:w_end + 1].max(), t[w_end] - t[Tk], t[Tk] + window <= t[-1],
                         t[Tk], pre_w, th[:Tk + 1].mean(), k))
            prev = end
        names = ["max", "duration", "start", "terminal", "complete", "wmax", "wdur", "wok",
                 "T", "pre_w", "pre_theta", "k"]
        arr = np.array(rows, dtype=float).reshape(-1, len(names))
        return {n: arr[:, i] for i, n in enumerate(names)}


def discrete_stopping_times(driver, hits, eps, delta):
    """T_k: first time after S_{k-1} with theta >= eps (T_1 = 0 if theta(0) >= eps).
    S_k: first boundary-hit time after T_k."""
    if eps < 10 * np.sqrt(delta):
        raise ValueError(f"epsilon {eps} below 10*sqrt(delta) = {10 * np.sqrt(delta):.4g}")
    hits = np.asarray(hits, dtype=float)
    if np.any(np.diff(hits) < 0):
        raise ValueError("hit times must be sorted")
    th, t = driver.theta, driver.times
    up = np.flatnonzero(th >= eps)
    T, S = [], []
    i = 0
    while True:
        j = np.searchsorted(up, i)
        if j == len(up):
            break
        tk = int(up[j])
        T.append(tk)
        h = np.searchsorted(hits, t[tk], side="right")
        if h == len(hits):
            break
        s = int(np.searchsorted(t, hits[h], side="left"))
        if s >= len(t):
            break
        S.append(s)
        i = s + 1
    return DiscreteExcursionRecord(float(eps), float(delta), driver, hits,
                                   np.array(T, dtype=np.int64), np.array(S, dtype=np.int64))


def _runs(mask):
    d = np.diff(np.concatenate([[0], mask.astype(np.int8), [0]]))
    return list(zip(np.flatnonzero(d == 1), np.flatnonzero(d == -1)))


def discrete_driver_identity(record, eps):
    """sup |V(t) - V(t0) - int_{t0}^t 2 / theta| over runs where theta >= eps / 2.

    Each run is anchored at its first point; the integral is the trapezoid rule
    on the record's own times. Returns dict(residual, step, segments).
    """
    rec = getattr(record, "driver", record)
    th, t, V = rec.theta, rec.times, rec.V
    worst, step, nseg = 0.0, 0.0, 0
    for a, b in _runs(th >= eps / 2):
        if b - a < 2:
            continue
        nseg += 1
        f = 2 / th[a:b]
        dt = np.diff(t[a:b])
        I = np.concatenate([[0.0], np.cumsum(0.5 * (f[:-1] + f[1:]) * dt)])
        worst = max(worst, float(np.abs(V[a:b] - V[a] - I).max()))
        step = max(step, float(dt.max()))
    return {"residual": worst, "step": step, "segments": nseg}


def distance_correlation(x, y):
    x = np.asarray(x, dtype=float).reshape(len(x), -1)
    y = np.asarray(y, dtype=float).reshape(len(y), -1)

    def centred(z):
        d = np.sqrt(((z[:, None, :] - z[None, :, :]) ** 2).sum(-1))
        return d - d.mean(0) - d.mean(1)[:, None] + d.mean()

    A, B = centred(x), centred(y)
    dxy = (A * B).mean()
    dxx, dyy = (A * A).mean(), (B * B).mean()
    if dxx <= 0 or dyy <= 0:
        return 0.0
    return float(np.sqrt(max(dxy, 0.0) / np.sqrt(dxx * dyy)))


def permutation_test(x, y, n_perm=999, seed=0):
    """Distance correlation with a permutation p-value."""
    rng = np.random.default_rng(seed)
    obs = distance_correlation(x, y)
    y = np.asarray(y)
    ge = sum(distance_correlation(x, y[rng.permutation(len(y))]) >= obs for _ in range(n_perm))
    return obs, (ge + 1) / (n_perm + 1)


def hitting_curve(maxima, starts, M, exponent=0.5, zero=0.0, terminals=None):
    """Empirical P[max >= M] against the scale-function prediction averaged over start values.

    With terminals (theta at the end of each excursion, 0 when it returned), an
    excursion cut by the horizon below M scores its conditional hitting probability
    (terminal / M)^exponent, which keeps the estimate unbiased under censoring.
    """
    maxima, starts = np.asarray(maxima), np.asarray(starts)
    out = []
    if len(maxima) == 0:
        return out
    for m in np.atleast_1d(M):
        if terminals is None:
            v = (maxima >= m).astype(float)
        else:
            v = np.where(maxima >= m, 1.0, np.clip(np.asarray(terminals) / m, 0.0, 1.0) ** exponent)
        emp = float(v.mean())
        s = np.minimum(starts, m)
        pred = (s**exponent - zero**exponent) / (m**exponent - zero**exponent)
        se = v.std(ddof=1) / np.sqrt(len(v)) if len(v) > 1 else np.sqrt(max(emp * (1 - emp), 1e-12))
        out.append({"M": float(m), "empirical": emp, "predicted": float(pred.mean()),
                    "stderr": float(max(se, 1e-12))})
    return out


def excursion_statistics(records, M=None, n_perm=999, seed=0, exponent=0.5, min_count=30):
    """Features, hitting curve and independence diagnostics pooled over records.

    records: DiscreteExcursionRecords or feature dicts.
    """
    feats = [r.features() if hasattr(r, "features") else r for r in records]
    keys = feats[0].keys() if feats else []
    pool = {k: np.concatenate([f[k] for f in feats]) if feats else np.empty(0) for k in keys}
    n = len(pool.get("max", []))
    out = {"count": n, "partial": n < min_count}
    if n == 0:
        return out
    done = pool["complete"] > 0
    eps = float(np.min(pool["start"]))
    if M is None:
        M = eps * np.array([2.0, 4.0, 8.0])
    term = np.where(done, 0.0, pool["terminal"])
    out["hitting"] = hitting_curve(pool["max"], pool["start"], M, exponent, terminals=term)
    out["complete"] = int(done.sum())
    # first excursion against the history before T_1, on uncensored windows
    sel = (pool["k"] == 0) & (pool["wok"] > 0)
    if n >= 5:
        pre = np.column_stack([pool["T"], pool["pre_w"]])[sel]
        exc = np.column_stack([pool["wmax"], pool["wdur"]])[sel]
        if len(pre) >= 5:
            r, p = permutation_test(pre, exc, n_perm, seed)
            out["independence"] = {"dcor": r, "p": p, "n": int(len(pre))}
    out["features"] = {k: v.tolist() for k, v in pool.items()}
    return out


def ks_maxima(fk_maxima, synthetic_maxima):
    res = stats.ks_2samp(fk_maxima, synthetic_maxima)
    return float(res.statistic), float(res.pvalue)


def synthetic_records(kappa, eps, delta, dt, T, runs, seed=0, rho=None):
    """Excursion records of SLE_kappa(rho) drivers from 0+, processed like lattice data.

    The boundary hits are the grid intervals in which theta touches 0, sampled
    from the Bessel bridge law and reported at the interval's right end.
    """
    rho = kappa - 6 if rho is None else rho
    d = bessel_dimension(kappa, rho)
    out = []
    for r in range(runs):
        sd = sle_driver(kappa, rho, 0.0, dt, T, seed=seed, replica=r)
        touch = zero_touches(sd.theta / np.sqrt(kappa), dt, d, seed=seed, replica=r)
        rec = DriverRecord(sd.t, sd.W, sd.V, np.arange(len(sd.t)), {"synthetic": True})
        out.append(discrete_stopping_times(rec, sd.t[1:][touch], eps, delta))
    return out
