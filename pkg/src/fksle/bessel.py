"""Bessel processes, SLE_kappa(rho) drivers and the epsilon-excursion decomposition."""
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ive

from .rng import stream


def default_zero_tol(dt):
    return max(np.sqrt(dt) / 10, 1e-12)


@dataclass
class BesselPath:
    d: float
    x0: float
    dt: float
    X: np.ndarray          # (n+1,) or (paths, n+1)
    scheme: str = "exact_besq"

    @property
    def t(self):
        return self.dt * np.arange(self.X.shape[-1])

    def to_rows(self):
        return np.column_stack([self.t, self.X])


def _besq_step(z, d, dt, rng):
    # Z' = dt * noncentral chi^2(d, z / dt), exact for the squared Bessel process
    return dt * rng.noncentral_chisquare(d, np.maximum(z, 0.0) / dt)


def simulate_bessel(d, x0, dt, T, seed=0, scheme="exact_besq", paths=None, replica=0):
    """Bessel process of dimension d on a uniform grid; paths=None gives one path."""
    if d <= 0:
        raise ValueError("dimension must be positive")
    if dt <= 0 or T <= 0:
        raise ValueError("dt and T must be positive")
    if x0 < 0:
        raise ValueError("x0 must be non-negative")
    n = int(round(T / dt))
    m = 1 if paths is None else int(paths)
    rng = stream(seed, "bessel", replica)
    X = np.empty((m, n + 1))
    X[:, 0] = x0
    if scheme == "exact_besq":
        z = np.full(m, float(x0) ** 2)
        for k in range(1, n + 1):
            z = _besq_step(z, d, dt, rng)
            X[:, k] = np.sqrt(z)
    elif scheme == "euler":
        # X' = X + (d-1)/2 dt / X + dB, with the drift capped near 0 and reflection at 0
        x = np.full(m, float(x0))
        floor = np.sqrt(dt)
        for k in range(1, n + 1):
            x = np.abs(x + 0.5 * (d - 1) * dt / np.maximum(x, floor) + np.sqrt(dt) * rng.standard_normal(m))
            X[:, k] = x
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return BesselPath(d, float(x0), float(dt), X[0] if paths is None else X, scheme)


def hitting_probability(d, eps, M, paths=100_000, seed=0, c=0.04, lo=1e-3, hi=1e-3):
    """P_eps[X reaches M before 0] for a Bessel process, with standard error.

    Exact squared-Bessel transitions with state-dependent steps dt = c * min(X, M - X)^2,
    so an unseen passage across 0 or M between steps has probability O(exp(-1 / 2c)).
    Paths that enter the thin shells X < lo * eps or X > (1 - hi) * M are stopped and
    contribute the conditional value (X / M)^(2 - d) there.
    """
    if not 0 < eps < M:
        raise ValueError("need 0 < eps < M")
    rng = stream(seed, "hitting", 0)
    x = np.full(paths, float(eps))
    val = np.zeros(paths)
    act = np.arange(paths)
    steps = 0
    while len(act):
        xa = x[act]
        dt = c * np.minimum(xa, M - xa) ** 2
        xa = np.sqrt(_besq_step(xa * xa, d, dt, rng))
        x[act] = xa
        stop = (xa < lo * eps) | (xa > (1 - hi) * M)
        val[act[stop]] = np.minimum(xa[stop] / M, 1.0) ** (2 - d)
        act = act[~stop]
        steps += 1
    return float(val.mean()), float(val.std(ddof=1) / np.sqrt(paths)), steps


def bridge_zero_probability(x, y, dt, d):
    """P[a Bessel(d) bridge from x to y over dt touches 0], for 0 < d < 2.

    Paths killed at 0 have density ratio I_{-nu} / I_nu (nu = d/2 - 1) against the
    reflecting process.
    """
    nu = d / 2 - 1
    u = np.asarray(x, dtype=float) * np.asarray(y, dtype=float) / dt
    with np.errstate(divide="ignore", invalid="ignore"):
        r = ive(-nu, u) / ive(nu, u)
    return np.where(u > 0, np.clip(1 - r, 0.0, 1.0), 1.0)


def zero_touches(X, dt, d, seed=0, replica=0):
    """Boolean per grid interval: did the path touch 0 inside it (sampled from the bridge law)."""
    X = np.asarray(X, dtype=float)
    if d >= 2:
        return np.zeros(X.shape[-1] - 1, dtype=bool)
    p = bridge_zero_probability(X[..., :-1], X[..., 1:], dt, d)
    return stream(seed, "bridge", replica).random(p.shape) < p


@dataclass
class ExcursionSet:
    epsilon: float
    zero_tol: float
    T: np.ndarray            # first exceedance indices
    S: np.ndarray            # following zero indices; len(S) is len(T) or len(T) - 1

    def __len__(self):
        return len(self.T)

    def segments(self, X):
        out = []
        for k, t in enumerate(self.T):
            s = self.S[k] if k < len(self.S) else len(X) - 1
            out.append(X[t:s + 1])
        return out

    def complete(self):
        return len(self.S)


def stopping_times(X, eps, zero_tol=None):
    """Alternating first passages: T_k first index with X >= eps after S_{k-1}, S_k first zero after T_k."""
    X = np.asarray(getattr(X, "X", X), dtype=float)
    if zero_tol is None:
        zero_tol = 1e-12
    if not eps > zero_tol > 0:
        raise ValueError("need eps > zero_tol > 0")
    up = np.flatnonzero(X >= eps)
    down = np.flatnonzero(X <= zero_tol)
    T, S = [], []
    i = 0
    while True:
        j = np.searchsorted(up, i)
        if j == len(up):
            break
        t = int(up[j])
        T.append(t)
        j = np.searchsorted(down, t + 1)
        if j == len(down):
            break
        s = int(down[j])
        S.append(s)
        i = s + 1
    return ExcursionSet(float(eps), float(zero_tol), np.array(T, dtype=np.int64), np.array(S, dtype=np.int64))


@dataclass
class SleDriver:
    kappa: float
    rho: float
    x0: float
    t: np.ndarray
    W: np.ndarray
    V: np.ndarray
    zero_tol: float
    flagged: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def theta(self):
        return self.V - self.W

    def to_rows(self):
        return np.column_stack([self.t, self.W, self.V, self.theta])


def bessel_dimension(kappa, rho):
    return 1 + 2 * (rho + 2) / kappa


def sle_driver(kappa, rho, x0, dt, T, seed=0, scheme="exact_besq", replica=0):
    """SLE_kappa(rho) driver with force point x0 (x0 = 0 means 0+)."""
    if kappa <= 0 or rho <= -2 or x0 < 0:
        raise ValueError("need kappa > 0, rho > -2, x0 >= 0")
    d = bessel_dimension(kappa, rho)
    path = simulate_bessel(d, x0 / np.sqrt(kappa), dt, T, seed=seed, scheme=scheme, replica=replica)
    theta = np.sqrt(kappa) * path.X
    zt = default_zero_tol(dt)
    small = theta < zt
    f = 2 / np.maximum(theta, zt)
    # the start at 0+ is the expected singularity; only later near-zeros flag the path
    flagged = bool(small[1:].any())
    if x0 == 0:
        # theta ~ c sqrt(s) on the first step: the integral of 2 / theta over it is 2 * 2 dt / theta_1
        f0 = 4 * dt / max(theta[1], zt)
        inc = np.concatenate([[f0], 0.5 * (f[1:-1] + f[2:]) * dt])
    else:
        inc = 0.5 * (f[:-1] + f[1:]) * dt
    V = x0 + np.concatenate([[0.0], np.cumsum(inc)])
    W = V - theta
    return SleDriver(kappa, rho, x0, path.t, W, V, zt, flagged,
                     {"d": d, "scheme": scheme, "dt": dt, "near_zero_steps": int(small[1:].sum())})


def splice_coupling(base, donor, eps, zero_tol=None):
    """Copy base on [S_k, T_{k+1}] and donor excursions on [T_k, S_k].

    Returns (spliced X, info) where info reports the time displacement between
    matched donor excursions in the spliced and donor clocks, and the bound
    A_eps(t) + A~_eps(t) (grid time spent at or below eps by base and donor).
    """
    xb = np.asarray(getattr(base, "X", base), dtype=float)
    xd = np.asarray(getattr(donor, "X", donor), dtype=float)
    dtb, dtd = getattr(base, "dt", None), getattr(donor, "dt", None)
    if xb.shape != xd.shape or (dtb is not None and dtd is not None and dtb != dtd):
        raise ValueError("base and donor must share the grid")
    dt = dtb or dtd or 1.0
    n = len(xb)
    if zero_tol is None:
        zero_tol = default_zero_tol(dt)
    eb = stopping_times(xb, eps, zero_tol)
    ed = stopping_times(xd, eps, zero_tol)
    out = []
    disp = 0.0
    pos_b, low_b, low_d = 0, 0, 0
    prev_sd = 0
    matched = 0
    for k in range(len(eb.T)):
        # base low part [S_{k-1}, T_k)
        out.append(xb[pos_b:eb.T[k]])
        low_b += eb.T[k] - pos_b
        if k >= ed.complete() or len(out) and sum(map(len, out)) >= n:
            break
        out.append(xd[ed.T[k]:ed.S[k]])
        low_d += ed.T[k] - prev_sd
        prev_sd = ed.S[k]
        disp = abs(low_b - low_d) * dt
        matched += 1
        if k >= eb.complete():
            pos_b = n
            break
        pos_b = eb.S[k]
    if pos_b < n:
        out.append(xb[pos_b:])
    y = np.concatenate(out)[:n] if out else xb.copy()
    if len(y) < n:
        y = np.concatenate([y, xb[len(y):]])
    A = float((xb <= eps).sum() * dt)
    At = float((xd <= eps).sum() * dt)
    return y, {"displacement": disp, "bound": A + At, "matched": matched,
               "A_base": A, "A_donor": At}
