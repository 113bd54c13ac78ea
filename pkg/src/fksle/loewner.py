"""Chordal Loewner chains built from vertical slit maps.

Normalisation: g_t(z) = z + 2t/z + O(1/z^2). The elementary map that removes
a vertical slit of height y rooted at a is

    g(w) = a + sqrt((w - a)^2 + y^2),    capacity increment y^2 / 4,

with the square-root branch taking the upper half-plane to itself.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import ellipj, ellipk


class WeldError(ValueError):
    pass


@dataclass(eq=False)
class PlanarCurve:
    z: np.ndarray                 # complex points, z[0] real

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=complex)
        if len(self.z) == 0 or not np.all(np.isfinite(self.z)):
            raise ValueError("curve must be non-empty and finite")

    def __len__(self):
        return len(self.z)


@dataclass(eq=False)
class SlitChain:
    base: np.ndarray     # a_k
    height: np.ndarray   # y_k

    @property
    def dt(self):
        return self.height**2 / 4

    @property
    def capacity(self):
        return float(self.dt.sum())

    def apply(self, w):
        """g_t(w) for points in the closed upper half-plane outside the hull."""
        w = np.asarray(w, dtype=complex).copy()
        for a, y in zip(self.base, self.height):
            w = slit_map(w, a, y)
        return w

    def concat(self, other):
        return SlitChain(np.concatenate([self.base, other.base]), np.concatenate([self.height, other.height]))


@dataclass(eq=False)
class DriverRecord:
    times: np.ndarray
    W: np.ndarray
    V: np.ndarray
    index: np.ndarray = None      # curve point welded at each time (0 for t=0)
    meta: dict = field(default_factory=dict)

    @property
    def theta(self):
        return self.V - self.W

    def __len__(self):
        return len(self.times)

    def at(self, t, which="W"):
        """Linear interpolation of W, V or theta at time t."""
        arr = {"W": self.W, "V": self.V, "theta": self.theta}[which]
        return np.interp(t, self.times, arr)

    def truncate(self, t_max):
        k = int(np.searchsorted(self.times, t_max, side="right"))
        k = max(k, 1)
        return DriverRecord(self.times[:k], self.W[:k], self.V[:k],
                            None if self.index is None else self.index[:k], dict(self.meta))


def slit_map(w, a, y):
    u = np.asarray(w, dtype=complex) - a
    r = np.sqrt(u * u + y * y)
    flip = (r.imag < 0) | ((r.imag == 0) & (u.real < 0))
    return a + np.where(flip, -r, r)


def inverse_slit_map(z, a, y):
    u = np.asarray(z, dtype=complex) - a
    r = np.sqrt(u * u - y * y)
    flip = (r.imag < 0) | ((r.imag == 0) & (u.real < 0))
    return a + np.where(flip, -r, r)


def _real_map(x, a, y):
    u = x - a
    s = 1.0 if u >= 0 else -1.0
    return a + s * np.sqrt(u * u + y * y)


def extract_driving(curve, h_min=0.0, t_max=None, x0=None, abort_depth=None):
    """Zip the curve down one point at a time.

    h_min: points whose current image lies within h_min of the driver are
    merged into the next weld (downsampling to roughly uniform increments).
    x0: force point on the real line (None means the base point from the
    right, so V is the rightmost image of the hull).
    abort_depth: images further than this below the real line abort; smaller
    negative imaginary parts are clamped to zero.
    Returns (DriverRecord, SlitChain).
    """
    z = curve.z if isinstance(curve, PlanarCurve) else np.asarray(curve, dtype=complex)
    n = len(z)
    base = float(z[0].real)
    if abort_depth is None:
        abort_depth = max(h_min, 1e-9 * max(1.0, float(np.abs(z - base).max())))
    Z = z.copy()
    W = base
    R = base
    track = x0 is not None and x0 > base
    X = float(x0) if track else base
    times, Ws, Vs, idx, aa, yy = [0.0], [W], [X], [0], [], []
    t = 0.0
    i = 1
    clamped = 0
    while i < n:
        d = np.abs(Z[i:] - W)
        far = np.flatnonzero(d > max(h_min, 1e-13))
        if len(far) == 0:
            break
        j = i + int(far[0])
        a, y = float(Z[j].real), float(Z[j].imag)
        if y < 0:
            if y < -abort_depth:
                raise WeldError(f"point {j} lies below the welded hull (Im = {y:.3g})")
            y = 0.0
            clamped += 1
        if j + 1 < n:
            Z[j + 1:] = slit_map(Z[j + 1:], a, y)
        newR = max(_real_map(R, a, y), a + y)
        if track:
            if a >= X:
                track = False
            else:
                X = _real_map(X, a, y)
        R = newR
        t += y * y / 4
        W = a
        times.append(t)
        Ws.append(W)
        Vs.append(X if track else R)
        idx.append(j)
        aa.append(a)
        yy.append(y)
        i = j + 1
        if t_max is not None and t >= t_max:
            break
    rec = DriverRecord(np.array(times), np.array(Ws), np.array(Vs), np.array(idx),
                       {"h_min": h_min, "clamped": clamped, "welds": len(aa)})
    return rec, SlitChain(np.array(aa), np.array(yy))


def forward_solve(W, step, substeps=8):
    """Trace of the chain driven by samples W[k] at times k*step.

    Each interval is split into `substeps` vertical slits whose bases follow
    the linear interpolant of W at sub-interval midpoints. Returns the tips
    at t = 0, step, 2*step, ...
    """
    if step <= 0:
        raise ValueError("step must be positive")
    W = np.asarray(W, dtype=float)
    n = len(W) - 1
    if n <= 0:
        return PlanarCurve(W[:1].astype(complex))
    m = int(substeps)
    ts = (np.arange(n * m) + 0.5) / m            # in units of step
    c = np.interp(ts, np.arange(n + 1), W)
    y = 2 * np.sqrt(step / m)
    # tip k starts at the driver at the end of its last sub-step and is pulled back
    # through every elementary map up to that sub-step
    tips = np.array([c[(k + 1) * m - 1] for k in range(n)], dtype=complex)
    for j in range(n * m - 1, -1, -1):
        k0 = j // m
        tips[k0:] = inverse_slit_map(tips[k0:], c[j], y)
    return PlanarCurve(np.concatenate([[W[0] + 0j], tips]))


def track_force_point(chain, x0, base=0.0):
    """V_k: image of x0 under the chain, switching to the rightmost hull image once swallowed."""
    R = base
    track = x0 > base
    X = float(x0) if track else base
    out = [X]
    for a, y in zip(chain.base, chain.height):
        newR = max(_real_map(R, a, y), a + y)
        if track:
            if a >= X:
                track = False
            else:
                X = _real_map(X, a, y)
        R = newR
        out.append(X if track else R)
    return np.array(out)


def integrate_force_point(times, W, x0):
    """Integrate dV = 2 dt / (V - W) with the driver held piecewise linear (RK4 per interval)."""
    V = np.empty(len(times))
    V[0] = x0
    for k in range(len(times) - 1):
        h = times[k + 1] - times[k]
        w0, w1 = W[k], W[k + 1]
        v = V[k]

        def f(s, v):
            return 2.0 / (v - (w0 + (w1 - w0) * s / h))

        if h <= 0:
            V[k + 1] = v
            continue
        k1 = f(0, v)
        k2 = f(h / 2, v + h * k1 / 2)
        k3 = f(h / 2, v + h * k2 / 2)
        k4 = f(h, v + h * k3)
        V[k + 1] = v + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6
    return V


def hcap_of(curve):
    rec, chain = extract_driving(curve)
    return chain.capacity


def diam_check(record, curve):
    """diam(K_t) / (sqrt(t) + max_s |W_s - W_0|) at each record time (t > 0)."""
    z = curve.z if isinstance(curve, PlanarCurve) else np.asarray(curve, dtype=complex)
    out = []
    for k in range(1, len(record)):
        pts = z[: record.index[k] + 1]
        diam = np.abs(pts[:, None] - pts[None, :]).max() if len(pts) < 3000 else _diam_hull(pts)
        kt = np.sqrt(record.times[k]) + np.abs(record.W[: k + 1] - record.W[0]).max()
        out.append(diam / kt)
    return np.array(out)


def _diam_hull(pts):
    from scipy.spatial import ConvexHull
    xy = np.column_stack([pts.real, pts.imag])
    h = xy[ConvexHull(xy).vertices]
    return float(np.sqrt(((h[:, None] - h[None, :]) ** 2).sum(-1)).max())


# ---------------------------------------------------------------- domain maps

def _sn(u, m):
    """Jacobi sn for complex argument from real-argument values."""
    u = np.asarray(u, dtype=complex)
    s, c, d, _ = ellipj(u.real, m)
    s1, c1, d1, _ = ellipj(u.imag, 1 - m)
    den = c1**2 + m * s**2 * s1**2
    with np.errstate(divide="ignore", invalid="ignore"):
        return (s * d1 + 1j * c * d * s1 * c1) / den


class HalfPlaneMap:
    """Closed-form conformal map of an idealised domain onto H, a -> 0, target -> infinity.

    disk: Moebius map; rectangle: Jacobi sn followed by a real Moebius map;
    identity: translation of a to 0 (half-plane approximation with a
    truncation guard). The result is scaled so that |phi'(a)| = scale.
    """

    def __init__(self, domain, a="a", target="c", mode=None, scale=1.0):
        shape = domain.shape
        self.kind = mode or shape.get("kind")
        pa = complex(*domain.sites[domain.mark_site(a)]) * domain.mesh
        pc = complex(*domain.sites[domain.mark_site(target)]) * domain.mesh
        if self.kind == "disk":
            c0 = complex(*shape.get("center", (0, 0)))
            r = shape["radius"]
            self.a = c0 + r * (pa - c0) / abs(pa - c0)
            self.c = c0 + r * (pc - c0) / abs(pc - c0)
            # (z - a)/(z - c) has constant argument on the circle; rotate it onto the real line
            z3 = c0 + r * np.exp(1j * (np.angle(self.a - c0) + 0.5))
            if abs(z3 - self.c) < 1e-3 * r:
                z3 = c0 + r * np.exp(1j * (np.angle(self.a - c0) - 0.5))
            self._k = np.exp(-1j * np.angle((z3 - self.a) / (z3 - self.c)))
            if self._raw(c0).imag < 0:
                self._k = -self._k
            self.guard = None
        elif self.kind == "rectangle":
            w, h = shape["width"], shape["height"]
            o = complex(*shape.get("origin", (0, 0)))
            self.w, self.h, self.o = w, h, o
            self.m = brentq(lambda m: ellipk(1 - m) / ellipk(m) - 2 * h / w, 1e-15, 1 - 1e-15, xtol=1e-15)
            self.K = ellipk(self.m)
            self.a, self.c = pa, pc
            self._sa = complex(self._sn(pa)).real
            self._sc = complex(self._sn(pc))
            self.guard = None
        elif self.kind == "identity":
            self.a = pa
            self.c = pc
            w, h = shape.get("width", np.inf), shape.get("height", np.inf)
            self.guard = min(w, h) / 5
        else:
            raise ValueError(f"unsupported domain shape {self.kind!r}")
        self.scale = 1.0
        self.scale = scale / self.derivative_at_a()

    def _sn(self, z):
        u = (np.asarray(z, dtype=complex) - self.o - self.w / 2) * (2 * self.K / self.w)
        return _sn(u, self.m)

    def _raw(self, z):
        z = np.asarray(z, dtype=complex)
        if self.kind == "disk":
            with np.errstate(divide="ignore", invalid="ignore"):
                return self._k * (z - self.a) / (z - self.c)
        if self.kind == "rectangle":
            s = self._sn(z)
            if not np.isfinite(self._sc) or abs(self._sc) > 1e12:
                return s - self._sa
            sign = np.sign(self._sa - self._sc.real)
            with np.errstate(divide="ignore", invalid="ignore"):
                return sign * (s - self._sa) / (s - self._sc.real)
        return z - self.a

    def __call__(self, z):
        return self.scale * self._raw(z)

    def derivative_at_a(self):
        h = 1e-6 * max(1.0, abs(self.a))
        t = 1j * self.a / abs(self.a) if self.kind == "disk" and self.a != 0 else 1.0
        return abs(self(self.a + h * t) - self(self.a - h * t)) / (2 * h)


def map_domain_to_halfplane(domain, a, c, point, scale=1.0, mode=None):
    return HalfPlaneMap(domain, a, c, mode, scale)(point)


def path_to_halfplane(path, phi):
    """Image of a lattice path in H: first point put on the real line, small negative parts clamped."""
    z = phi(path.complex_points() if hasattr(path, "complex_points") else path)
    z = np.asarray(z, dtype=complex)
    z[0] = z[0].real
    z = z.real + 1j * np.maximum(z.imag, 0.0)
    return PlanarCurve(z)
