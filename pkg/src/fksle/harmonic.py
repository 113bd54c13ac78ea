"""Renormalised harmonic measure seen from infinity in H minus a curve.

RHM(A) = lim_y pi * y * P^{iy}[B_tau in A], so that RHM([0, L]) = L.

The Monte Carlo estimator launches Brownian motion from i*y. Its first
passage to a horizontal line above the hull is Cauchy distributed, which is
sampled by importance weighting; walk-on-spheres then runs to within `eps`
of the real line or of the curve, and the absorption point is classified by
side of the nearest curve segment.
"""
import numpy as np
from scipy.spatial import cKDTree

from .rng import stream


def rhm_interval(L):
    if L < 0:
        raise ValueError("L must be non-negative")
    return float(L)


def theta_conformal(record):
    return record.V - record.W


class _Hull:
    """Polyline with a KD-tree over segment midpoints for distance queries."""

    def __init__(self, z, max_seg):
        z = np.asarray(z, dtype=complex)
        pts = [z[:1]]
        for p, q in zip(z[:-1], z[1:]):
            k = max(1, int(np.ceil(abs(q - p) / max_seg)))
            pts.append(p + (q - p) * np.arange(1, k + 1) / k)
        z = np.concatenate(pts)
        self.p = z[:-1]
        self.d = z[1:] - z[:-1]
        keep = np.abs(self.d) > 0
        self.p, self.d = self.p[keep], self.d[keep]
        self.half = float(np.abs(self.d).max()) / 2 if len(self.d) else 0.0
        mid = self.p + self.d / 2
        self.tree = cKDTree(np.column_stack([mid.real, mid.imag])) if len(mid) else None

    def query(self, w, k=8):
        """Distance to the polyline (lower bound beyond the k nearest) and the nearest segment."""
        k = min(k, len(self.p))
        dd, ii = self.tree.query(np.column_stack([w.real, w.imag]), k=k)
        dd = dd.reshape(len(w), k)
        ii = ii.reshape(len(w), k)
        p, d = self.p[ii], self.d[ii]
        s = np.clip(((w[:, None] - p) * np.conj(d)).real / np.abs(d) ** 2, 0, 1)
        exact = np.abs(w[:, None] - (p + s * d))
        j = np.argmin(exact, axis=1)
        best = exact[np.arange(len(w)), j]
        if k < len(self.p):
            # segments beyond the k nearest midpoints are at least this far away
            best = np.minimum(best, np.maximum(dd[:, -1] - self.half, 0.0))
        return best, ii[np.arange(len(w)), j]

    def side(self, w, seg):
        # > 0 on the left of the oriented curve
        return ((w - self.p[seg]) * np.conj(self.d[seg])).imag


def _walk(hull, starts, eps, far, rng, max_steps=10_000):
    """Walk-on-spheres from each start. Returns (end points, kind, segment).

    kind: 0 real line, 1 left of curve, 2 right of curve, 3 escaped past `far`.
    """
    n = len(starts)
    z = starts.astype(complex).copy()
    kind = -np.ones(n, dtype=np.int64)
    seg = -np.ones(n, dtype=np.int64)
    top = 0.0
    if hull is not None:
        top = max(float((hull.p.imag).max()), float((hull.p + hull.d).imag.max())) * 1.05 + eps
    act = np.arange(n)
    for _ in range(max_steps):
        if len(act) == 0:
            break
        w = z[act]
        # exact passage to the line Im = top for walkers above it
        hi = w.imag > top
        if hull is not None and hi.any():
            y = w.imag[hi] - top
            w[hi] = w.real[hi] + y * np.tan(np.pi * (rng.random(int(hi.sum())) - 0.5)) + 1j * top
        dist = w.imag.copy()
        sg = np.zeros(len(w), dtype=np.int64)
        if hull is not None:
            dh, sg = hull.query(w)
            near_h = dh < dist
            dist = np.where(near_h, dh, dist)
        else:
            near_h = np.zeros(len(w), dtype=bool)
        done = dist < eps
        gone = np.abs(w.real) > far
        if done.any():
            idx = act[done]
            z[idx] = w[done]
            k = np.zeros(int(done.sum()), dtype=np.int64)
            if hull is not None:
                h = near_h[done]
                left = hull.side(w[done], sg[done]) > 0
                k = np.where(h, np.where(left, 1, 2), 0)
                seg[idx] = np.where(h, sg[done], -1)
            kind[idx] = k
        gone &= ~done
        if gone.any():
            kind[act[gone]] = 3
            z[act[gone]] = w[gone]
        mv = ~(done | gone)
        r = dist[mv]
        w[mv] = w[mv] + r * np.exp(2j * np.pi * rng.random(int(mv.sum())))
        z[act] = w
        act = act[mv]
    kind[act] = 3
    return z, kind, seg


def _launch(center, scale, n, rng):
    # proposal for the entry point on the line above the hull: Cauchy around the hull
    x = center + scale * np.tan(np.pi * (rng.random(n) - 0.5))
    q = scale / np.pi / (scale**2 + (x - center) ** 2)
    return x, q


def theta_montecarlo(hull, x_b, walkers=100_000, launch_height=None, seed=0, eps=None, targets=None,
                     replica=0):
    """pi * y * P^{iy}[first exit in (right side of hull) U [base, x_b]] with standard error.

    hull: complex polyline starting on the real line (or None/empty).
    targets: optional list of extra targets, each ('interval', lo, hi),
    ('right',) or ('left',); the returned dict then carries one estimate per
    target, computed from the same walkers.
    """
    z = None if hull is None or len(hull) < 2 else np.asarray(getattr(hull, "z", hull), dtype=complex)
    base = float(np.asarray(getattr(hull, "z", hull))[0].real) if hull is not None and len(hull) else 0.0
    pts = [base, x_b] + ([] if z is None else list(z))
    pts = np.asarray(pts, dtype=complex)
    diam = float(np.abs(pts[:, None] - pts[None, :]).max()) if len(pts) < 4000 else \
        float(max(np.ptp(pts.real), np.ptp(pts.imag)) * np.sqrt(2))
    diam = max(diam, 1e-12)
    if launch_height is None:
        launch_height = 50 * diam
    if launch_height < 50 * diam:
        raise ValueError("launch height must be at least 50 hull diameters")
    if eps is None:
        eps = 1e-5 * diam
    hullobj = _Hull(z, diam / 2000) if z is not None else None
    rng = stream(seed, "harmonic", replica)
    y = float(launch_height)
    center = float(pts.real.mean())
    top = 0.0 if hullobj is None else max(float(z.imag.max()) * 1.05 + eps, 0.0)
    yp = y - top
    x, q = _launch(center, diam, walkers, rng)
    p = yp / np.pi / (yp**2 + (x - base) ** 2)
    weight = np.pi * y * p / q
    far = 1e4 * diam + abs(center)
    if hullobj is None:
        # no hull: the walker starts on the real line itself
        end, kind = x + 0j, np.zeros(walkers, dtype=np.int64)
    else:
        end, kind, _ = _walk(hullobj, x + 1j * top, eps, far, rng)
    specs = targets or [("right",), ("interval", base, x_b)]
    hits = np.zeros((len(specs), walkers), dtype=bool)
    for i, sp in enumerate(specs):
        if sp[0] == "right":
            hits[i] = kind == 2
        elif sp[0] == "left":
            hits[i] = kind == 1
        else:
            lo, hi = sp[1], sp[2]
            hits[i] = (kind == 0) & (end.real >= lo) & (end.real <= hi)
    out = {"walkers": walkers, "launch_height": y, "eps": eps, "escaped": int((kind == 3).sum())}
    if targets is None:
        h = hits.any(axis=0)
        v = weight * h
        out.update(value=float(v.mean()), stderr=float(v.std(ddof=1) / np.sqrt(walkers)))
    else:
        vals = weight[None, :] * hits
        out.update(values=vals.mean(axis=1).tolist(),
                   stderrs=(vals.std(axis=1, ddof=1) / np.sqrt(walkers)).tolist(),
                   union=float((weight * hits.any(axis=0)).mean()))
    out["bias_bound"] = launch_bias(diam, y, out.get("value", out.get("union", 0.0))) + \
        beurling_bound(eps, diam, out.get("value", out.get("union", 0.0)))
    return out


def launch_bias(diam, y, value):
    """First-order error of the finite launch height, O((diam / y)^2)."""
    return abs(value) * 2 * (diam / y) ** 2


def beurling_bound(eps, diam, value):
    # absorption within eps misclassifies only near the tip, harmonic measure O(sqrt(eps / diam))
    return max(abs(value), diam) * np.sqrt(eps / diam)


def hcap_montecarlo(hull, walkers=50_000, seed=0, eps=None):
    """Half-plane capacity from (1 / 2 pi) * integral of E^{x + iH}[Im B_tau] dx.

    An estimator independent of the zipper, used as a cross-check.
    """
    z = np.asarray(getattr(hull, "z", hull), dtype=complex)
    diam = float(max(np.ptp(z.real), np.ptp(z.imag), 1e-12))
    if eps is None:
        eps = 1e-4 * float(z.imag.max())
    hullobj = _Hull(z, diam / 4000)
    rng = stream(seed, "hcap")
    center = float(z.real.mean())
    top = float(z.imag.max()) * 1.05 + eps
    x, q = _launch(center, diam, walkers, rng)
    end, kind, seg = _walk(hullobj, x + 1j * top, eps, 1e4 * diam, rng)
    im = np.where((kind == 1) | (kind == 2), end.imag, 0.0)
    # the absorption point sits within eps of the curve; use the curve height itself
    on = seg >= 0
    p = hullobj.p[seg[on]] + hullobj.d[seg[on]] * np.clip(
        ((end[on] - hullobj.p[seg[on]]) * np.conj(hullobj.d[seg[on]])).real / np.abs(hullobj.d[seg[on]]) ** 2, 0, 1)
    im[on] = p.imag
    v = im / q / (2 * np.pi)
    return float(v.mean()), float(v.std(ddof=1) / np.sqrt(walkers))
