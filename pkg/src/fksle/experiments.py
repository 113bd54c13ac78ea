"""End-to-end statistical experiments, each a pure function of its manifest."""
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
from scipy import stats
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import __version__
from .excursions import (discrete_stopping_times, excursion_statistics, hits_to_times, ks_maxima,
                         synthetic_records)
from .exploration import ExplorationError, explore_dobrushin, explore_wired, loops_from
from .fk import DOBRUSHIN, FREE, WIRED, FKSampler, ModelParams, partition
from .harmonic import theta_montecarlo
from .lattice import build_disk, build_rectangle
from .loewner import HalfPlaneMap, WeldError, extract_driving, path_to_halfplane
from . import store

KAPPA = 16 / 3
MANIFEST_VERSION = 1


@dataclass
class RunManifest:
    experiment: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    version: int = MANIFEST_VERSION
    code_version: str = __version__
    outputs: dict = field(default_factory=dict)

    def to_json(self):
        return asdict(self)

    @classmethod
    def from_json(cls, obj):
        unknown = set(obj) - {"experiment", "params", "seed", "version", "code_version", "outputs"}
        if unknown:
            raise ValueError(f"unknown manifest keys: {sorted(unknown)}")
        if obj.get("version", MANIFEST_VERSION) != MANIFEST_VERSION:
            raise ValueError(f"unsupported manifest version {obj.get('version')}")
        if obj.get("experiment") not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {obj.get('experiment')!r}")
        return cls(**obj)


def workers():
    try:
        return max(1, int(os.environ.get("FK_THREADS", "1")))
    except ValueError:
        return 1


def _map(fn, items, n_workers=None):
    # results are returned in item order, so the worker count never changes outputs
    n_workers = workers() if n_workers is None else n_workers
    items = list(items)
    if n_workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(n_workers, len(items))) as ex:
        return list(ex.map(fn, items))


def _split(n, chains):
    base = [n // chains] * chains
    for i in range(n % chains):
        base[i] += 1
    return [b for b in base if b > 0]


def _mean_se(x, batches=20):
    x = np.asarray(x, dtype=float)
    b = min(batches, len(x))
    bm = np.array([c.mean() for c in np.array_split(x, b)])
    return float(x.mean()), float(bm.std(ddof=1) / np.sqrt(b)) if b > 1 else float("nan")


# driver variance under Dobrushin boundary conditions

def _dobrushin_chain(job):
    p, seed, chain, n = job
    d = build_rectangle(p["width"], p["height"], p["delta"])
    phi = HalfPlaneMap(d, "a", "b", scale=1.0)
    smp = FKSampler(d, DOBRUSHIN, ModelParams(seed=seed, thin=p["thin"]), replica=chain)
    ts = np.array(p["t_eval"])
    rows, excl = [], 0
    for _ in range(n):
        try:
            z = path_to_halfplane(explore_dobrushin(loops_from(smp.draw(), d, DOBRUSHIN)), phi)
            rec, _ = extract_driving(z, h_min=p["h_min"] * p["delta"], t_max=1.5 * ts.max())
        except (WeldError, ExplorationError):
            excl += 1
            continue
        if rec.times[-1] < ts.max():
            excl += 1
            continue
        rows.append(rec.at(ts, "W"))
    return rows, excl


def exp_dobrushin_driver(delta=1 / 64, samples=500, width=2.0, height=1.0, t_eval=(0.05, 0.1), h_min=2.0,
                         thin=20, chains=4, seed=0, band=0.15):
    p = dict(delta=delta, width=width, height=height, t_eval=list(t_eval), h_min=h_min, thin=thin)
    res = _map(_dobrushin_chain, [(p, seed, c, n) for c, n in enumerate(_split(samples, chains))])
    W = np.array([r for rows, _ in res for r in rows]).reshape(-1, len(t_eval))
    excluded = sum(e for _, e in res)
    n = len(W)
    ts = np.array(t_eval)
    t0 = ts[0]
    khat = W.var(axis=0, ddof=1) / ts
    kse = khat * np.sqrt(2 / max(n - 1, 1))
    mean = W.mean(axis=0)
    mse = W.std(axis=0, ddof=1) / np.sqrt(n)
    ks = [float(stats.kstest(W[:, i] / W[:, i].std(ddof=1), "norm").pvalue) for i in range(len(ts))]
    inc_corr = float(np.corrcoef(W[:, 0], W[:, 1] - W[:, 0])[0, 1]) if len(ts) > 1 else float("nan")
    ratio = khat[0] / KAPPA
    passed = bool((1 - band) <= ratio <= (1 + band) and abs(mean[0]) <= 3 * mse[0]
                  and excluded <= 0.05 * samples)
    return {
        "experiment": "dobrushin_driver", "params": {**p, "samples": samples, "chains": chains, "seed": seed},
        "n": n, "excluded": excluded, "t": ts.tolist(), "kappa_hat": khat.tolist(), "kappa_se": kse.tolist(),
        "ratio": float(ratio), "mean": mean.tolist(), "mean_se": mse.tolist(), "ks_normal_p": ks,
        "increment_corr": inc_corr, "increment_corr_se": 1 / np.sqrt(n), "passed": passed,
        "data": {"W": W},
    }


# boundary angle excursions under wired boundary conditions

def _wired_chain(job):
    p, seed, chain, n = job
    dw = build_disk(p["radius"], p["delta"], prune=True)
    phi = HalfPlaneMap(dw, "a", "c", scale=1.0)
    smp = FKSampler(dw, WIRED, ModelParams(seed=seed, thin=p["thin"]), replica=chain)
    out, excl = [], 0
    for _ in range(n):
        try:
            q = explore_wired(loops_from(smp.draw(), dw, WIRED))
            rec, _ = extract_driving(path_to_halfplane(q, phi), h_min=p["h_min"] * p["delta"], t_max=p["horizon"])
        except (WeldError, ExplorationError):
            excl += 1
            continue
        if rec.times[-1] < p["horizon"]:
            excl += 1
            continue
        out.append((rec, hits_to_times(rec, q.hit_log)))
    return out, excl


def exp_wired_theta(delta=1 / 64, eps_factors=(10, 20, 40), samples=300, radius=1.0, horizon=2.0, h_min=2.0,
                    thin=20, chains=4, synthetic_runs=1000, seed=0, n_perm=999):
    p = dict(delta=delta, radius=radius, horizon=horizon, h_min=h_min, thin=thin)
    res = _map(_wired_chain, [(p, seed, c, n) for c, n in enumerate(_split(samples, chains))])
    paths = [x for out, _ in res for x in out]
    excluded = sum(e for _, e in res)
    dt = float(np.median([np.median(np.diff(r.times)) for r, _ in paths]))
    sweep = []
    for f in eps_factors:
        eps = f * np.sqrt(delta)
        recs = [discrete_stopping_times(r, h, eps, delta) for r, h in paths]
        st = excursion_statistics(recs, n_perm=n_perm, seed=seed)
        syn = excursion_statistics(synthetic_records(KAPPA, eps, delta, dt, horizon, synthetic_runs, seed=seed + 1),
                                   n_perm=99, seed=seed)
        row = {"epsilon": eps, "factor": f, "count": st["count"], "synthetic_count": syn["count"]}
        if st["count"] and syn["count"]:
            fm, sm = np.array(st["features"]["max"]), np.array(syn["features"]["max"])
            row["ks_max"] = ks_maxima(fm, sm)
            row["ks_duration"] = ks_maxima(st["features"]["duration"], syn["features"]["duration"])
            row["hitting"] = st.get("hitting")
            row["independence"] = st.get("independence")
            row["maxima"] = fm
            row["synthetic_maxima"] = sm
        sweep.append(row)
    main = sweep[0]
    ks_p = main.get("ks_max", (1.0, 0.0))[1]
    ind_p = (main.get("independence") or {}).get("p", 0.0)
    passed = bool(ks_p > 0.01 and ind_p > 0.01 and excluded <= 0.05 * samples and main["count"] >= 30)
    recs = [discrete_stopping_times(r, h, main["epsilon"], delta) for r, h in paths]
    table = []
    for i, r in enumerate(recs):
        f = r.features()
        for k in range(len(r)):
            S = float(r.driver.times[r.S[k]]) if k < len(r.S) else None
            table.append((i, k, float(r.driver.times[r.T[k]]), S, float(f["max"][k]), float(f["duration"][k])))
    return {
        "experiment": "wired_theta", "params": {**p, "eps_factors": list(eps_factors), "samples": samples,
                                                "chains": chains, "synthetic_runs": synthetic_runs, "seed": seed},
        "n": len(paths), "excluded": excluded, "synthetic_dt": dt,
        "sweep": [{k: v for k, v in row.items() if k not in ("maxima", "synthetic_maxima")} for row in sweep],
        "ks_p": ks_p, "independence_p": ind_p, "passed": passed,
        "data": {"excursions": table, "maxima": main.get("maxima"), "synthetic_maxima": main.get("synthetic_maxima")},
    }


# one-arm exponent

def _box(n):
    d = build_rectangle(2 * n, 2 * n, 1.0)
    origin = int(np.flatnonzero((d.sites[:, 0] == n) & (d.sites[:, 1] == n))[0])
    return d, origin


def _arm_job(job):
    n, draws, seed, thin, inner = job
    d, origin = _box(n)
    b = int(d.boundary_cycle[0])
    smp = FKSampler(d, WIRED, ModelParams(seed=seed, thin=thin), replica=n)
    x = smp.connectivity(draws, [(origin, b)])[:, 0]
    ann = None
    if inner:
        m = n // 4
        s = d.sites
        ring = np.flatnonzero((np.abs(s[:, 0] - n) <= m) & (np.abs(s[:, 1] - n) <= m)
                              & ((np.abs(s[:, 0] - n) == m) | (np.abs(s[:, 1] - n) == m)))
        smp2 = FKSampler(d, WIRED, ModelParams(seed=seed, thin=thin), replica=10_000 + n)
        ann = smp2.connectivity(draws, [(int(r), b) for r in ring]).any(axis=1)
    return x, ann


def exp_one_arm(sizes=(8, 16, 32, 64, 128), draws=4000, thin=2, seed=0, batches=40, boot=2000,
                band=(-0.16, -0.10)):
    sizes = list(sizes)
    multi = [n for n in sizes if n // 4 in sizes and n // 4 >= 8][:2]
    res = _map(_arm_job, [(n, draws, seed, thin, n in multi) for n in sizes])
    P, se, bmeans = [], [], []
    for x, _ in res:
        bm = np.array([c.mean() for c in np.array_split(x.astype(float), batches)])
        bmeans.append(bm)
        P.append(float(x.mean()))
        se.append(float(bm.std(ddof=1) / np.sqrt(batches)))
    P, se = np.array(P), np.array(se)
    ln = np.log(sizes)
    slope, icpt = np.polyfit(ln, np.log(P), 1)
    rng = np.random.default_rng(seed)
    bs = []
    for _ in range(boot):
        pb = [bm[rng.integers(0, batches, batches)].mean() for bm in bmeans]
        bs.append(np.polyfit(ln, np.log(pb), 1)[0])
    ci = np.percentile(bs, [2.5, 97.5])
    mono = [bool(P[i + 1] <= P[i] + np.hypot(se[i], se[i + 1])) for i in range(len(P) - 1)]
    qm = {}
    for n in multi:
        i, j = sizes.index(n // 4), sizes.index(n)
        ann = res[j][1]
        qm[n] = {"P_outer": float(P[j]), "P_inner": float(P[i]), "P_annulus": float(ann.mean()),
                 "ratio": float(P[j] / (P[i] * ann.mean()))}
    passed = bool(band[0] <= slope <= band[1])
    return {"experiment": "one_arm", "params": {"sizes": sizes, "draws": draws, "thin": thin, "seed": seed,
                                                "batches": batches, "boot": boot},
            "P": P.tolist(), "se": se.tolist(), "slope": float(slope), "intercept": float(icpt),
            "ci": ci.tolist(), "monotone": mono, "quasi_multiplicativity": qm, "band": list(band),
            "passed": passed}


# crossing probabilities

def _crossings(bits, edges, n_sites, A, B):
    g = coo_matrix((np.ones(int(bits.sum())), (edges[bits, 0], edges[bits, 1])), shape=(n_sites, n_sites))
    _, lab = connected_components(g, directed=False)
    return bool(np.intersect1d(lab[A], lab[B]).size)


def _sides(d, w, h):
    s = d.sites * d.mesh
    left = np.flatnonzero(np.isclose(s[:, 0], 0))
    right = np.flatnonzero(np.isclose(s[:, 0], w))
    return left, right


def _rsw_job(job):
    kind, delta, samples, seed, thin = job
    w, h = 2.0, 1.0
    d = build_rectangle(w, h, delta)
    bc = FREE if kind == "free" else WIRED
    smp = FKSampler(d, bc, ModelParams(seed=seed, thin=thin), replica=int(round(1 / delta)) + (0 if kind == "free" else 1000))
    left, right = _sides(d, w, h)
    bits = smp.draw_bits(samples)
    return np.array([_crossings(b, d.edges, d.n_sites, left, right) for b in bits])


def _selfdual_job(job):
    n, samples, seed, thin = job
    # (n + 1) x n sites with the two short sides wired separately; dual graph is isomorphic
    d = build_rectangle(n, n - 1, 1.0)
    left, right = _sides(d, n, n - 1)
    bc = partition(left, right)
    smp = FKSampler(d, bc, ModelParams(seed=seed, thin=thin), replica=50_000 + n)
    return smp.connectivity(samples, [(int(left[0]), int(right[0]))])[:, 0]


def _nested_job(job):
    samples, seed, thin = job
    d = build_rectangle(4.0, 1.0, 1 / 16)
    smp = FKSampler(d, FREE, ModelParams(seed=seed, thin=thin), replica=77)
    left, right = _sides(d, 4.0, 1.0)
    s = d.sites * d.mesh
    sq = np.flatnonzero(s[:, 0] <= 1.0 + 1e-9)
    sub = np.isin(d.edges[:, 0], sq) & np.isin(d.edges[:, 1], sq)
    mid = np.flatnonzero(np.isclose(s[:, 0], 1.0))
    long_, short = [], []
    for b in smp.draw_bits(samples):
        long_.append(_crossings(b, d.edges, d.n_sites, left, right))
        short.append(_crossings(b & sub, d.edges, d.n_sites, left, mid))
    return np.array(long_), np.array(short)


def exp_rsw(deltas=(1 / 16, 1 / 32, 1 / 64), samples=2000, thin=5, seed=0, floor=0.05, selfdual_sizes=(16, 32)):
    jobs = [(k, dl, samples, seed, thin) for k in ("free", "wired") for dl in deltas]
    res = _map(_rsw_job, jobs)
    table = []
    for (k, dl, *_), x in zip(jobs, res):
        m, s = _mean_se(x)
        table.append({"bc": k, "delta": dl, "p": m, "se": s})
    sd = _map(_selfdual_job, [(n, samples * 2, seed, thin) for n in selfdual_sizes])
    q = 2.0
    selfdual = []
    for n, c in zip(selfdual_sizes, sd):
        # exact reweighting to the symmetric measure: weight q^{-1/2} on configurations without the crossing
        wgt = np.where(c, 1.0, q ** -0.5)
        est = float((wgt * c).sum() / wgt.sum())
        k = min(20, len(c))
        num = np.array([(a * b).sum() for a, b in zip(np.array_split(wgt, k), np.array_split(c, k))])
        den = np.array([a.sum() for a in np.array_split(wgt, k)])
        r = num / den
        se = float(r.std(ddof=1) / np.sqrt(k))
        selfdual.append({"n": n, "p_separate": float(c.mean()), "p_symmetric": est, "se": se})
    lng, sht = _nested_job((samples, seed, thin))
    nest = {"p_4to1": float(lng.mean()), "p_1to1": float(sht.mean()), "contained": bool(np.all(sht[lng]))}
    consistent = {}
    for k in ("free", "wired"):
        rows = [r for r in table if r["bc"] == k]
        ps = np.array([r["p"] for r in rows])
        ss = np.array([r["se"] for r in rows])
        consistent[k] = float(np.max(np.abs(ps[:, None] - ps[None, :]) / np.hypot(ss[:, None], ss[None, :] + 1e-12)))
    passed = bool(all(r["p"] >= floor for r in table)
                  and all(abs(s["p_symmetric"] - 0.5) <= 3 * s["se"] for s in selfdual))
    return {"experiment": "rsw", "params": {"deltas": list(deltas), "samples": samples, "thin": thin, "seed": seed,
                                            "selfdual_sizes": list(selfdual_sizes)},
            "table": table, "selfdual": selfdual, "nested": nest, "max_z_across_delta": consistent,
            "floor": floor, "passed": passed}


# boundary-avoidance frequencies

def _c2_job(job):
    p, seed, chain, n = job
    d = build_rectangle(p["width"], p["height"], p["delta"])
    smp = FKSampler(d, DOBRUSHIN, ModelParams(seed=seed, thin=p["thin"]), replica=chain)
    w, h = p["width"], p["height"]
    centre = complex(w, h / 2)
    bpt = complex(w / 2, h)
    a = complex(w / 2, 0)
    xs = [a + s for s in p["offsets"]]
    dmin, dnest, db = [], [], []
    for _ in range(n):
        z = explore_dobrushin(loops_from(smp.draw(), d, DOBRUSHIN)).complex_points()
        dmin.append(np.abs(z - centre).min())
        dnest.append([np.abs(z - x).min() for x in xs])
        db.append(np.abs(z - bpt).min())
    return np.array(dmin), np.array(dnest), np.array(db)


def exp_c2_statistic(delta=1 / 64, samples=400, width=2.0, height=1.0, outer=0.45, ratios=(2, 4, 8, 16, 32),
                     thin=20, chains=4, seed=0):
    eps = 2 * delta
    offsets = [s for s in (4 * eps, 8 * eps, 16 * eps, 32 * eps) if s < width / 2]
    p = dict(delta=delta, width=width, height=height, thin=thin, offsets=offsets)
    res = _map(_c2_job, [(p, seed, c, n) for c, n in enumerate(_split(samples, chains))])
    dmin = np.concatenate([r[0] for r in res])
    dnest = np.vstack([r[1] for r in res])
    db = np.concatenate([r[2] for r in res])
    rows = []
    reach = dmin < outer
    for k in ratios:
        r = outer / k
        cross = dmin < r
        cond = float(cross[reach].mean()) if reach.any() else 0.0
        rows.append({"inner": r, "outer": outer, "modulus": float(np.log(k) / np.pi), "frequency": float(cross.mean()),
                     "conditional": cond, "reached_outer": int(reach.sum())})
    nested = [{"x_over_eps": s / eps, "frequency": float((dnest[:, i] < 2 * eps).mean())} for i, s in enumerate(offsets)]
    decays = bool(all(nested[i + 1]["frequency"] <= nested[i]["frequency"] + 0.05 for i in range(len(nested) - 1)))
    forced = float((db < 2 * delta).mean())
    passed = bool(rows[-1]["conditional"] <= 0.5 and forced >= 0.99)
    return {"experiment": "c2_statistic", "params": {**p, "samples": samples, "outer": outer,
                                                     "ratios": list(ratios), "chains": chains, "seed": seed},
            "table": rows, "nested": nested, "nested_decays": decays, "forced_crossing": forced,
            "passed": passed}


# two estimators of the boundary angle

def _theta_job(job):
    p, seed, i = job
    dw = build_disk(p["radius"], p["delta"], prune=True)
    phi = HalfPlaneMap(dw, "a", "c", scale=1.0)
    smp = FKSampler(dw, WIRED, ModelParams(seed=seed, thin=p["thin"]), replica=i)
    z = path_to_halfplane(explore_wired(loops_from(smp.draw(), dw, WIRED)), phi)
    fine, _ = extract_driving(z, h_min=p["delta"], t_max=p["t_star"])
    coarse, _ = extract_driving(z, h_min=2 * p["delta"], t_max=p["t_star"])
    t = fine.times[-1]
    th = float(fine.theta[-1])
    disc = abs(th - float(coarse.at(t, "theta")))
    j = int(fine.index[-1])
    mc = theta_montecarlo(z.z[:j + 1], float(z.z[0].real), walkers=p["walkers"], seed=seed, replica=i)
    return {"path": i, "t": float(t), "theta_conformal": th, "theta_mc": mc["value"], "stderr": mc["stderr"],
            "discretization": disc, "mc_bias": float(mc["bias_bound"]), "escaped": mc["escaped"]}


def exp_theta_agreement(delta=1 / 64, paths=20, t_star=0.5, walkers=100_000, radius=1.0, thin=20, seed=0):
    p = dict(delta=delta, t_star=t_star, walkers=walkers, radius=radius, thin=thin)
    rows = _map(_theta_job, [(p, seed, i) for i in range(paths)])
    for r in rows:
        r["tolerance"] = 3 * r["stderr"] + r["discretization"] + r["mc_bias"]
        r["agree"] = bool(abs(r["theta_mc"] - r["theta_conformal"]) <= r["tolerance"])
    return {"experiment": "theta_agreement", "params": {**p, "paths": paths, "seed": seed}, "rows": rows,
            "agree": sum(r["agree"] for r in rows), "passed": bool(all(r["agree"] for r in rows))}


EXPERIMENTS = {
    "dobrushin_driver": exp_dobrushin_driver,
    "wired_theta": exp_wired_theta,
    "one_arm": exp_one_arm,
    "rsw": exp_rsw,
    "c2_statistic": exp_c2_statistic,
    "theta_agreement": exp_theta_agreement,
}


def run_manifest(manifest, outdir):
    """Run one experiment and write its data files, report and manifest; returns the report."""
    if isinstance(manifest, dict):
        manifest = RunManifest.from_json(manifest)
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    fn = EXPERIMENTS[manifest.experiment]
    report = fn(seed=manifest.seed, **manifest.params)
    files = write_report(report, out)
    manifest.outputs = {name: store.sha256_file(out / name) for name in files}
    store.write_json(out / "manifest.json", manifest.to_json())
    return report


def _markdown(report):
    lines = [f"# {report['experiment']}", "", f"passed: {report['passed']}", ""]
    for k, v in report.items():
        if k in ("experiment", "passed", "data", "params"):
            continue
        lines.append(f"- {k}: {v}")
    lines += ["", "params:", ""] + [f"- {k}: {v}" for k, v in report.get("params", {}).items()]
    return "\n".join(lines) + "\n"


def write_report(report, out):
    """report.json, report.md, plots and data files; returns the data file names (sorted)."""
    out = Path(out)
    data = report.get("data", {})
    body = {k: v for k, v in report.items() if k != "data"}
    store.write_json(out / "report.json", body)
    (out / "report.md").write_text(_markdown(body))
    files = ["report.json", "report.md"]
    exp = report["experiment"]
    if exp == "dobrushin_driver":
        W = np.asarray(data["W"])
        store._write_csv(out / "driver_samples.csv", [f"W_t{t}" for t in report["t"]], W)
        files.append("driver_samples.csv")
    elif exp == "wired_theta":
        store.save_excursions(out / "excursions.csv", data.get("excursions", []))
        files.append("excursions.csv")
        fm, sm = data.get("maxima"), data.get("synthetic_maxima")
        if fm is not None and len(fm) and sm is not None and len(sm):
            fm, sm = np.sort(fm), np.sort(sm)
            store.svg_plot(out / "excursion_maxima.svg",
                           [("lattice", fm, 1 - np.arange(len(fm)) / len(fm), "step"),
                            ("SLE driver", sm, 1 - np.arange(len(sm)) / len(sm), "step")],
                           "excursion maxima", "M", "P[max >= M]", loglog=True)
            files.append("excursion_maxima.svg")
    elif exp == "one_arm":
        n = np.array(report["params"]["sizes"], dtype=float)
        store.svg_plot(out / "one_arm.svg",
                       [("estimate", n, report["P"], "dots"),
                        (f"slope {report['slope']:.3f}", n, np.exp(report["intercept"]) * n ** report["slope"], "line")],
                       "one-arm probability", "n", "P[0 <-> boundary]", loglog=True)
        files.append("one_arm.svg")
    return sorted(files)
