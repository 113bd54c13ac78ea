"""On-disk formats: packed configurations, path/driver/excursion CSVs, JSON reports."""
import csv
import hashlib
import json
from pathlib import Path

import numpy as np


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serialisable: {type(o)}")


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())


def save_configs(path, bits, meta):
    """Bit-packed (K, E) boolean array in `path` plus a JSON sidecar `path.json`."""
    bits = np.atleast_2d(np.asarray(bits, dtype=bool))
    np.packbits(bits, axis=1).tofile(path)
    write_json(str(path) + ".json", {**meta, "count": bits.shape[0], "edges": bits.shape[1]})


def load_configs(path):
    meta = read_json(str(path) + ".json")
    raw = np.fromfile(path, dtype=np.uint8).reshape(meta["count"], -1)
    return np.unpackbits(raw, axis=1, count=meta["edges"]).astype(bool), meta


def _write_csv(path, header, rows, fmt="%.17g"):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([x if isinstance(x, (str, int, np.integer)) else fmt % x for x in r])


def _read_csv(path):
    with open(path, newline="") as f:
        r = csv.reader(f)
        header = next(r)
        rows = [row for row in r]
    return header, rows


def save_path(path, points, meta):
    """Lattice path as step,x,y (doubled integer coordinates) plus JSON header."""
    pts = np.asarray(points)
    _write_csv(path, ["step", "x", "y"], [(int(k), int(x), int(y)) for k, (x, y) in enumerate(pts)])
    write_json(str(path) + ".json", meta)


def load_path(path):
    _, rows = _read_csv(path)
    meta = read_json(str(path) + ".json") if Path(str(path) + ".json").exists() else {}
    return np.array([[int(r[1]), int(r[2])] for r in rows], dtype=np.int64).reshape(-1, 2), meta


def save_curve(path, z):
    """Planar curve as x,y floats."""
    z = np.asarray(z, dtype=complex)
    _write_csv(path, ["x", "y"], zip(z.real, z.imag))


def load_curve(path):
    header, rows = _read_csv(path)
    a = np.array(rows, dtype=float).reshape(-1, len(header))
    if header[:3] == ["step", "x", "y"]:
        meta = read_json(str(path) + ".json") if Path(str(path) + ".json").exists() else {}
        return (a[:, 1] + 1j * a[:, 2]) * meta.get("mesh", 1.0) / 2
    return a[:, 0] + 1j * a[:, 1]


def save_driver(path, t, W, V):
    W, V = np.asarray(W), np.asarray(V)
    _write_csv(path, ["t", "W", "V", "theta"], zip(t, W, V, V - W))


def load_driver(path):
    _, rows = _read_csv(path)
    a = np.array(rows, dtype=float).reshape(-1, 4)
    return a[:, 0], a[:, 1], a[:, 2]


def save_series(path, t, X, name="X"):
    _write_csv(path, ["t", name], zip(t, X))


def save_excursions(path, table):
    """Rows of (run_id, k, T_k, S_k, max, duration); S_k empty when censored."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["run_id", "k", "T_k", "S_k", "max", "duration"])
        for run, k, T, S, m, d in table:
            w.writerow([run, int(k), "%.17g" % T, "" if S is None else "%.17g" % S, "%.17g" % m, "%.17g" % d])


def svg_plot(path, series, title="", xlabel="", ylabel="", loglog=False):
    """Static SVG line/marker plot. series: list of (label, x, y, style) with style 'line' or 'dots'."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    plt.rcParams["svg.hashsalt"] = "fksle"
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for label, x, y, style in series:
        if style == "dots":
            ax.plot(x, y, "o", ms=4, label=label)
        elif style == "step":
            ax.step(x, y, where="post", label=label)
        else:
            ax.plot(x, y, "-", label=label)
    if loglog:
        ax.set_xscale("log")
        ax.set_yscale("log")
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
