"""Command line entry point: fk <subcommand> ...

Exit codes: 0 success, 2 validation error, 3 statistical acceptance failure.
"""
import argparse
import contextlib
import json
import sys
from pathlib import Path


from . import store
from .bessel import simulate_bessel, sle_driver
from .exploration import explore_dobrushin, explore_wired, loops_from
from .fk import BoundarySpec, FKSampler, ModelParams
from .harmonic import theta_montecarlo
from .lattice import DomainError, build_disk, build_rectangle, load_domain, save_domain
from .loewner import HalfPlaneMap, PlanarCurve, WeldError, extract_driving, path_to_halfplane

CONFIG_VERSION = 1


class ValidationError(Exception):
    pass


def _out(path):
    return contextlib.nullcontext(sys.stdout) if path in (None, "-") else open(path, "w")


def cmd_domain(a):
    if a.shape == "rectangle":
        d = build_rectangle(a.width, a.height, a.mesh)
    else:
        d = build_disk(a.radius, a.mesh, prune=a.prune)
    save_domain(d, a.out)
    print(json.dumps({"sites": d.n_sites, "edges": d.n_edges, "digest": d.digest()}))


def _bc(name):
    return BoundarySpec(name)


def cmd_sample(a):
    d = load_domain(a.domain)
    params = ModelParams(seed=a.seed, thin=a.thin, warmup=a.warmup)
    smp = FKSampler(d, _bc(a.bc), params, replica=a.replica)
    bits = smp.draw_bits(a.draws)
    store.save_configs(a.out, bits, {"domain": d.digest(), "bc": a.bc, "params": params.as_dict(),
                                     "replica": a.replica})


def cmd_explore(a):
    d = load_domain(a.domain)
    if a.configs:
        bits, meta = store.load_configs(a.configs)
        bc = meta.get("bc", a.bc)
        cfg = bits[a.index]
    else:
        bc = a.bc
        cfg = FKSampler(d, _bc(bc), ModelParams(seed=a.seed, thin=a.thin), replica=a.replica).draw().bits
    rep = loops_from(cfg, d, _bc(bc))
    path = explore_dobrushin(rep) if bc == "dobrushin" else explore_wired(rep)
    store.save_path(a.out, path.points, {"mesh": d.mesh, "domain": str(a.domain), "bc": bc,
                                         "cuts": [int(c) for c in path.cuts],
                                         "hits": [int(h) for h in path.hit_log], "target": list(path.target)})


def cmd_drive(a):
    z = store.load_curve(a.curve)
    header = Path(str(a.curve) + ".json")
    meta = store.read_json(header) if header.exists() else {}
    dom = a.domain or meta.get("domain")
    if dom and meta:
        d = load_domain(dom)
        target = "b" if meta.get("bc") == "dobrushin" else "c"
        phi = HalfPlaneMap(d, "a", target, scale=a.scale)
        z = path_to_halfplane(z, phi).z
    rec, _ = extract_driving(PlanarCurve(z), h_min=a.h_min, t_max=a.t_max, x0=a.x0)
    with _out(a.out) as f:
        f.write("t,W,V,theta\n")
        for t, w, v in zip(rec.times, rec.W, rec.V):
            f.write(f"{t:.17g},{w:.17g},{v:.17g},{v - w:.17g}\n")


def cmd_theta(a):
    z = store.load_curve(a.curve)
    base = float(z[0].real)
    r = theta_montecarlo(z, base if a.x_b is None else a.x_b, walkers=a.walkers, launch_height=a.launch_height,
                         seed=a.seed)
    out = {k: r[k] for k in ("value", "stderr", "walkers", "launch_height")}
    with _out(a.out) as f:
        f.write(json.dumps(out, sort_keys=True) + "\n")


def cmd_bessel(a):
    p = simulate_bessel(a.d, a.x0, a.dt, a.T, seed=a.seed, scheme=a.scheme)
    with _out(a.out) as f:
        f.write("t,X\n")
        for t, x in zip(p.t, p.X):
            f.write(f"{t:.17g},{x:.17g}\n")


def cmd_sle(a):
    s = sle_driver(a.kappa, a.rho, a.x0, a.dt, a.T, seed=a.seed)
    with _out(a.out) as f:
        f.write("t,W,V,theta\n")
        for t, w, v in zip(s.t, s.W, s.V):
            f.write(f"{t:.17g},{w:.17g},{v:.17g},{v - w:.17g}\n")


def cmd_exp(a):
    from .experiments import EXPERIMENTS, RunManifest, run_manifest
    if a.manifest:
        text = Path(a.manifest).read_text()
        obj = _parse_json(text, a.manifest)
        try:
            m = RunManifest.from_json(obj)
        except (TypeError, ValueError) as e:
            raise ValidationError(f"{a.manifest}: {_locate(text, e)}{e}")
        if m.experiment != a.name:
            raise ValidationError(f"{a.manifest}: manifest is for {m.experiment!r}, not {a.name!r}")
    else:
        if a.name not in EXPERIMENTS:
            raise ValidationError(f"unknown experiment {a.name!r}")
        m = RunManifest(a.name, {}, a.seed)
    report = run_manifest(m, a.out)
    print(json.dumps({"experiment": m.experiment, "passed": report["passed"], "out": str(a.out)}))
    return 0 if report["passed"] else 3


def cmd_report(a):
    rep = store.read_json(Path(a.dir) / "report.json")
    md = Path(a.dir) / "report.md"
    print(md.read_text() if md.exists() else json.dumps(rep, indent=2))
    return 0 if rep.get("passed", False) else 3


def _parse_json(text, name):
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ValidationError(f"{name}:{e.lineno}:{e.colno}: {e.msg}")


def _locate(text, err):
    # best-effort line number of the first quoted key named in an error message
    for tok in str(err).replace("[", " ").replace("]", " ").replace(",", " ").split():
        key = tok.strip("'\"")
        for i, line in enumerate(text.splitlines(), 1):
            if f'"{key}"' in line:
                return f"line {i}: "
    return ""


def _apply_config(parser, sub, args, argv):
    """Fill unset options from a versioned JSON config; unknown keys are rejected."""
    text = Path(args.config).read_text()
    obj = _parse_json(text, args.config)
    if not isinstance(obj, dict):
        raise ValidationError(f"{args.config}:1: config must be an object")
    if obj.get("version") != CONFIG_VERSION:
        raise ValidationError(f"{args.config}:{_line_of(text, 'version')}: unsupported config version "
                              f"{obj.get('version')!r} (expected {CONFIG_VERSION})")
    known = {act.dest for act in sub._actions} - {"help", "config"}
    given = {tok.split("=")[0].lstrip("-").replace("-", "_") for tok in argv if tok.startswith("--")}
    for k, v in obj.items():
        if k == "version":
            continue
        if k not in known:
            raise ValidationError(f"{args.config}:{_line_of(text, k)}: unknown key {k!r}")
        if k not in given:
            setattr(args, k, v)


def _line_of(text, key):
    for i, line in enumerate(text.splitlines(), 1):
        if f'"{key}"' in line:
            return i
    return 1


def build_parser():
    p = argparse.ArgumentParser(prog="fk", description="FK-Ising exploration paths, Loewner drivers and Bessel excursions.")
    sp = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        s = sp.add_parser(name, help=help_)
        s.add_argument("--config", help="JSON file of option values (with \"version\": 1)")
        s.set_defaults(func=fn)
        return s

    s = add("domain", cmd_domain, "build a lattice domain and write it as JSON")
    s.add_argument("--shape", choices=["rectangle", "disk"], default="rectangle")
    s.add_argument("--width", type=float, default=2.0)
    s.add_argument("--height", type=float, default=1.0)
    s.add_argument("--radius", type=float, default=1.0)
    s.add_argument("--mesh", type=float, default=1 / 16)
    s.add_argument("--prune", action="store_true", help="disk: drop sites not on a full plaquette")
    s.add_argument("--out", default="domain.json")

    s = add("sample", cmd_sample, "draw FK configurations (bit-packed, with a JSON sidecar)")
    s.add_argument("--domain", required=False)
    s.add_argument("--bc", choices=["free", "wired", "dobrushin"], default="dobrushin")
    s.add_argument("--draws", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--replica", type=int, default=0)
    s.add_argument("--thin", type=int, default=20)
    s.add_argument("--warmup", type=int, default=None)
    s.add_argument("--out", default="configs.bin")

    s = add("explore", cmd_explore, "exploration path of one configuration as CSV (step,x,y)")
    s.add_argument("--domain", required=False)
    s.add_argument("--configs", help="packed configurations from `fk sample`; sampled afresh if omitted")
    s.add_argument("--index", type=int, default=0)
    s.add_argument("--bc", choices=["wired", "dobrushin"], default="dobrushin")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--replica", type=int, default=0)
    s.add_argument("--thin", type=int, default=20)
    s.add_argument("--out", default="path.csv")

    s = add("drive", cmd_drive, "Loewner driver of a curve as CSV (t,W,V,theta)")
    s.add_argument("--curve", required=False)
    s.add_argument("--domain", help="map the lattice path to H with this domain's conformal map")
    s.add_argument("--scale", type=float, default=1.0)
    s.add_argument("--h-min", dest="h_min", type=float, default=0.0)
    s.add_argument("--t-max", dest="t_max", type=float, default=None)
    s.add_argument("--x0", type=float, default=None)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="-")

    s = add("theta", cmd_theta, "Monte Carlo boundary angle of a curve in H (JSON)")
    s.add_argument("--curve", required=False)
    s.add_argument("--x-b", dest="x_b", type=float, default=None)
    s.add_argument("--walkers", type=int, default=100_000)
    s.add_argument("--launch-height", dest="launch_height", type=float, default=None)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="-")

    s = add("bessel", cmd_bessel, "Bessel process path as CSV (t,X)")
    s.add_argument("--d", type=float, default=1.5)
    s.add_argument("--x0", type=float, default=0.0)
    s.add_argument("--dt", type=float, default=1e-3)
    s.add_argument("--T", type=float, default=1.0)
    s.add_argument("--scheme", choices=["exact_besq", "euler"], default="exact_besq")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="-")

    s = add("sle", cmd_sle, "SLE_kappa(rho) driver as CSV (t,W,V,theta)")
    s.add_argument("--kappa", type=float, default=16 / 3)
    s.add_argument("--rho", type=float, default=16 / 3 - 6)
    s.add_argument("--x0", type=float, default=0.0)
    s.add_argument("--dt", type=float, default=1e-3)
    s.add_argument("--T", type=float, default=1.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="-")

    s = add("exp", cmd_exp, "run an experiment; exit 3 if its acceptance test fails")
    s.add_argument("name")
    s.add_argument("--manifest")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="run")

    s = add("report", cmd_report, "print the summary of an experiment directory")
    s.add_argument("--dir", default="run")
    s.add_argument("--seed", type=int, default=0)
    return p


_REQUIRED = {"sample": ["domain"], "explore": ["domain"], "drive": ["curve"], "theta": ["curve"]}


def run(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        if args.config:
            sub = parser._subparsers._group_actions[0].choices[args.command]
            _apply_config(parser, sub, args, argv)
        for k in _REQUIRED.get(args.command, []):
            if getattr(args, k) is None:
                raise ValidationError(f"--{k.replace('_', '-')} is required")
        code = args.func(args)
        return 0 if code is None else code
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (DomainError, WeldError, ValueError, KeyError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
