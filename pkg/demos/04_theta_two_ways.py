"""theta = V - W two ways on a wired exploration path in the unit disk.

The zipper gives theta from the force point; walk-on-spheres gives it as the
renormalised harmonic measure of the right side of the curve (plus the boundary
segment up to the force point). The two should agree within the Monte Carlo error
plus the discretisation and launch biases.
"""
from fksle.exploration import explore_wired, loops_from
from fksle.fk import WIRED, FKSampler, ModelParams
from fksle.harmonic import theta_montecarlo
from fksle.lattice import build_disk
from fksle.loewner import HalfPlaneMap, extract_driving, path_to_halfplane

delta = 1 / 32
domain = build_disk(1.0, delta, prune=True)
phi = HalfPlaneMap(domain, "a", "c")
sampler = FKSampler(domain, WIRED, ModelParams(seed=2))

for i in range(3):
    z = path_to_halfplane(explore_wired(loops_from(sampler.draw(), domain, WIRED)), phi)
    rec, _ = extract_driving(z, h_min=delta, t_max=0.5)
    j = int(rec.index[-1])
    mc = theta_montecarlo(z.z[:j + 1], float(z.z[0].real), walkers=50_000, seed=i)
    print(f"path {i}: t = {rec.times[-1]:.3f}  zipper theta = {rec.theta[-1]:.3f}"
          f"  walk-on-spheres theta = {mc['value']:.3f} +- {mc['stderr']:.3f}")
