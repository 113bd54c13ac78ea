"""Excursions of theta for an SLE(16/3, -2/3) driver.

theta / sqrt(kappa) is a Bessel process of dimension 3/2 started at 0. Cut it into
excursions above eps (first exceedance T_k, next boundary hit S_k) and compare the
law of the maxima with the scale function: P[max >= M | start at eps] = sqrt(eps / M).
"""
import numpy as np

from fksle.bessel import hitting_probability
from fksle.excursions import excursion_statistics, synthetic_records

kappa, eps = 16 / 3, 0.1
records = synthetic_records(kappa, eps, delta=1e-6, dt=1e-4, T=1.0, runs=100, seed=5)
st = excursion_statistics(records, M=[0.2, 0.4, 0.8], n_perm=199)
print(f"{st['count']} excursions above eps = {eps} ({st['complete']} returned to 0)")
for row in st["hitting"]:
    print(f"  P[max >= {row['M']:.1f}]  empirical {row['empirical']:.3f} +- {row['stderr']:.3f}"
          f"  predicted {row['predicted']:.3f}")
if "independence" in st:
    ind = st["independence"]
    print(f"first excursion vs history before it: distance correlation {ind['dcor']:.3f}, p = {ind['p']:.2f}")

p, se, _ = hitting_probability(1.5, eps / np.sqrt(kappa), 1.0, paths=50_000, seed=1)
print(f"Bessel(3/2) from {eps / np.sqrt(kappa):.3f}: P[reach 1 before 0] = {p:.4f} +- {se:.4f}"
      f" (exact {np.sqrt(eps / np.sqrt(kappa)):.4f})")
