"""How much of a Grushin eigenfunction reaches a strip away from x1 = 0?

Ground modes concentrate near the degenerate line. Their mass in
omega = (a, b) x (0, 1) decays like exp(-a^2 n pi) / (2 a pi sqrt(n)) for gamma = 1:
exponentially small in the eigenvalue lam ~ n pi. This is the mechanism that
makes observability from omega expensive.
"""

import numpy as np

from hypolab.evolution import ObservationRegion
from hypolab.observability import tunneling_experiment
from hypolab.spectral import OperatorSpec, build_basis

omega = ObservationRegion((0.3, 0.9))
basis = build_basis(OperatorSpec(gamma=1, grid_n=2049, fourier_indices=tuple(range(20, 81)), threads=4))
rep = tunneling_experiment(basis, omega)

print("  n      lambda          mass   mass / law")
e = rep.extras
for n, lam, m, r in list(zip(e["fourier_n"], rep.lambdas, e["masses"], e["prefactor_ratio"]))[::10]:
    print(f"{n:3d}  {lam:10.4f}  {m:12.4e}  {r:9.4f}")

print(f"\nfitted exponent of -log(mass) in lambda: {e['exponent_in_lambda']:.4f}  (a^2 = 0.09)")

# for gamma = 2 the decay is exp(-c lam^(3/2)); compare fits in lam^p
ns = tuple(int(n) for n in np.unique(np.geomspace(2, 2000, 40).astype(int)))
b2 = build_basis(OperatorSpec(gamma=2, grid_n=2049, fourier_indices=ns, threads=4))
r2 = tunneling_experiment(b2, ObservationRegion((0.4, 0.9))).extras["r2_by_power"]
print("gamma=2, r^2 of -log(mass) against lam^p:", {p: round(v, 5) for p, v in r2.items()})
