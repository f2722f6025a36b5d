"""Cost of observing the Grushin heat equation from a strip.

On the span E_lam of eigenmodes below lam the observability cost is the inverse
of the smallest eigenvalue of the Gramian

    G_ij = int_0^T int_omega e^{-(lam_i + lam_j) t} phi_i phi_j.

For gamma = 1 the cost grows like exp(c lam) with c close to the tunnelling
exponent a^2: the worst data are exactly the ground modes hiding near x1 = 0.
"""

import numpy as np

from hypolab.evolution import ObservationRegion
from hypolab.observability import lowfreq_cost_experiment, parabolic_tradeoff_experiment
from hypolab.spectral import OperatorSpec, build_basis

omega = ObservationRegion((0.3, 0.9))
basis = build_basis(OperatorSpec(gamma=1, grid_n=1025, fourier_max=100, branch_max=8,
                                 lambda_cutoff=300, threads=4))
rep = lowfreq_cost_experiment(basis, omega, 1.0, np.arange(40.0, 301.0, 20.0))
print("lambda  dim        cost")
for lam, d, c in zip(rep.lambdas, rep.extras["dims"], rep.extras["cost"]):
    print(f"{lam:6.0f}  {d:3d}  {c:10.4e}")
print(f"fitted exponent: {rep.fitted_exponent:.4f} (without last point: {rep.extras['exponent_drop_last']:.4f})")

# Beyond finite-dimensional spaces the heat equation is only approximately
# observable: D |y(T)|^2 <= eps^-beta int int_omega |y|^2 + eps |y(0)|^2.
# The smallest admissible beta falls as the horizon T grows.
rows, info = parabolic_tradeoff_experiment(basis, omega, [0.1, 0.2, 0.4, 0.8, 1.6], 0.02, random_count=100)
print(f"\nthreshold T0 ~ {info['T0']:.4f}")
for T, beta, _, _ in rows:
    print(f"T={T:4.1f}  beta_min={beta:.4f}")
