"""Normal geodesics of the Grushin plane and the Heisenberg group.

Geodesics are projections of Hamiltonian trajectories of
ell(x, xi) = sum_i <xi, X_i(x)>^2 on the level ell = 1/4, which makes them
unit speed. We check conservation, the order of RK4 and the identity
g(v) = 4 ell relating the metric of the velocity to the Hamiltonian, then
estimate a sub-Riemannian distance by shooting.
"""

import numpy as np

from hypolab.geometry import (
    CotangentState,
    distance_to_set,
    flow_geodesic,
    grushin,
    heisenberg,
    normalize_covector,
)

rng = np.random.default_rng(1)
for sys in (grushin(1), heisenberg()):
    x = rng.uniform(-0.5, 0.5, sys.dim)
    st = CotangentState(x, normalize_covector(sys, x, rng.standard_normal(sys.dim)))
    path = flow_geodesic(sys, st, 5.0, 1e-3)
    ref = flow_geodesic(sys, st, 2.0, 1e-3, method="rk45").x[-1]
    e1 = np.abs(flow_geodesic(sys, st, 2.0, 0.1).x[-1] - ref).max()
    e2 = np.abs(flow_geodesic(sys, st, 2.0, 0.05).x[-1] - ref).max()
    print(f"{sys.name:12s} drift over S=5: {path.drift:.2e}   RK4 error ratio: {e1 / e2:.2f}")

# distance from a point on the singular line to the strip x1 >= 0.3:
# purely horizontal motion in x1 reaches it at length 0.3
g = grushin(1)
omega = [(0.3, np.inf), None]
for shots in (16, 64, 256):
    r = distance_to_set(g, [0.0, 0.5], omega, shots=shots, S_max=1.0)
    print(f"shots={shots:4d}  d_est={r.d_est:.8f}")

# A caveat on fixed-step RK4. On the Heisenberg group the horizontal velocity
# turns at a rate proportional to the vertical covector xi_3, so energy drift
# at step 1e-3 grows roughly like xi_3^6.
x = np.array([0.1, -0.2, 0.0])
h = heisenberg()
print("\n xi_3   drift over S=5")
for z in (0.5, 1.0, 2.0, 3.0, 4.0, 5.0):
    xi = normalize_covector(h, x, [0.5 - 2 * x[1] * z, 2 * x[0] * z, z])
    print(f"{z:5.1f}   {flow_geodesic(h, CotangentState(x, xi), 5.0, 1e-3).drift:.2e}")
