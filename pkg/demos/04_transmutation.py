"""From heat to waves through the integral I(T, lam).

A heat solution e^{-tL} y0 is mapped to wave data (0, I(T, L) y0) with

    I(T, lam) = int_0^T exp(-alpha (1/t + 1/(T - t)) - lam t) dt.

Laplace's method gives I ~ sqrt(pi) alpha^(1/4) lam^(-3/4) e^{-alpha/T} e^{-2 sqrt(alpha lam)}.
Here we look at how fast the ratio approaches one.
"""

import math

import numpy as np

from hypolab.transmutation import TransmuteParams, laplace_sweep

p = TransmuteParams(T=1.0, S=0.5, alpha=1.0)
sw = laplace_sweep(p, np.geomspace(1e2, 1e6, 9))
print("      lambda     log I_num    ratio   (ratio-1) sqrt(lam)")
for lam, li, r in zip(sw.lambdas, sw.log_I, sw.ratio):
    print(f"{lam:12.4g}  {li:12.4f}  {r:.6f}  {(r - 1) * math.sqrt(lam):9.5f}")

# the last column settles near -13/16: the leading correction decays like
# lam^(-1/2), faster than the lam^(-1/4) one might budget for
print(f"\nslope of log|ratio - 1| vs log lam: {sw.correction_exponent:.3f}")
