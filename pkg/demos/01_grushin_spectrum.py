"""Spectrum of the Grushin operator.

The operator -(d_x1^2 + x1^(2 gamma) d_x2^2) on [-1, 1] x [0, 1] separates in x2.
For the n-th sine mode in x2 one is left with the 1D problem

    -v'' + (n pi)^2 x1^(2 gamma) v = lam v,    v(-1) = v(1) = 0,

an anharmonic oscillator whose ground energy grows like n^(2/(1+gamma)).
For gamma = 0 we recover the Dirichlet Laplacian, which gives an exact check.
"""

import math

import numpy as np

from hypolab.numerics import fit_loglinear
from hypolab.spectral import OperatorSpec, build_basis

# --- sanity check first: the flat Laplacian -----------------------------------
flat = build_basis(OperatorSpec("elliptic", 0, grid_n=4097, fourier_max=20, branch_max=5, threads=4))
exact = (flat.branches * math.pi / 2) ** 2 + (flat.fourier_n * math.pi) ** 2
print(f"Laplacian: {len(flat)} modes, worst relative error {np.max(np.abs(flat.lambdas / exact - 1)):.2e}")

# --- gamma = 1: the harmonic oscillator regime ----------------------------------
# for large n the ground state sits in a well of width ~ n^(-1/2), far from the
# walls, so lam_{n,1} ~ n pi (the oscillator ground energy sqrt of (n pi)^2)
b1 = build_basis(OperatorSpec(gamma=1, grid_n=2049, fourier_indices=tuple(range(10, 81)), threads=4))
ratio = b1.lambdas / (math.pi * b1.fourier_n)
print(f"gamma=1: lam/(n pi) in [{ratio.min():.6f}, {ratio.max():.6f}] for n = 10..80")

# --- growth exponents -----------------------------------------------------------
print("\ngamma  fitted  2/(1+gamma)")
for gamma in (1, 2, 3):
    b = build_basis(OperatorSpec(gamma=gamma, grid_n=2049, fourier_max=100, threads=4))
    fit = fit_loglinear(np.log(b.fourier_n), np.log(b.lambdas))
    print(f"{gamma:5d}  {fit.slope:6.4f}  {2 / (1 + gamma):6.4f}")

# the fit over n <= 100 is slightly below the limit because the low n are still
# influenced by the walls at x1 = +-1
