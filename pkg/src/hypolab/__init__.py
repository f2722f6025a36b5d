"""Numerical experiments on observability of hypoelliptic heat and wave equations.

The modules build bottom-up:

``numerics``        tridiagonal eigensolvers, RK4, tanh-sinh quadrature, log-linear fits
``spectral``        Grushin eigenbases, spectral vectors, functional calculus, Gramians
``geometry``        sub-Riemannian Hamiltonian flows, shooting distances
``evolution``       exact modal heat and wave propagation, restricted norms
``transmutation``   the heat-to-wave integral ``I(T, lambda)``
``observability``   tunnelling fits, Gramian costs, interpolation tradeoffs
``config``, ``cli`` experiment files and the ``hypolab`` command
"""

__version__ = "0.1.0"

from .errors import ConvergenceError, DistanceError, HypolabError, IntegrationError, QuadratureError
from .evolution import ObservationRegion, WaveState, heat_evolve, wave_energy, wave_evolve
from .spectral import OperatorSpec, SpectralBasis, SpectralVector, build_basis
from .transmutation import TransmuteParams

__all__ = [
    "ConvergenceError",
    "DistanceError",
    "HypolabError",
    "IntegrationError",
    "QuadratureError",
    "ObservationRegion",
    "OperatorSpec",
    "SpectralBasis",
    "SpectralVector",
    "TransmuteParams",
    "WaveState",
    "build_basis",
    "heat_evolve",
    "wave_energy",
    "wave_evolve",
]
