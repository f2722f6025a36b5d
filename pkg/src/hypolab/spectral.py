"""Eigenbasis of Grushin-type operators and the spectral calculus built on it.

The operator ``L = -(d^2/dx1^2 + V(x1) d^2/dx2^2)`` separates in ``x2``. For each
``x2``-frequency ``w`` the one-dimensional operator ``-f'' + w^2 V(x1) f`` on
``(-1, 1)`` with Dirichlet ends is discretized by central differences, giving a
symmetric tridiagonal eigenproblem.

Families
--------
``grushin_rectangle``
    ``V = x1^(2 gamma)`` on ``[-1,1] x [0,1]``, Dirichlet on every side;
    ``x2``-factor ``sqrt(2) sin(n pi x2)``, ``n >= 1``.
``grushin_torus``
    ``V = sin(pi x1 / 2)^(2 gamma)``, Dirichlet in ``x1`` and periodic in ``x2``
    with period 1. Frequencies are ``2 pi n``: index ``n > 0`` carries
    ``sqrt(2) cos(2 pi n x2)``, ``n < 0`` carries ``sqrt(2) sin(2 pi |n| x2)`` and
    ``n = 0`` the constant. Note the factor 2 against the rectangle's ``n pi``.
``elliptic``
    The Dirichlet Laplacian on the rectangle (``gamma = 0``).
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ConvergenceError
from .numerics import DEFAULT_TOLERANCES, TridiagonalSymmetric, eigen_tridiag

log = logging.getLogger(__name__)

FAMILIES = ("grushin_rectangle", "grushin_torus", "elliptic")


@dataclass(frozen=True)
class OperatorSpec:
    family: str = "grushin_rectangle"
    gamma: int = 1
    grid_n: int = 1025
    fourier_max: int = 16
    branch_max: int = 1
    lambda_cutoff: float | None = None
    # explicit list of x2 indices (overrides 1..fourier_max), e.g. a geometric sweep
    fourier_indices: tuple[int, ...] | None = None
    threads: int = 1
    eigen_residual: float = DEFAULT_TOLERANCES["eigen_residual"]

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family: unknown family {self.family!r}")
        if not isinstance(self.gamma, (int, np.integer)) or self.gamma < 0:
            raise ValueError(f"gamma: must be a nonnegative integer, got {self.gamma!r}")
        if self.family == "elliptic" and self.gamma != 0:
            raise ValueError("gamma: elliptic family requires gamma = 0")
        g = self.grid_n - 1
        if self.grid_n < 129 or g & (g - 1):
            raise ValueError(f"grid_n: must be 2^p + 1 >= 129, got {self.grid_n}")
        if self.fourier_max < 1:
            raise ValueError("fourier_max: must be >= 1")
        if self.branch_max < 1:
            raise ValueError("branch_max: must be >= 1")
        if self.threads < 1:
            raise ValueError("threads: must be >= 1")
        if not self.eigen_residual > 0:
            raise ValueError("eigen_residual: must be positive")
        if self.fourier_indices is not None:
            idx = tuple(int(n) for n in self.fourier_indices)
            if not idx or min(idx) < (0 if self.family == "grushin_torus" else 1):
                raise ValueError("fourier_indices: invalid index list")
            object.__setattr__(self, "fourier_indices", tuple(sorted(set(idx))))

    @property
    def k(self) -> int:
        """Hypoellipticity index (bracket depth needed to span)."""
        return self.gamma + 1

    @property
    def x2_period_factor(self) -> float:
        return 2.0 * math.pi if self.family == "grushin_torus" else math.pi

    def frequency(self, n) -> np.ndarray:
        return self.x2_period_factor * np.abs(np.asarray(n, dtype=float))

    def potential(self, x1) -> np.ndarray:
        x1 = np.asarray(x1, dtype=float)
        if self.family == "grushin_torus":
            base = np.sin(0.5 * math.pi * x1)
        else:
            base = x1
        return base ** (2 * self.gamma) if self.gamma else np.ones_like(x1)

    def indices(self) -> tuple[int, ...]:
        if self.fourier_indices is not None:
            return self.fourier_indices
        start = 0 if self.family == "grushin_torus" else 1
        return tuple(range(start, self.fourier_max + 1))


@dataclass(frozen=True)
class Mode:
    fourier_n: int
    branch: int
    lam: float
    profile: np.ndarray = field(repr=False)


class SpectralBasis:
    """Modes of an operator sorted by eigenvalue (ties by index, branch)."""

    def __init__(self, spec: OperatorSpec, modes: Sequence[Mode]):
        self.spec = spec
        self.modes = sorted(modes, key=lambda m: (m.lam, abs(m.fourier_n), m.fourier_n, m.branch))

    def __len__(self):
        return len(self.modes)

    @cached_property
    def x1(self) -> np.ndarray:
        return np.linspace(-1.0, 1.0, self.spec.grid_n)

    @property
    def h(self) -> float:
        return 2.0 / (self.spec.grid_n - 1)

    @cached_property
    def lambdas(self) -> np.ndarray:
        return np.array([m.lam for m in self.modes])

    @cached_property
    def fourier_n(self) -> np.ndarray:
        return np.array([m.fourier_n for m in self.modes], dtype=int)

    @cached_property
    def branches(self) -> np.ndarray:
        return np.array([m.branch for m in self.modes], dtype=int)

    @cached_property
    def profiles(self) -> np.ndarray:
        """Profiles stacked as rows, shape (modes, grid_n)."""
        if not self.modes:
            return np.zeros((0, self.spec.grid_n))
        return np.vstack([m.profile for m in self.modes])

    @cached_property
    def _spline(self):
        return CubicSpline(self.x1, self.profiles.T, axis=0)

    def profiles_at(self, x) -> np.ndarray:
        """Profiles evaluated at arbitrary ``x1`` points, shape (len(x), modes)."""
        return self._spline(np.asarray(x, dtype=float))

    def x2_factors(self, x2) -> np.ndarray:
        """``x2``-factors of every mode at the given points, shape (len(x2), modes)."""
        amp, omega, phase = self._x2_params()
        return amp * np.cos(np.outer(x2, omega) - phase)

    def _x2_params(self):
        n = self.fourier_n
        omega = self.spec.frequency(n)
        if self.spec.family == "grushin_torus":
            amp = np.where(n == 0, 1.0, math.sqrt(2.0))
            phase = np.where(n < 0, 0.5 * math.pi, 0.0)
        else:
            amp = np.full(n.shape, math.sqrt(2.0))
            phase = np.full(n.shape, 0.5 * math.pi)
        return amp, omega, phase

    def subset(self, idx) -> "SpectralBasis":
        idx = np.asarray(idx)
        if idx.dtype == bool:
            idx = np.nonzero(idx)[0]
        out = SpectralBasis(self.spec, [self.modes[i] for i in idx])
        return out

    def below(self, lam_max: float) -> "SpectralBasis":
        """Modes spanning ``E_lam = span{phi_j : lam_j <= lam_max}``."""
        return self.subset(self.lambdas <= lam_max)

    def ground_modes(self) -> "SpectralBasis":
        return self.subset(self.branches == 1)

    def index_of(self, fourier_n: int, branch: int) -> int:
        hit = np.nonzero((self.fourier_n == fourier_n) & (self.branches == branch))[0]
        if not hit.size:
            raise KeyError((fourier_n, branch))
        return int(hit[0])


# ---------------------------------------------------------------------------
# basis construction
# ---------------------------------------------------------------------------

def _scaled_matrix(spec: OperatorSpec, freq: float, grid_n: int):
    x = np.linspace(-1.0, 1.0, grid_n)
    h = x[1] - x[0]
    xi = x[1:-1]
    # h^2 * A keeps entries O(1), which keeps eigen residuals at rounding level
    d = 2.0 + h * h * freq * freq * spec.potential(xi)
    e = -np.ones(grid_n - 3)
    return TridiagonalSymmetric(d, e), h


def _refine_tails(v: np.ndarray, d: np.ndarray, mu: np.ndarray, thr: float = 1e-6):
    """Recompute the small tails of eigenvectors by inward recurrence.

    Inverse-iteration vectors carry absolute errors near machine epsilon, so
    components far below that are noise. Recursing the eigen-equation inward
    from the Dirichlet end grows the decaying solution, which is stable, and
    restores relative accuracy deep into the tails.
    """
    v = v.copy()
    for side in (1, -1):
        w_view = v[::side]
        dd = d[::side]
        for c in range(v.shape[1]):
            col = w_view[:, c]
            big = np.nonzero(np.abs(col) > thr * np.abs(col).max())[0]
            m = int(big[-1])
            if m >= col.size - 2:
                continue
            n = col.size
            w = np.zeros(n + 1)
            w[n - 1] = 1.0
            for i in range(n - 1, m, -1):
                w[i - 1] = (dd[i] - mu[c]) * w[i] - w[i + 1]
                if abs(w[i - 1]) > 1e200:
                    w[i - 1:] *= 1e-200
            col[m:] = w[m:n] * (col[m] / w[m])
    return v


def _solve_one(spec: OperatorSpec, n: int, count: int):
    freq = float(spec.frequency(n))
    coarse_n = (spec.grid_n - 1) // 2 + 1
    count = min(count, spec.grid_n - 2, coarse_n - 2)
    try:
        mf, h = _scaled_matrix(spec, freq, spec.grid_n)
        mu_f, vf = eigen_tridiag(mf, count, residual_tol=spec.eigen_residual)
        mc, hc = _scaled_matrix(spec, freq, coarse_n)
        mu_c, _ = eigen_tridiag(mc, count, residual_tol=spec.eigen_residual)
    except ConvergenceError as exc:
        raise ConvergenceError(f"eigensolver failed for n={n}, branch={exc.index + 1}",
                               index=(n, exc.index + 1)) from exc
    lam_f = mu_f / h**2
    lam_c = mu_c / hc**2
    lam = (4.0 * lam_f - lam_c) / 3.0
    vf = _refine_tails(vf, mf.diag, mu_f)
    prof = np.zeros((spec.grid_n, count))
    prof[1:-1] = vf
    # Dirichlet ends are zero, so trapezoid weights reduce to h * sum
    prof /= np.sqrt(h * np.sum(prof**2, axis=0))
    return lam, prof


def build_basis(spec: OperatorSpec) -> SpectralBasis:
    """Eigenmodes ``(lam, v)`` for every x2-index and branch of ``spec``.

    Eigenvalues are Richardson-extrapolated from ``grid_n`` and ``grid_n//2+1``
    points; profiles come from the fine grid, normalized in trapezoid ``L^2``.
    """
    indices = spec.indices()

    def job(n):
        return n, _solve_one(spec, n, spec.branch_max)

    if spec.threads > 1:
        with ThreadPoolExecutor(max_workers=spec.threads) as pool:
            results = list(pool.map(job, indices))
    else:
        results = [job(n) for n in indices]

    modes = []
    for n, (lam, prof) in results:
        signs = (n, -n) if (spec.family == "grushin_torus" and n > 0) else (n,)
        for b in range(lam.size):
            if spec.lambda_cutoff is not None and lam[b] > spec.lambda_cutoff:
                continue
            for sn in signs:
                modes.append(Mode(int(sn), b + 1, float(lam[b]), prof[:, b]))
    return SpectralBasis(spec, modes)


# ---------------------------------------------------------------------------
# spectral vectors and the functional calculus
# ---------------------------------------------------------------------------

@dataclass
class SpectralVector:
    basis: SpectralBasis
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs)
        if not np.iscomplexobj(c):
            c = c.astype(float)
        if c.shape != (len(self.basis),):
            raise ValueError(f"expected {len(self.basis)} coefficients, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        self.coeffs = c

    @classmethod
    def zeros(cls, basis):
        return cls(basis, np.zeros(len(basis)))

    @classmethod
    def mode(cls, basis, j, value=1.0):
        c = np.zeros(len(basis))
        c[j] = value
        return cls(basis, c)

    @classmethod
    def random(cls, basis, rng, scale=None):
        c = rng.standard_normal(len(basis))
        if scale is not None:
            c *= scale
        return cls(basis, c)

    def __add__(self, other):
        _check_same(self, other)
        return SpectralVector(self.basis, self.coeffs + other.coeffs)

    def __sub__(self, other):
        _check_same(self, other)
        return SpectralVector(self.basis, self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return SpectralVector(self.basis, self.coeffs * scalar)

    __rmul__ = __mul__


def _check_same(u, v):
    if u.basis is not v.basis:
        raise ValueError("spectral vectors live on different bases")


def _eval_symbol(f, lam):
    try:
        out = np.asarray(f(lam))
        if out.shape != lam.shape:
            out = np.broadcast_to(out, lam.shape)
    except (TypeError, ValueError):
        out = np.array([f(x) for x in lam])
    return out


def apply_calculus(u: SpectralVector, f: Callable) -> SpectralVector:
    """``f(L)u``: multiply coefficient ``j`` by ``f(lam_j)``."""
    with np.errstate(all="ignore"):
        vals = _eval_symbol(f, u.basis.lambdas)
    bad = np.nonzero(~np.isfinite(vals))[0]
    if bad.size:
        j = int(bad[0])
        raise ValueError(f"f(lambda_{j}) = {vals[j]} is not finite (lambda={u.basis.lambdas[j]:.6g})")
    return SpectralVector(u.basis, vals * u.coeffs)


def hsl_norm(u: SpectralVector, s: float) -> float:
    """``||(1+L)^(s/2) u||``."""
    return float(np.sqrt(np.sum((1.0 + u.basis.lambdas) ** s * np.abs(u.coeffs) ** 2)))


def gevrey_norm(u: SpectralVector, alpha: float, theta: float,
                exponent_limit: float = 700.0) -> float:
    """``(sum_j exp(2 theta lam_j^alpha) |u_j|^2)^(1/2)``.

    The weight is guarded on the support of ``u``: ``theta * lam_max^alpha`` may
    not exceed ``exponent_limit``.
    """
    lam = u.basis.lambdas
    c = np.abs(u.coeffs)
    support = c > 0
    if not np.any(support):
        return 0.0
    expo = theta * lam[support] ** alpha
    if expo.max() > exponent_limit:
        lam_max = float(lam[support].max())
        raise OverflowError(
            f"gevrey weight overflow: theta*lambda_max^alpha = {expo.max():.4g} "
            f"> {exponent_limit} (lambda_max={lam_max:.6g})")
    logs = 2.0 * expo + 2.0 * np.log(c[support])
    top = logs.max()
    return float(np.exp(0.5 * top) * np.sqrt(np.sum(np.exp(logs - top))))


def frequency_function(u: SpectralVector, sigma: float) -> float:
    """Typical frequency ``||u||_{H^sigma_L} / ||u||``."""
    base = hsl_norm(u, 0.0)
    if base == 0.0:
        raise ValueError("frequency function undefined for the zero vector")
    return hsl_norm(u, sigma) / base


def jensen_check(u: SpectralVector, F: Callable, G: Callable) -> tuple[float, float]:
    """Both sides of ``G(||u||_F^2/||u||^2) ||u|| <= ||G(F(L)) u||``.

    ``G**2`` must be convex on the range of ``F``; the caller asserts the order.
    """
    norm = hsl_norm(u, 0.0)
    if norm == 0.0:
        raise ValueError("Jensen check undefined for the zero vector")
    lam = u.basis.lambdas
    weights = np.abs(u.coeffs) ** 2
    Fl = _eval_symbol(F, lam)
    mean_F = float(np.sum(Fl * weights)) / norm**2
    lhs = float(G(mean_F)) * norm
    rhs = float(np.sqrt(np.sum(_eval_symbol(G, Fl) ** 2 * weights)))
    return lhs, rhs


# ---------------------------------------------------------------------------
# physical space
# ---------------------------------------------------------------------------

def sample_on_grid(u: SpectralVector, nx1: int, nx2: int) -> np.ndarray:
    """Values of ``sum_j u_j v_j(x1) psi_j(x2)`` on a uniform tensor grid.

    Rows follow ``x1 = linspace(-1, 1, nx1)``, columns ``x2 = linspace(0, 1, nx2)``.
    """
    if nx1 < 2 or nx2 < 2:
        raise ValueError("grid sizes must be >= 2")
    basis = u.basis
    x1 = np.linspace(-1.0, 1.0, nx1)
    x2 = np.linspace(0.0, 1.0, nx2)
    if nx1 == basis.spec.grid_n:
        p = basis.profiles.T
    else:
        p = basis.profiles_at(x1)
    return (p * u.coeffs) @ basis.x2_factors(x2).T


def _x1_nodes(basis: SpectralBasis, a: float, b: float, quad_nx: int):
    """Trapezoid nodes/weights on [a, b] and profile values there."""
    x = basis.x1
    h = basis.h
    ia = (a + 1.0) / h
    ib = (b + 1.0) / h
    on_grid = abs(ia - round(ia)) < 1e-9 and abs(ib - round(ib)) < 1e-9
    if on_grid and int(round(ib)) - int(round(ia)) + 1 >= quad_nx:
        sl = slice(int(round(ia)), int(round(ib)) + 1)
        nodes = x[sl]
        vals = basis.profiles[:, sl].T
    else:
        count = max(quad_nx, 2 * int(math.ceil((b - a) / h)) + 1)
        nodes = np.linspace(a, b, count)
        vals = basis.profiles_at(nodes)
    w = np.full(nodes.size, nodes[1] - nodes[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    return w, vals


def _int_cos(c, phase, a, b):
    """Integral of cos(c x - phase) over [a, b], smooth as c -> 0."""
    delta = b - a
    mid = 0.5 * (a + b)
    return delta * np.cos(c * mid - phase) * np.sinc(c * delta / (2.0 * math.pi))


def x2_overlap(basis: SpectralBasis, x2_range: tuple[float, float]) -> np.ndarray:
    """Closed-form ``int psi_i psi_j dx2`` over ``x2_range`` for all mode pairs."""
    a, b = x2_range
    amp, omega, phase = basis._x2_params()
    dw = omega[:, None] - omega[None, :]
    sw = omega[:, None] + omega[None, :]
    dp = phase[:, None] - phase[None, :]
    sp = phase[:, None] + phase[None, :]
    prod = 0.5 * np.outer(amp, amp)
    return prod * (_int_cos(dw, dp, a, b) + _int_cos(sw, sp, a, b))


def spatial_gram(basis: SpectralBasis, x1_range, x2_range, quad_nx: int = 64,
                 shortcut: bool = True) -> np.ndarray:
    """``S_ij = int_omega phi_i phi_j`` over the box ``x1_range x x2_range``.

    Exact in ``x2``, trapezoid in ``x1``. When the box spans the whole ``x2``
    period and ``shortcut`` is set, distinct ``x2`` indices are orthogonal and
    their entries are set to zero without evaluation.
    """
    a, b = map(float, x1_range)
    w, vals = _x1_nodes(basis, a, b, quad_nx)
    s1 = (vals * w[:, None]).T @ vals
    full = abs(x2_range[0]) < 1e-15 and abs(x2_range[1] - 1.0) < 1e-15
    if full and shortcut:
        same = basis.fourier_n[:, None] == basis.fourier_n[None, :]
        return np.where(same, s1, 0.0)
    return s1 * x2_overlap(basis, x2_range)


def restricted_mass(basis: SpectralBasis, x1_range, x2_range, quad_nx: int = 64) -> np.ndarray:
    """``||phi_j||^2_{L^2(omega)}`` for every mode (diagonal of the spatial Gram)."""
    a, b = map(float, x1_range)
    w, vals = _x1_nodes(basis, a, b, quad_nx)
    s1 = np.einsum("k,kj,kj->j", w, vals, vals)
    amp, omega, phase = basis._x2_params()
    c, d = x2_range
    x2 = 0.5 * amp**2 * (_int_cos(np.zeros_like(omega), 0.0, c, d)
                        + _int_cos(2 * omega, 2 * phase, c, d))
    return s1 * x2


# ---------------------------------------------------------------------------
# flat-torus subelliptic ratio
# ---------------------------------------------------------------------------

def _torus_trial(rng, gamma, band, nx1, nx2, localized):
    q_lo, q_hi = band
    x1 = np.linspace(-1.0, 1.0, nx1, endpoint=False)
    x2 = np.linspace(0.0, 1.0, nx2, endpoint=False)
    nq = int(rng.integers(1, 4))
    qs = rng.integers(q_lo, q_hi, size=nq)
    u = np.zeros((nx1, nx2))
    for q in qs:
        phase2 = rng.uniform(0, 2 * math.pi)
        wave2 = np.cos(2 * math.pi * q * x2 - phase2)
        if localized:
            # wave packet at the natural anisotropic scale: 1/w^2 ~ q^2 w^(2 gamma)
            width = (2 * math.pi * q) ** (-1.0 / (gamma + 1)) * rng.uniform(0.5, 2.0)
            center = rng.uniform(-1.0, 1.0) * width
            r = (x1 - center + 1.0) % 2.0 - 1.0  # periodic offset on R/2Z
            osc = rng.uniform(0.0, 2.0)
            prof = np.exp(-0.5 * (r / width) ** 2) * np.cos(osc * r / width + rng.uniform(0, 2 * math.pi))
        else:
            pmax = max(1, int(2 * q))
            ps = np.arange(-pmax, pmax + 1)
            coef = rng.standard_normal(ps.size) + 1j * rng.standard_normal(ps.size)
            prof = np.real(np.exp(1j * math.pi * np.outer(x1, ps)) @ coef)
        u += np.outer(prof, wave2)
    return u


def _torus_ratio(u, gamma):
    nx1, nx2 = u.shape
    area = 2.0
    uh = np.fft.fft2(u) / u.size
    # drop the Nyquist row/column: its derivative is not a real field, so both
    # sides are evaluated on the band-limited projection of u
    if nx1 % 2 == 0:
        uh[nx1 // 2, :] = 0.0
    if nx2 % 2 == 0:
        uh[:, nx2 // 2] = 0.0
    p = np.fft.fftfreq(nx1, d=1.0 / nx1)
    q = np.fft.fftfreq(nx2, d=1.0 / nx2)
    k1 = math.pi * p[:, None]
    k2 = 2 * math.pi * q[None, :]
    power = np.abs(uh) ** 2
    l2 = area * power.sum()
    num = area * np.sum((1.0 + k1**2 + k2**2) ** (1.0 / (gamma + 1)) * power)
    x1 = np.linspace(-1.0, 1.0, nx1, endpoint=False)
    d1 = np.real(np.fft.ifft2(1j * k1 * uh)) * u.size
    d2 = np.real(np.fft.ifft2(1j * k2 * uh)) * u.size
    weight = np.sin(0.5 * math.pi * x1) ** (2 * gamma) if gamma else np.ones(nx1)
    fields = area * (np.mean(d1**2) + np.mean(weight[:, None] * d2**2))
    return num / (fields + l2)


def subelliptic_ratio(spec: OperatorSpec, trial_count: int, band=(4, 8), seed: int = 0,
                      nx1: int = 256, nx2: int | None = None,
                      localized_fraction: float = 0.5) -> np.ndarray:
    """Ratios ``||u||^2_{H^{1/k}} / (sum_i ||X_i u||^2 + ||u||^2)`` on the flat torus.

    Trials are real trigonometric polynomials whose ``x2``-frequencies lie in
    ``band``. A ``localized_fraction`` of them concentrate near the degenerate
    line ``x1 = 0`` at the operator's natural anisotropic scale, the rest are
    spread over all of ``x1``. Sobolev norms use the flat Fourier weights
    ``(1 + |xi|^2)^s`` on ``(R/2Z) x (R/Z)``; the fields are applied pointwise.
    """
    if spec.family != "grushin_torus":
        raise ValueError("subelliptic_ratio needs the grushin_torus family")
    if nx2 is None:
        nx2 = max(64, 4 * int(band[1]))
    rng = np.random.default_rng(seed)
    out = np.empty(trial_count)
    for t in range(trial_count):
        loc = rng.uniform() < localized_fraction
        u = _torus_trial(rng, spec.gamma, band, nx1, nx2, loc)
        out[t] = _torus_ratio(u, spec.gamma)
    return out


def torus_ratio(u: np.ndarray, gamma: int) -> float:
    """Subelliptic ratio of a single field sampled on the periodic grid."""
    return float(_torus_ratio(np.asarray(u, dtype=float), gamma))


# ---------------------------------------------------------------------------
# plain-text basis files
# ---------------------------------------------------------------------------

_HEADER = "# hypolab basis v1"


def save_basis(basis: SpectralBasis, path) -> None:
    """Write one line per mode: ``n branch lambda profile...`` (``%.17g``)."""
    s = basis.spec
    idx = "" if s.fourier_indices is None else ",".join(map(str, s.fourier_indices))
    cutoff = "" if s.lambda_cutoff is None else "%.17g" % s.lambda_cutoff
    lines = [
        _HEADER,
        f"# family={s.family} gamma={s.gamma} grid_n={s.grid_n} fourier_max={s.fourier_max} "
        f"branch_max={s.branch_max} lambda_cutoff={cutoff} fourier_indices={idx}",
    ]
    for m in basis.modes:
        vals = " ".join("%.17g" % v for v in m.profile)
        lines.append(f"{m.fourier_n} {m.branch} {'%.17g' % m.lam} {vals}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_basis(path) -> SpectralBasis:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text or text[0].strip() != _HEADER:
        raise ValueError(f"{path}: not a basis file")
    fields = dict(kv.split("=", 1) for kv in text[1].lstrip("# ").split())
    spec = OperatorSpec(
        family=fields["family"],
        gamma=int(fields["gamma"]),
        grid_n=int(fields["grid_n"]),
        fourier_max=int(fields["fourier_max"]),
        branch_max=int(fields["branch_max"]),
        lambda_cutoff=float(fields["lambda_cutoff"]) if fields["lambda_cutoff"] else None,
        fourier_indices=(tuple(int(v) for v in fields["fourier_indices"].split(","))
                         if fields["fourier_indices"] else None),
    )
    modes = []
    for lineno, line in enumerate(text[2:], start=3):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 3 + spec.grid_n:
            raise ValueError(f"{path}:{lineno}: expected {3 + spec.grid_n} fields")
        modes.append(Mode(int(parts[0]), int(parts[1]), float(parts[2]),
                          np.array([float(v) for v in parts[3:]])))
    return SpectralBasis(spec, modes)
