"""Spectral heat and wave evolution, energies and space-time norms on observation sets."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .spectral import SpectralBasis, SpectralVector, _int_cos, sample_on_grid, spatial_gram


@dataclass(frozen=True)
class ObservationRegion:
    x1_range: tuple[float, float] = (-1.0, 1.0)
    x2_range: tuple[float, float] = (0.0, 1.0)
    t_range: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        for name, (lo, hi), box in (("x1_range", self.x1_range, (-1.0, 1.0)),
                                    ("x2_range", self.x2_range, (0.0, 1.0))):
            if not lo < hi:
                raise ValueError(f"{name}: empty range ({lo}, {hi})")
            if lo < box[0] - 1e-12 or hi > box[1] + 1e-12:
                raise ValueError(f"{name}: ({lo}, {hi}) leaves the domain {box}")
        t0, t1 = self.t_range
        if not t0 < t1:
            raise ValueError(f"t_range: empty range ({t0}, {t1})")
        object.__setattr__(self, "x1_range", tuple(map(float, self.x1_range)))
        object.__setattr__(self, "x2_range", tuple(map(float, self.x2_range)))
        object.__setattr__(self, "t_range", tuple(map(float, self.t_range)))

    @property
    def distance_to_singular_line(self) -> float:
        lo, hi = self.x1_range
        return 0.0 if lo <= 0.0 <= hi else min(abs(lo), abs(hi))

    def with_window(self, t0, t1) -> "ObservationRegion":
        return ObservationRegion(self.x1_range, self.x2_range, (t0, t1))


@dataclass
class WaveState:
    u: SpectralVector
    ut: SpectralVector

    def __post_init__(self):
        if self.u.basis is not self.ut.basis:
            raise ValueError("position and velocity live on different bases")

    @property
    def basis(self) -> SpectralBasis:
        return self.u.basis


def heat_evolve(u0: SpectralVector, t: float) -> SpectralVector:
    """``e^{-tL} u0``."""
    if t < 0:
        raise ValueError("heat evolution needs t >= 0")
    return SpectralVector(u0.basis, np.exp(-t * u0.basis.lambdas) * u0.coeffs)


def wave_evolve(w0: WaveState, t: float) -> WaveState:
    """Exact propagator of ``u_tt + L u = 0`` mode by mode (any real ``t``)."""
    lam = w0.basis.lambdas
    om = np.sqrt(lam)
    c, s = np.cos(om * t), np.sin(om * t)
    zero = om == 0
    sinc_t = np.where(zero, t, s / np.where(zero, 1.0, om))
    u, v = w0.u.coeffs, w0.ut.coeffs
    u_new = c * u + sinc_t * v
    v_new = -om * s * u + c * v
    return WaveState(SpectralVector(w0.basis, u_new), SpectralVector(w0.basis, v_new))


def wave_energy(w: WaveState, s: float = 1.0) -> float:
    """``||L^{s/2} u||^2 + ||L^{(s-1)/2} u_t||^2`` (twice the usual E_s)."""
    lam = w.basis.lambdas
    return float(np.sum(lam**s * np.abs(w.u.coeffs) ** 2)
                 + np.sum(lam ** (s - 1) * np.abs(w.ut.coeffs) ** 2))


def heat_time_weights(lam_i, lam_j, t_range) -> np.ndarray:
    """``int_{t0}^{t1} exp(-(lam_i + lam_j) t) dt`` for all pairs."""
    t0, t1 = t_range
    s = np.add.outer(lam_i, lam_j)
    dt = t1 - t0
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(s == 0, dt, -np.expm1(-s * dt) / np.where(s == 0, 1.0, s))
    return np.exp(-s * t0) * frac


def _support(u: SpectralVector):
    return np.nonzero(u.coeffs != 0)[0]


def _gram_on(basis, idx, region, quad_nx):
    sub = basis.subset(idx)
    return spatial_gram(sub, region.x1_range, region.x2_range, quad_nx=quad_nx)


def restricted_heat_norm(u0: SpectralVector, region: ObservationRegion,
                         quad_nt: int = 16, quad_nx: int = 64) -> float:
    """``int_{t-window} int_omega |e^{-tL} u0|^2``; time integrals in closed form."""
    if quad_nt < 16 or quad_nx < 16:
        raise ValueError("quadrature resolutions must be >= 16")
    idx = _support(u0)
    if idx.size == 0:
        return 0.0
    lam = u0.basis.lambdas[idx]
    c = u0.coeffs[idx]
    K = _gram_on(u0.basis, idx, region, quad_nx) * heat_time_weights(lam, lam, region.t_range)
    return float(np.real(np.conj(c) @ K @ c))


def wave_time_weights(w: WaveState, idx, t_range) -> np.ndarray:
    """``int u_i(t) u_j(t) dt`` over the window for the modal solutions of ``w``."""
    lam = w.basis.lambdas[idx]
    if np.any(lam <= 0):
        raise ValueError("wave time weights need positive eigenvalues")
    om = np.sqrt(lam)
    a = np.real(w.u.coeffs[idx])
    b = np.real(w.ut.coeffs[idx]) / om
    r = np.hypot(a, b)
    ph = np.arctan2(b, a)
    t0, t1 = t_range
    dif = _int_cos(np.subtract.outer(om, om), np.subtract.outer(ph, ph), t0, t1)
    tot = _int_cos(np.add.outer(om, om), np.add.outer(ph, ph), t0, t1)
    return 0.5 * np.outer(r, r) * (dif + tot)


def restricted_wave_norm(w0: WaveState, region: ObservationRegion,
                         quad_nt: int = 16, quad_nx: int = 64) -> float:
    """``int_{t-window} int_omega |u(t)|^2`` for the wave solution with data ``w0``.

    Each mode is ``r_j cos(sqrt(lam_j) t - phi_j)``, so products integrate
    exactly in time. Real data only.
    """
    if quad_nt < 16 or quad_nx < 16:
        raise ValueError("quadrature resolutions must be >= 16")
    if np.iscomplexobj(w0.u.coeffs) or np.iscomplexobj(w0.ut.coeffs):
        raise ValueError("restricted_wave_norm expects real data")
    idx = np.nonzero((w0.u.coeffs != 0) | (w0.ut.coeffs != 0))[0]
    if idx.size == 0:
        return 0.0
    K = _gram_on(w0.basis, idx, region, quad_nx) * wave_time_weights(w0, idx, region.t_range)
    return float(np.sum(K))


def write_heatmap_csv(u: SpectralVector, nx1: int, nx2: int, dest) -> None:
    """Grid snapshot as rows ``x1, x2, value``."""
    vals = sample_on_grid(u, nx1, nx2)
    x1 = np.linspace(-1.0, 1.0, nx1)
    x2 = np.linspace(0.0, 1.0, nx2)
    with open(dest, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["x1", "x2", "value"])
        for i in range(nx1):
            for j in range(nx2):
                w.writerow(["%.17g" % x1[i], "%.17g" % x2[j], "%.17g" % np.real(vals[i, j])])
