"""Heat-to-wave transmutation through the spectral integral

    I(T, lam) = int_0^T exp(-alpha (1/t + 1/(T - t))) exp(-lam t) dt.

The kernel itself is never built. A heat solution ``y(t) = e^{-tL} y0`` is sent
to the wave solution with data ``(0, I(T, L) y0)``, and that is all any
observable statement about the transmuted wave depends on.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import QuadratureError
from .evolution import WaveState
from .numerics import DEFAULT_TOLERANCES, adaptive_quad, fit_loglinear
from .spectral import SpectralVector

log = logging.getLogger(__name__)

EXP_FLOOR = -700.0


@dataclass(frozen=True)
class TransmuteParams:
    T: float = 1.0
    S: float = 0.5
    alpha: float | None = None  # default 2.5 S^2

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"T: must be positive, got {self.T}")
        if not self.S > 0:
            raise ValueError(f"S: must be positive, got {self.S}")
        if self.alpha is None:
            object.__setattr__(self, "alpha", 2.5 * self.S**2)
        if not self.alpha > 2 * self.S**2:
            raise ValueError(f"alpha: need alpha > 2 S^2 = {2 * self.S**2:.6g}, got {self.alpha}")


def _phase(p: TransmuteParams, lam: float):
    a, T = p.alpha, p.T
    return lambda t: a / t + a / (T - t) + lam * t


def phase_minimizer(p: TransmuteParams, lam: float) -> float:
    """Root of ``-alpha/t^2 + alpha/(T-t)^2 + lam`` in ``(0, T/2]``."""
    a, T = p.alpha, p.T
    if lam <= 0:
        return 0.5 * T
    g = lambda t: -a / t**2 + a / (T - t) ** 2 + lam
    # g(lo) < 0 and g(T/2) = lam > 0
    lo = min(0.5 * T, math.sqrt(a / lam)) * 1e-3
    while g(lo) > 0:
        lo *= 1e-3
    return brentq(g, lo, 0.5 * T, xtol=1e-15 * T, rtol=4 * np.finfo(float).eps)


def log_I(p: TransmuteParams, lam: float, rtol: float = DEFAULT_TOLERANCES["quad_rtol"]) -> float:
    """``log I(T, lam)``, accurate where ``I`` itself underflows."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    phi = _phase(p, float(lam))
    t_star = phase_minimizer(p, float(lam))
    phi_min = phi(t_star)

    def f(t):
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            v = np.exp(-(phi(t) - phi_min))
        return np.where(np.isfinite(v), v, 0.0)

    res = adaptive_quad(f, 0.0, p.T, tol=0.0, rtol=rtol, breakpoints=sorted({t_star, 0.5 * p.T}))
    return math.log(res.value) - phi_min


def I_of_lambda(p: TransmuteParams, lam: float) -> float:
    """``I(T, lam)``; values below ``e^-700`` are returned as 0 with a warning."""
    v = log_I(p, lam)
    if v < EXP_FLOOR:
        log.warning("I(T, %.6g) = exp(%.6g) flushed to zero", lam, v)
        return 0.0
    return math.exp(v)


def log_I_asymptotic(p: TransmuteParams, lam: float) -> float:
    if lam < 1:
        raise ValueError("asymptotic form needs lambda >= 1")
    a = p.alpha
    return (0.5 * math.log(math.pi) + 0.25 * math.log(a) - 0.75 * math.log(lam)
            - a / p.T - 2.0 * math.sqrt(a * lam))


def I_asymptotic(p: TransmuteParams, lam: float) -> float:
    """``sqrt(pi) alpha^{1/4} lam^{-3/4} exp(-alpha/T) exp(-2 sqrt(alpha lam))``."""
    v = log_I_asymptotic(p, lam)
    return 0.0 if v < EXP_FLOOR else math.exp(v)


def laplace_ratio(p: TransmuteParams, lam: float) -> float:
    return math.exp(log_I(p, lam) - log_I_asymptotic(p, lam))


@dataclass(frozen=True)
class LaplaceSweep:
    lambdas: np.ndarray
    log_I: np.ndarray
    log_I_asym: np.ndarray
    ratio: np.ndarray
    correction_exponent: float
    correction_fit: object


def laplace_sweep(p: TransmuteParams, lambdas) -> LaplaceSweep:
    """Ratios ``I / I_asym`` and the slope of ``log|ratio - 1|`` against ``log lam``."""
    lam = np.asarray(lambdas, dtype=float)
    li = np.array([log_I(p, x) for x in lam])
    la = np.array([log_I_asymptotic(p, x) for x in lam])
    ratio = np.exp(li - la)
    fit = fit_loglinear(np.log(lam), np.log(np.abs(ratio - 1.0)))
    return LaplaceSweep(lam, li, la, ratio, fit.slope, fit)


def write_sweep_csv(sweep: LaplaceSweep, dest) -> None:
    with open(dest, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["lambda", "I_num", "I_asym", "ratio"])
        for lam, a, b, r in zip(sweep.lambdas, sweep.log_I, sweep.log_I_asym, sweep.ratio):
            w.writerow(["%.17g" % v for v in (lam, math.exp(a), math.exp(b), r)])


def _I_per_mode(p, lambdas):
    out = np.empty(lambdas.size)
    cache = {}
    for j, lam in enumerate(lambdas):
        key = float(lam)
        if key not in cache:
            try:
                cache[key] = log_I(p, key)
            except QuadratureError as exc:
                raise QuadratureError(f"mode {j} (lambda={key:.6g}): {exc}", best=exc.best) from exc
        out[j] = cache[key]
    return out


def transmute(p: TransmuteParams, y0: SpectralVector) -> WaveState:
    """Wave data ``(0, I(T, L) y0)``."""
    basis = y0.basis
    idx = np.nonzero(y0.coeffs != 0)[0]
    vel = np.zeros_like(y0.coeffs)
    if idx.size:
        logs = _I_per_mode(p, basis.lambdas[idx])
        vel[idx] = np.where(logs < EXP_FLOOR, 0.0, np.exp(logs)) * y0.coeffs[idx]
    return WaveState(SpectralVector(basis, np.zeros_like(y0.coeffs)), SpectralVector(basis, vel))


def I_operator(p: TransmuteParams, y0: SpectralVector) -> SpectralVector:
    return transmute(p, y0).ut


def norm_equivalence_check(p: TransmuteParams, y0: SpectralVector, s: float):
    """``(lower, mid, upper)`` around ``||I(T, L) y0||_{H^s_L}``.

    The comparison norm is ``||(L+1)^{(s-3/2)/2} exp(-2 sqrt(alpha L)) y0||``; the
    sandwich constants are the extreme per-mode ratios of ``I(T, lam)`` to
    ``(1+lam)^{-3/4} exp(-2 sqrt(alpha lam))`` over the support of ``y0``.
    All sums are carried out in log space.
    """
    idx = np.nonzero(y0.coeffs != 0)[0]
    if idx.size == 0:
        raise ValueError("norm equivalence check undefined for the zero vector")
    lam = y0.basis.lambdas[idx]
    c = np.abs(y0.coeffs[idx])
    logI = _I_per_mode(p, lam)
    log_w = -0.75 * np.log1p(lam) - 2.0 * np.sqrt(p.alpha * lam)
    log_r = logI - log_w
    log_base = 0.5 * (s * np.log1p(lam)) + log_w + np.log(c)  # weighted norm terms
    log_mid_terms = 0.5 * (s * np.log1p(lam)) + logI + np.log(c)

    def lognorm(t):
        top = t.max()
        return top + 0.5 * math.log(np.sum(np.exp(2 * (t - top))))

    weighted = lognorm(log_base)
    mid = lognorm(log_mid_terms)
    return (math.exp(log_r.min() + weighted), math.exp(mid), math.exp(log_r.max() + weighted))


def ratio_constants(p: TransmuteParams, lambdas) -> tuple[float, float]:
    """Extreme values of ``I(T, lam) (1+lam)^{3/4} exp(2 sqrt(alpha lam))`` on a sweep."""
    lam = np.asarray(lambdas, dtype=float)
    logI = _I_per_mode(p, lam)
    log_r = logI + 0.75 * np.log1p(lam) + 2.0 * np.sqrt(p.alpha * lam)
    return float(np.exp(log_r.min())), float(np.exp(log_r.max()))
