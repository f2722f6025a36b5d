"""Observability experiments on Grushin eigenbases.

Everything here is a dual quantity: restricted masses of eigenfunctions, heat
Gramians on spectral subspaces ``E_lam`` and the two interpolation-type
inequalities (parabolic tradeoff for ``k = 2`` and the Gevrey-data bound), each
probed with adversarial eigenmodes and random data.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .evolution import ObservationRegion, heat_time_weights
from .numerics import FitResult, fit_loglinear
from .spectral import SpectralBasis, SpectralVector, frequency_function, restricted_mass, spatial_gram

log = logging.getLogger(__name__)

MASS_DROP = 1e-300     # restricted norms below this are dropped outright
FIT_FLOOR = 1e-250     # and below this they are kept out of fits
GRAM_FLOOR = 1e-280


@dataclass
class ObservabilityReport:
    lambdas: np.ndarray
    gram_min_eigs: np.ndarray
    fitted_exponent: float
    fitted_prefactor: float
    fit_quality: FitResult
    config_echo: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def summary(self) -> dict:
        out = {
            "fitted_exponent": self.fitted_exponent,
            "fitted_prefactor": self.fitted_prefactor,
            "r_squared": self.fit_quality.r_squared,
            "residual_max": self.fit_quality.residual_max,
            "intercept": self.fit_quality.intercept,
            "points": int(len(self.lambdas)),
        }
        for k, v in self.extras.items():
            if isinstance(v, (int, float, str, bool)) or v is None:
                out[k] = v
        for k, v in self.config_echo.items():
            out[f"config.{k}"] = v if isinstance(v, (int, float, str, bool)) or v is None else str(v)
        return out

    def write_json(self, dest) -> None:
        with open(dest, "w", encoding="utf-8") as fh:
            json.dump(_jsonable(self.summary()), fh, sort_keys=True, indent=1)


def _jsonable(d):
    out = {}
    for k, v in d.items():
        if isinstance(v, (np.floating, np.integer)):
            v = v.item()
        if isinstance(v, float) and not math.isfinite(v):
            v = str(v)
        out[k] = v
    return out


def write_table_csv(header, rows, dest) -> None:
    with open(dest, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([("%.17g" % v) if isinstance(v, (float, np.floating)) else v for v in row])


def _region_echo(region: ObservationRegion) -> dict:
    return {"x1_range": list(region.x1_range), "x2_range": list(region.x2_range),
            "t_range": list(region.t_range)}


def _full_x2(region: ObservationRegion) -> bool:
    return region.x2_range[0] <= 1e-15 and region.x2_range[1] >= 1 - 1e-15


# ---------------------------------------------------------------------------
# tunnelling
# ---------------------------------------------------------------------------

def tunneling_experiment(basis: SpectralBasis, region: ObservationRegion,
                         powers=(1.0, 1.5, 2.0)) -> ObservabilityReport:
    """Fit ``-log ||phi_n||^2_{L^2(omega)}`` for ground modes against ``lam^{(gamma+1)/2}``.

    ``extras`` carries the raw-``lam`` fit (``exponent_in_lambda``), the ``r^2``
    of fits against ``lam^p`` for each ``p`` in ``powers`` and, on the rectangle,
    the ratio of each mass to ``exp(-a^2 n pi) / (2 a pi sqrt(n))``.
    """
    gamma = basis.spec.gamma
    ground = basis.ground_modes()
    order = np.argsort(ground.lambdas, kind="stable")
    lam = ground.lambdas[order]
    n = ground.fourier_n[order]
    mass = restricted_mass(ground, region.x1_range, region.x2_range)[order]

    dropped = mass < MASS_DROP
    if dropped.any():
        log.warning("dropping %d modes with restricted norm below %g", int(dropped.sum()), MASS_DROP)
    keep = mass >= FIT_FLOOR
    excluded = int((~keep).sum())
    lam_k, mass_k, n_k = lam[keep], mass[keep], n[keep]
    y = -np.log(mass_k)
    p_nat = 0.5 * (gamma + 1)
    fit = fit_loglinear(lam_k**p_nat, y)
    raw = fit_loglinear(lam_k, y) if p_nat != 1.0 else fit
    r2 = {float(p): fit_loglinear(lam_k**p, y).r_squared for p in powers}

    extras = {
        "exponent_in_lambda": raw.slope,
        "natural_power": p_nat,
        "excluded": excluded,
        "r2_by_power": r2,
        "best_power": max(r2, key=r2.get),
        "masses": mass_k,
        "fourier_n": n_k,
    }
    a = region.distance_to_singular_line
    if basis.spec.family == "grushin_rectangle" and gamma == 1 and a > 0:
        law = np.exp(-a * a * n_k * math.pi) / (2 * a * math.pi * np.sqrt(n_k))
        extras["prefactor_ratio"] = mass_k / law
        extras["prefactor_ratio_min"] = float(np.min(mass_k / law))
        extras["prefactor_ratio_max"] = float(np.max(mass_k / law))
    return ObservabilityReport(lam_k, mass_k, fit.slope, math.exp(-fit.intercept), fit,
                               {"gamma": gamma, **_region_echo(region)}, extras)


# ---------------------------------------------------------------------------
# Gramians
# ---------------------------------------------------------------------------

def heat_gramian(basis: SpectralBasis, region: ObservationRegion, T: float | None = None,
                 quad_nx: int = 64) -> np.ndarray:
    """``G_ij = int_0^T int_omega e^{-(lam_i + lam_j) t} phi_i phi_j``.

    With ``T`` omitted the region's own time window is used.
    """
    if len(basis) < 1:
        raise ValueError("empty spectral subspace")
    window = region.t_range if T is None else (0.0, float(T))
    S = spatial_gram(basis, region.x1_range, region.x2_range, quad_nx=quad_nx)
    G = S * heat_time_weights(basis.lambdas, basis.lambdas, window)
    return 0.5 * (G + G.T)


def min_eigenvalue(G: np.ndarray) -> float:
    """Smallest eigenvalue of a PSD matrix with relative accuracy.

    ``G = R^T R`` by Cholesky and ``lam_min = sigma_min(R)^2``; if Cholesky
    fails the matrix is numerically singular and ``eigvalsh`` decides.
    """
    if G.shape == (1, 1):
        return float(G[0, 0])
    d = np.sqrt(np.diag(G))
    try:
        R = np.linalg.cholesky(G).T
        return float(np.linalg.svd(R, compute_uv=False)[-1] ** 2)
    except np.linalg.LinAlgError:
        return float(np.linalg.eigvalsh(G)[0]) if d.size else 0.0


def gramian_min_eig(basis: SpectralBasis, region: ObservationRegion, T: float | None = None,
                    quad_nx: int = 64) -> float:
    """Minimum eigenvalue of the heat Gramian, block by block when possible.

    When ``omega`` spans the full ``x2`` period the Gramian splits into one
    block per ``x2`` index.
    """
    G = heat_gramian(basis, region, T, quad_nx)
    if not _full_x2(region):
        return min_eigenvalue(G)
    best = math.inf
    for n in np.unique(basis.fourier_n):
        idx = np.nonzero(basis.fourier_n == n)[0]
        best = min(best, min_eigenvalue(G[np.ix_(idx, idx)]))
    return best


def lowfreq_cost_experiment(basis: SpectralBasis, region: ObservationRegion, T: float,
                            lambda_grid, quad_nx: int = 64) -> ObservabilityReport:
    """``cost(lam) = 1 / lam_min(G on E_lam)``; fit ``log cost`` against ``lam^{k/2}``.

    ``extras['exponent_drop_last']`` is the same fit without the largest ``lam``
    so the two finest truncations can be compared.
    """
    grid = np.asarray(lambda_grid, dtype=float)
    if grid.size < 4 or np.any(np.diff(grid) <= 0):
        raise ValueError("lambda_grid must be ascending with at least 4 points")
    k = basis.spec.k
    G_full = heat_gramian(basis, region, T, quad_nx)
    full = _full_x2(region)
    lams, mins, dims = [], [], []
    for lam in grid:
        idx = np.nonzero(basis.lambdas <= lam)[0]
        if idx.size == 0:
            continue
        G = G_full[np.ix_(idx, idx)]
        if full:
            m = math.inf
            nn = basis.fourier_n[idx]
            for n in np.unique(nn):
                b = np.nonzero(nn == n)[0]
                m = min(m, min_eigenvalue(G[np.ix_(b, b)]))
        else:
            m = min_eigenvalue(G)
        if not m > GRAM_FLOOR:
            log.warning("Gramian minimum eigenvalue %.3g below floor at lambda=%g; stopping", m, lam)
            break
        lams.append(lam)
        mins.append(m)
        dims.append(idx.size)
    lams = np.array(lams)
    mins = np.array(mins)
    cost = 1.0 / mins
    x = lams ** (0.5 * k)
    fit = fit_loglinear(x, np.log(cost))
    extras = {
        "cost": cost,
        "dims": np.array(dims),
        "exponent_in_lambda": fit_loglinear(lams, np.log(cost)).slope,
        "partial": bool(lams.size < grid.size),
        "max_dim": int(max(dims)) if dims else 0,
    }
    if lams.size >= 4:
        extras["exponent_drop_last"] = fit_loglinear(x[:-1], np.log(cost[:-1])).slope
    return ObservabilityReport(lams, mins, fit.slope, math.exp(fit.intercept), fit,
                               {"T": T, "k": k, **_region_echo(region)}, extras)


# ---------------------------------------------------------------------------
# interpolation inequalities
# ---------------------------------------------------------------------------

_R_GRID = np.concatenate([np.logspace(-300, -1, 600), 1 - np.logspace(-1, -15, 300)])


def minimal_power(logA, logB, logC, logG):
    """Smallest ``p`` with ``A <= C eps^{-p} B + eps G`` for every ``eps`` in (0, 1).

    Writing ``eps = r A / G`` the constraint at ``r`` is
    ``p >= (log A + log(1-r) - log C - log B) / (log G - log A - log r)``,
    which only matters while ``eps < 1``. Returns 0 if no constraint binds.
    """
    r = _R_GRID
    log_eps = np.log(r) + logA - logG
    ok = log_eps < 0
    if not ok.any():
        return 0.0
    r = r[ok]
    vals = (logA + np.log1p(-r) - logC - logB) / -log_eps[ok]
    i = int(np.argmax(vals))
    best = float(vals[i])
    if best <= 0:
        return 0.0

    def neg(x):
        le = math.log(x) + logA - logG
        if le >= 0:
            return math.inf
        return -(logA + math.log1p(-x) - logC - logB) / -le

    lo, hi = r[max(i - 1, 0)], r[min(i + 1, r.size - 1)]
    if hi > lo:
        res = minimize_scalar(neg, bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-3 * (hi - lo)})
        if res.success and -res.fun > best:
            best = float(-res.fun)
    return best


def _mode_mass(basis, region):
    return restricted_mass(basis, region.x1_range, region.x2_range)


def _random_data(basis, count, rng, lam_window=None):
    """Coefficient vectors: windowed combinations and broadband data with decay."""
    out = []
    m = len(basis)
    for i in range(count):
        c = np.zeros(m)
        if i % 2 == 0:
            width = int(rng.integers(2, 9))
            start = int(rng.integers(0, max(1, m - width)))
            c[start:start + width] = rng.standard_normal(min(width, m - start))
        else:
            c = rng.standard_normal(m) * np.exp(-rng.uniform(0, 0.05) * basis.lambdas)
        out.append(c)
    return out


def _log_quadform(G, c):
    v = float(c @ G @ c)
    return math.log(v) if v > 0 else -math.inf


def final_state_threshold(basis: SpectralBasis, region: ObservationRegion, eta: float) -> FitResult:
    """Fit of the final-data eigenmode cost ``||y(eta)||^2 / obs(0, eta)`` against ``lam``.

    Half the slope estimates the waiting time ``T_0`` beyond which dissipation
    beats the observation cost.
    """
    ground = basis.ground_modes()
    lam = ground.lambdas
    mass = _mode_mass(ground, region)
    keep = mass > FIT_FLOOR
    lam, mass = lam[keep], mass[keep]
    log_obs = np.log(mass) + np.log(-np.expm1(-2 * lam * eta)) - np.log(2 * lam)
    order = np.argsort(lam)
    return fit_loglinear(lam[order], (-2 * lam * eta - log_obs)[order])


def parabolic_tradeoff_experiment(basis: SpectralBasis, region: ObservationRegion, T_list,
                                  eta: float, random_count: int = 200, seed: int = 0,
                                  D: float = 1.0, quad_nx: int = 64):
    """Empirical minimal ``beta(T)`` in ``D||y(T)||^2 <= eps^-beta obs(T-eta, T) + eps||y(0)||^2``.

    Data are all eigenmodes plus ``random_count`` random vectors. Returns
    ``(rows, info)`` with one row ``(T, beta_min, T0, beta_theory)`` per ``T``
    and the per-datum records in ``info``.
    """
    if basis.spec.k != 2:
        raise ValueError("the parabolic tradeoff needs k = 2 (gamma = 1)")
    T_list = np.asarray(T_list, dtype=float)
    if np.any(T_list <= eta):
        raise ValueError("every T must exceed eta")
    fit = final_state_threshold(basis, region, eta)
    T0 = 0.5 * fit.slope
    lam = basis.lambdas
    mass = _mode_mass(basis, region)
    S = spatial_gram(basis, region.x1_range, region.x2_range, quad_nx=quad_nx)
    Wn = heat_time_weights(lam, lam, (0.0, eta))
    rng = np.random.default_rng(seed)
    data = _random_data(basis, random_count, rng)
    logD = math.log(D)
    rows, per_T = [], []
    for T in T_list:
        shift = T - eta
        betas = []
        # eigenmodes in closed form
        for j in range(len(basis)):
            if mass[j] <= 0:
                continue
            logA = -2 * lam[j] * T + logD
            logB = math.log(mass[j]) - 2 * lam[j] * shift + math.log(-math.expm1(-2 * lam[j] * eta)) - math.log(2 * lam[j])
            betas.append(minimal_power(logA, logB, 0.0, 0.0))
        # random data: rescale by the first part of the window to avoid underflow
        for c in data:
            log_y0 = 2 * math.log(np.linalg.norm(c))
            nz = c != 0
            sc = np.full(c.shape, -np.inf)
            sc[nz] = np.log(np.abs(c[nz])) - lam[nz] * shift
            top = sc.max()
            ct = np.sign(c) * np.exp(sc - top)
            logA = 2 * top + math.log(np.sum(ct**2 * np.exp(-2 * lam * eta))) + logD
            logB = 2 * top + _log_quadform(S * Wn, ct)
            betas.append(minimal_power(logA, logB, 0.0, log_y0))
        b = max(betas)
        theory = T0 / (T - (T0 + eta)) if T > T0 + eta else math.inf
        rows.append((float(T), b, T0, theory))
        per_T.append(np.array(betas))
    info = {"T0": T0, "threshold_fit": fit, "betas": per_T, "eta": eta}
    return rows, info


def admissible_D(basis: SpectralBasis, region: ObservationRegion, T: float, eta: float,
                 beta: float) -> float:
    """Largest ``D <= 1`` for which the parabolic inequality holds on every eigenmode.

    For a mode, ``min_eps (eps^-beta B + eps)`` over ``(0, 1]`` is attained at
    ``eps* = min(1, (beta B)^{1/(beta+1)})``; ``D`` is the smallest ratio of that
    minimum to ``||y(T)||^2``.
    """
    lam = basis.lambdas
    mass = _mode_mass(basis, region)
    keep = mass > 0
    lam, mass = lam[keep], mass[keep]
    logA = -2 * lam * T
    logB = (np.log(mass) - 2 * lam * (T - eta) + np.log(-np.expm1(-2 * lam * eta)) - np.log(2 * lam))
    log_eps = np.minimum(0.0, (math.log(beta) + logB) / (beta + 1)) if beta > 0 else np.zeros_like(logB)
    log_rhs = np.logaddexp(-beta * log_eps + logB, log_eps)
    return float(min(1.0, np.exp(np.min(log_rhs - logA))))


def initial_state_theta0(basis: SpectralBasis, region: ObservationRegion, T: float) -> FitResult:
    """Fit of ``log(||y0||^2 / obs(T/2, T))`` over ground modes against ``lam``."""
    ground = basis.ground_modes()
    lam = ground.lambdas
    mass = _mode_mass(ground, region)
    keep = mass > FIT_FLOOR
    lam, mass = lam[keep], mass[keep]
    logB = (np.log(mass) - lam * T + np.log(-np.expm1(-lam * T)) - np.log(2 * lam))
    order = np.argsort(lam)
    return fit_loglinear(lam[order], -logB[order])


def gevrey_cost_experiment(basis: SpectralBasis, region: ObservationRegion, T: float,
                           theta_list, random_count: int = 200, seed: int = 0,
                           quad_nx: int = 64, C: float = 1.0):
    """Minimal power ``p(theta)`` in ``||y0||^2 <= C eps^-p obs(T/2, T) + eps ||y0||^2_{k/2, theta}``.

    Returns ``(rows, info)``; each row is ``(theta, p_min, theta0, p_theory)``
    with ``theta0`` half the slope of the initial-data eigenmode cost and
    ``p_theory = theta0 / (theta - theta0)``.
    """
    k = basis.spec.k
    alpha = 0.5 * k
    fit = initial_state_theta0(basis, region, T)
    theta0 = 0.5 * fit.slope
    lam = basis.lambdas
    mass = _mode_mass(basis, region)
    S = spatial_gram(basis, region.x1_range, region.x2_range, quad_nx=quad_nx)
    W = heat_time_weights(lam, lam, (0.5 * T, T))
    K = S * W
    rng = np.random.default_rng(seed)
    data = _random_data(basis, random_count, rng)
    logC = math.log(C)
    rows, per_theta = [], []
    for theta in theta_list:
        if theta <= theta0:
            raise ValueError(f"theta={theta} must exceed the measured theta0={theta0:.6g}")
        if theta * lam.max() ** alpha > 700:
            raise OverflowError(f"gevrey weight overflow at theta={theta}, lambda_max={lam.max():.6g}")
        logw = 2 * theta * lam**alpha
        ps = []
        for j in range(len(basis)):
            if mass[j] <= 0:
                continue
            logB = (math.log(mass[j]) - lam[j] * T + math.log(-math.expm1(-lam[j] * T))
                    - math.log(2 * lam[j]))
            ps.append(minimal_power(0.0, logB, logC, logw[j]))
        for c in data:
            logA = 2 * math.log(np.linalg.norm(c))
            logB = _log_quadform(K, c)
            top = np.max(logw + 2 * np.log(np.abs(c) + 1e-300))
            logG = top + math.log(np.sum(np.exp(logw + 2 * np.log(np.abs(c) + 1e-300) - top)))
            ps.append(minimal_power(logA, logB, logC, logG))
        p = max(ps)
        theory = theta0 / (theta - theta0) if theta > theta0 else math.inf
        rows.append((float(theta), p, theta0, theory))
        per_theta.append(np.array(ps))
    return rows, {"theta0": theta0, "theta0_fit": fit, "powers": per_theta}


def frequency_cost_experiment(basis: SpectralBasis, region: ObservationRegion, T: float,
                              random_count: int = 400, seed: int = 0, bin_width: float = 10.0,
                              quad_nx: int = 64):
    """Observation cost ``||y0||^2 / obs(0, T)`` binned by ``Lambda^k``.

    ``Lambda = ||y0||_{H^1_L} / ||y0||``. Data are every eigenmode plus random
    windowed and broadband vectors. Returns ``(rows, info)`` with rows
    ``(Lambda_k_bin_center, max_cost, count)`` and the fit of ``log max_cost``
    against ``Lambda^k`` in ``info``.
    """
    if bin_width < 10:
        raise ValueError("bin_width must be >= 10")
    k = basis.spec.k
    G = heat_gramian(basis, region, T, quad_nx)
    rng = np.random.default_rng(seed)
    vecs = [np.eye(len(basis))[j] for j in range(len(basis))] + _random_data(basis, random_count, rng)
    lk, cost = [], []
    for c in vecs:
        u = SpectralVector(basis, c)
        L = frequency_function(u, 1.0)
        q = float(c @ G @ c)
        if q <= 0:
            continue
        lk.append(L**k)
        cost.append(float(c @ c) / q)
    lk = np.array(lk)
    cost = np.array(cost)
    lo = math.floor(lk.min() / bin_width) * bin_width
    edges = np.arange(lo, lk.max() + bin_width, bin_width)
    which = np.digitize(lk, edges) - 1
    rows = []
    for b in range(edges.size - 1):
        sel = which == b
        if sel.any():
            rows.append((edges[b] + 0.5 * bin_width, float(cost[sel].max()), int(sel.sum())))
    centers = np.array([r[0] for r in rows])
    maxc = np.array([r[1] for r in rows])
    fit = fit_loglinear(centers, np.log(maxc))
    drop = fit_loglinear(centers[:-1], np.log(maxc[:-1])) if centers.size >= 4 else None
    info = {"fit": fit, "exponent": fit.slope,
            "exponent_drop_last": drop.slope if drop else float("nan"),
            "lambda_k": lk, "cost": cost}
    return rows, info
