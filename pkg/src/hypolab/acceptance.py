"""The acceptance suite: thirteen checks, each a plain function returning a verdict.

``run_all`` evaluates them in order and shares the expensive bases between
criteria (the tunnelling basis feeds both the decay fit and the low-frequency
cost comparison). Runtime budgets are part of the verdict where one applies.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .evolution import ObservationRegion, WaveState, heat_evolve, wave_energy, wave_evolve
from .geometry import (
    CotangentState,
    flow_geodesic,
    grushin,
    hamiltonian,
    heisenberg,
    horizontal_velocity,
    normalize_covector,
    sr_metric,
)
from .numerics import fit_loglinear
from .observability import lowfreq_cost_experiment, parabolic_tradeoff_experiment, tunneling_experiment
from .spectral import (
    OperatorSpec,
    SpectralVector,
    apply_calculus,
    build_basis,
    frequency_function,
    jensen_check,
    subelliptic_ratio,
)
from .transmutation import TransmuteParams, laplace_ratio, laplace_sweep, transmute

OMEGA = ObservationRegion((0.3, 0.9))
LOW_SPEC = dict(gamma=1, grid_n=1025, fourier_max=100, branch_max=8, lambda_cutoff=300.0)
LOW_GRID = np.arange(40.0, 301.0, 20.0)
TORUS_BANDS = (4, 8, 16, 32, 64, 128)


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    measured: dict = field(default_factory=dict)
    target: str = ""
    seconds: float = 0.0

    def line(self) -> str:
        vals = ", ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items())
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.number:2d} {self.title}: {vals} (target: {self.target}; {self.seconds:.1f} s)"


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (float, np.floating)):
        return f"{v:.6g}"
    if isinstance(v, (tuple, list)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


class _Context:
    """Lazily built bases shared across criteria."""

    def __init__(self, threads=1, seed=0):
        self.threads = threads
        self.seed = seed
        self._cache = {}

    def basis(self, **kw):
        key = tuple(sorted(kw.items()))
        if key not in self._cache:
            self._cache[key] = build_basis(OperatorSpec(threads=self.threads, **kw))
        return self._cache[key]

    def tunneling(self):
        if "tun" not in self._cache:
            b = self.basis(gamma=1, grid_n=2049, fourier_indices=tuple(range(20, 81)))
            self._cache["tun"] = tunneling_experiment(b, OMEGA)
        return self._cache["tun"]

    def rng(self, offset):
        return np.random.default_rng(self.seed + offset)


# ---------------------------------------------------------------------------

def c01_elliptic_spectrum(ctx):
    b = ctx.basis(family="elliptic", gamma=0, grid_n=4097, fourier_max=20, branch_max=5)
    exact = (b.branches * math.pi / 2) ** 2 + (b.fourier_n * math.pi) ** 2
    err = float(np.max(np.abs(b.lambdas / exact - 1)))
    return {"max_rel_error": err, "modes": len(b)}, err <= 1e-6, "rel. error <= 1e-6, < 30 s", 30


def c02_grushin_ground(ctx):
    b = ctx.basis(gamma=1, grid_n=2049, fourier_indices=tuple(range(10, 81)))
    r = b.lambdas / (math.pi * b.fourier_n)
    lo, hi = float(r.min()), float(r.max())
    return {"ratio_min": lo, "ratio_max": hi}, 0.99 <= lo and hi <= 1.01, "lam/(n pi) in [0.99, 1.01], < 60 s", 60


def c03_growth_exponent(ctx):
    slopes, ok = [], True
    for g in (1, 2, 3):
        b = ctx.basis(gamma=g, grid_n=2049, fourier_max=100)
        s = fit_loglinear(np.log(b.fourier_n), np.log(b.lambdas)).slope
        slopes.append(s)
        ok &= abs(s - 2 / (1 + g)) <= 0.05
    return {"slopes": slopes, "expected": [1.0, 2 / 3, 0.5]}, ok, "2/(1+gamma) +- 0.05", None


def c04_tunneling(ctx):
    r = ctx.tunneling()
    e = r.extras["exponent_in_lambda"]
    lo, hi = r.extras["prefactor_ratio_min"], r.extras["prefactor_ratio_max"]
    ok = abs(e / 0.09 - 1) <= 0.10 and lo >= 0.5 and hi <= 2.0
    return ({"exponent": e, "prefactor_ratio_min": lo, "prefactor_ratio_max": hi}, ok,
            "exponent 0.09 +- 10%, prefactor within x2, < 120 s", 120)


def c05_power_selection(ctx):
    ns = tuple(int(n) for n in np.unique(np.geomspace(2, 2000, 40).astype(int)))
    b = ctx.basis(gamma=2, grid_n=2049, fourier_indices=ns)
    r = tunneling_experiment(b, ObservationRegion((0.4, 0.9)))
    r2 = r.extras["r2_by_power"]
    margin = r2[1.5] - max(r2[1.0], r2[2.0])
    return ({"best_power": r.extras["best_power"], "r2_margin": margin}, r.extras["best_power"] == 1.5
            and margin >= 0.02, "p = 1.5 selected by r^2 margin >= 0.02", None)


def c06_laplace(ctx):
    p = TransmuteParams(T=1.0, S=0.5, alpha=1.0)
    ratio = laplace_ratio(p, 1e4)
    sw = laplace_sweep(p, [1e2, 1e3, 1e4, 1e5])
    e = sw.correction_exponent
    ok = abs(ratio - 1) <= 0.15 and abs(e + 0.25) <= 0.1
    return ({"ratio_at_1e4": ratio, "correction_exponent": e}, ok,
            "|ratio-1| <= 0.15 and correction exponent -0.25 +- 0.1, < 10 s", 10)


def c07_transmutation(ctx):
    b = ctx.basis(gamma=1, grid_n=513, fourier_max=40, branch_max=4, lambda_cutoff=500.0)
    p = TransmuteParams()
    rng = ctx.rng(7)
    picks = rng.choice(len(b), 50, replace=False)
    y0 = SpectralVector.random(b, rng)
    w = transmute(p, y0)
    worst = 0.0
    for j in picks:
        lam = b.lambdas[j]
        f = lambda t: math.exp(-p.alpha * (1 / t + 1 / (p.T - t)) - lam * t)
        ref = quad(f, 0, p.T, epsabs=0, epsrel=1e-13, limit=500,
                   points=[min(0.5 * p.T, math.sqrt(p.alpha / lam))])[0] * y0.coeffs[j]
        worst = max(worst, abs(w.ut.coeffs[j] / ref - 1))
    zero = bool(np.all(w.u.coeffs == 0.0))
    return {"max_rel_error": worst, "position_zero": zero}, worst <= 1e-10 and zero, \
        "rel. 1e-10 on 50 modes, position exactly 0", None


XI_VERTICAL_MAX = 2.0


def _geodesic_start(sys, rng):
    """Random ``(x, xi)`` on ``ell = 1/4`` with ``|xi_d| <= XI_VERTICAL_MAX``.

    The last covector component sets how fast the horizontal velocity turns
    (``x2``-frequency on Grushin, the vertical one on Heisenberg). RK4 drift at a
    fixed step grows roughly like its sixth power, passing 1e-8 over ``S = 5``
    near ``|xi_3| = 3.6`` on Heisenberg, so the sample is bounded explicitly.
    """
    rejected = 0
    while True:
        x = rng.uniform(-0.5, 0.5, sys.dim)
        xi = normalize_covector(sys, x, rng.standard_normal(sys.dim))
        if abs(xi[-1]) <= XI_VERTICAL_MAX:
            return CotangentState(x, xi), rejected
        rejected += 1


def c08_geodesics(ctx):
    rng = ctx.rng(8)
    drift, ratios, metric_err, rejected = 0.0, [], 0.0, 0
    for sys in (grushin(1), heisenberg()):
        for _ in range(20):
            st, rej = _geodesic_start(sys, rng)
            rejected += rej
            drift = max(drift, flow_geodesic(sys, st, 5.0, 1e-3).drift)
        st, rej = _geodesic_start(sys, rng)
        rejected += rej
        ref = flow_geodesic(sys, st, 2.0, 1e-3, method="rk45").x[-1]
        e1 = np.abs(flow_geodesic(sys, st, 2.0, 0.1).x[-1] - ref).max()
        e2 = np.abs(flow_geodesic(sys, st, 2.0, 0.05).x[-1] - ref).max()
        ratios.append(float(e1 / e2))
        for _ in range(1000):
            x = rng.uniform(-1, 1, sys.dim)
            xi = rng.standard_normal(sys.dim)
            ell = hamiltonian(sys, CotangentState(x, xi))
            g = sr_metric(sys, x, horizontal_velocity(sys, x, xi))
            metric_err = max(metric_err, abs(g - 4 * ell) / max(1.0, ell))
    ok = drift <= 1e-8 and all(12 <= r <= 20 for r in ratios) and metric_err <= 1e-10
    return ({"max_drift": drift, "rk4_ratios": ratios, "metric_error": metric_err,
             "starts_rejected": rejected},
            ok, f"drift <= 1e-8 (|xi_d| <= {XI_VERTICAL_MAX:g}), ratio in [12, 20], g(v0) = 4 ell to 1e-10", None)


def _random_coeffs(rng, count, size):
    c = rng.standard_normal((count, size))
    return c * np.exp(rng.uniform(-3, 3, (count, size)))


def c09_frequency(ctx):
    b = ctx.basis(gamma=1, grid_n=513, fourier_max=10, branch_max=3)
    lam = b.lambdas
    rng = ctx.rng(9)
    n = 10_000
    alpha = 0.625
    bad_h = bad_fg = bad_j = 0
    for c in _random_coeffs(rng, n, len(b)):
        u = SpectralVector(b, c)
        for H in (lambda l: 1 / (1 + l), lambda l: (1 + l) ** -1.25 * np.exp(-2 * np.sqrt(alpha * l))):
            if frequency_function(apply_calculus(u, H), 1.0) > 2 * frequency_function(u, 1.0):
                bad_h += 1
    for c in _random_coeffs(rng, n, len(b)):
        F, G = np.sqrt(1 + lam), 1 + lam
        if np.linalg.norm(F * c) * np.linalg.norm(G * c) > 2 * np.linalg.norm(F * G * c) * np.linalg.norm(c):
            bad_fg += 1
    for c in _random_coeffs(rng, n, len(b)):
        u = SpectralVector(b, c)
        for F, G in ((lambda s: s + 1, lambda s: 1 / np.sqrt(s)),
                     (lambda s: s, lambda s: np.exp(-3 * np.sqrt(alpha * s)))):
            lhs, rhs = jensen_check(u, F, G)
            if lhs > rhs * (1 + 1e-12):
                bad_j += 1
    return ({"H_violations": bad_h, "FG_violations": bad_fg, "jensen_violations": bad_j, "vectors": n},
            bad_h == bad_fg == bad_j == 0, "zero violations on 1e4 vectors each", None)


def c10_evolution(ctx):
    b = ctx.basis(gamma=1, grid_n=513, fourier_max=10, branch_max=3)
    rng = ctx.rng(10)
    semi = energy = rev = 0.0
    for _ in range(20):
        u = SpectralVector.random(b, rng)
        t1, t2 = rng.uniform(0, 0.05, 2)
        a = heat_evolve(heat_evolve(u, t1), t2).coeffs
        semi = max(semi, np.abs(a - heat_evolve(u, t1 + t2).coeffs).max() / np.abs(u.coeffs).max())
        w = WaveState(SpectralVector.random(b, rng), SpectralVector.random(b, rng))
        for s in (0.0, 1.0, 2.0):
            e0 = wave_energy(w, s)
            for t in (0.1, 1.7, -3.2, 25.0):
                energy = max(energy, abs(wave_energy(wave_evolve(w, t), s) - e0) / e0)
        t = rng.uniform(0.5, 5.0)
        back = wave_evolve(wave_evolve(w, t), -t)
        # compare in the energy norm so u and u_t are measured on the same scale
        d = WaveState(back.u - w.u, back.ut - w.ut)
        rev = max(rev, math.sqrt(wave_energy(d, 1.0) / wave_energy(w, 1.0)))
    ok = semi <= 1e-14 and energy <= 1e-12 and rev <= 1e-12
    return ({"semigroup": semi, "energy_drift": energy, "reversibility": rev}, ok,
            "1e-14 / 1e-12 / 1e-12", None)


def c11_lowfreq(ctx):
    b = ctx.basis(**LOW_SPEC)
    r = lowfreq_cost_experiment(b, OMEGA, 1.0, LOW_GRID)
    e, e2 = r.fitted_exponent, r.extras["exponent_drop_last"]
    tun = ctx.tunneling().extras["exponent_in_lambda"]
    ok = e > 0 and abs(e2 / e - 1) <= 0.15 and abs(e / tun - 1) <= 0.25 and r.extras["max_dim"] <= 300
    return ({"exponent": e, "exponent_coarser": e2, "tunneling_exponent": tun, "max_dim": r.extras["max_dim"]},
            ok, "positive, stable within 15%, within 25% of tunneling, < 300 s", 300)


def c12_parabolic(ctx):
    b = ctx.basis(**LOW_SPEC)
    Ts = [0.1, 0.2, 0.4, 0.8, 1.6]
    rows, info = parabolic_tradeoff_experiment(b, OMEGA, Ts, 0.02, random_count=200, seed=ctx.seed)
    betas = [r[1] for r in rows]
    ok = (all(math.isfinite(x) for x in betas) and all(x > y for x, y in zip(betas, betas[1:]))
          and Ts[0] > info["T0"] + info["eta"])
    return {"T0": info["T0"], "betas": betas}, ok, "finite, strictly decreasing in T", None


def c13_subelliptic(ctx):
    spec = OperatorSpec("grushin_torus", 1, grid_n=129, fourier_max=1)
    maxima = []
    for lo, hi in zip(TORUS_BANDS, TORUS_BANDS[1:]):
        r = subelliptic_ratio(spec, 200, band=(lo, hi), seed=ctx.seed + 13, nx1=512, nx2=512)
        maxima.append(float(r.max()))
    change = max(abs(b / a - 1) for a, b in zip(maxima, maxima[1:]))
    return {"band_max": maxima, "max_adjacent_change": change}, change < 0.5, \
        "adjacent band maxima differ by < 50%", None


CRITERIA = [
    (1, "elliptic spectrum", c01_elliptic_spectrum),
    (2, "grushin ground eigenvalue", c02_grushin_ground),
    (3, "eigenvalue growth exponent", c03_growth_exponent),
    (4, "tunneling decay gamma=1", c04_tunneling),
    (5, "tunneling power law gamma=2", c05_power_selection),
    (6, "laplace asymptotics", c06_laplace),
    (7, "transmutation identity", c07_transmutation),
    (8, "geodesic suite", c08_geodesics),
    (9, "frequency-function suite", c09_frequency),
    (10, "evolution invariants", c10_evolution),
    (11, "low-frequency cost exponent", c11_lowfreq),
    (12, "parabolic tradeoff", c12_parabolic),
    (13, "subelliptic ratio torus", c13_subelliptic),
]


def run_criterion(number: int, ctx: _Context | None = None) -> CriterionResult:
    ctx = ctx or _Context()
    _, title, fn = CRITERIA[number - 1]
    t0 = time.perf_counter()
    measured, ok, target, budget = fn(ctx)
    dt = time.perf_counter() - t0
    if budget is not None and dt >= budget:
        ok = False
        measured = {**measured, "over_budget": True}
    return CriterionResult(number, title, bool(ok), measured, target, dt)


def run_all(threads: int = 1, seed: int = 0, only=None, echo=None) -> list[CriterionResult]:
    ctx = _Context(threads, seed)
    out = []
    for number, _, _ in CRITERIA:
        if only is not None and number not in only:
            continue
        res = run_criterion(number, ctx)
        if echo is not None:
            echo(res.line())
        out.append(res)
    return out
