"""Numerical kernels: tridiagonal eigensolvers, ODE integration, quadrature, fits.

Everything here is a pure function of its inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import eigh_tridiagonal, solve_banded

from .errors import ConvergenceError, IntegrationError, QuadratureError

#: default tolerances, overridable through the experiment config
DEFAULT_TOLERANCES = {
    "eigen_residual": 1e-10,
    "ode_step": 1e-3,
    "quad_tol": 1e-10,
    "quad_rtol": 1e-13,  # relative target for the transmutation integral
}

_EPS = np.finfo(float).eps


# ---------------------------------------------------------------------------
# symmetric tridiagonal eigenproblems
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TridiagonalSymmetric:
    diag: np.ndarray
    offdiag: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.diag, dtype=float)
        e = np.asarray(self.offdiag, dtype=float)
        if d.ndim != 1 or d.size < 2:
            raise ValueError("tridiagonal matrix needs N >= 2 diagonal entries")
        if e.shape != (d.size - 1,):
            raise ValueError(f"offdiag must have length {d.size - 1}, got {e.size}")
        if not (np.all(np.isfinite(d)) and np.all(np.isfinite(e))):
            raise ValueError("tridiagonal entries must be finite")
        object.__setattr__(self, "diag", d)
        object.__setattr__(self, "offdiag", e)

    @property
    def n(self) -> int:
        return self.diag.size

    def matvec(self, v: np.ndarray) -> np.ndarray:
        """Apply the matrix to ``v`` (vector or column stack)."""
        v = np.asarray(v)
        out = self.diag.reshape((-1,) + (1,) * (v.ndim - 1)) * v
        e = self.offdiag.reshape((-1,) + (1,) * (v.ndim - 1))
        out[:-1] += e * v[1:]
        out[1:] += e * v[:-1]
        return out

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)


def gershgorin_bounds(m: TridiagonalSymmetric) -> tuple[float, float]:
    r = np.zeros(m.n)
    r[:-1] += np.abs(m.offdiag)
    r[1:] += np.abs(m.offdiag)
    return float(np.min(m.diag - r)), float(np.max(m.diag + r))


def sturm_count(m: TridiagonalSymmetric, x) -> np.ndarray:
    """Number of eigenvalues strictly below each shift in ``x``.

    Vectorized over the shifts; the recurrence itself runs down the diagonal.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    e2 = m.offdiag ** 2
    lo, hi = gershgorin_bounds(m)
    pivmin = _EPS * max(abs(lo), abs(hi), 1.0) * 1e-3
    count = np.zeros(x.shape, dtype=int)
    q = m.diag[0] - x
    q = np.where(np.abs(q) < pivmin, -pivmin, q)
    count += q < 0
    for i in range(1, m.n):
        q = (m.diag[i] - x) - e2[i - 1] / q
        q = np.where(np.abs(q) < pivmin, -pivmin, q)
        count += q < 0
    return count


def bisect_eigenvalues(m: TridiagonalSymmetric, count: int, start: int = 0,
                       tol: float | None = None) -> np.ndarray:
    """Eigenvalues ``start .. start+count-1`` (ascending) by Sturm bisection."""
    if not 1 <= count <= m.n - start:
        raise ValueError(f"count must lie in [1, {m.n - start}]")
    lo, hi = gershgorin_bounds(m)
    scale = max(abs(lo), abs(hi), 1.0)
    if tol is None:
        tol = 4 * _EPS * scale
    idx = np.arange(start, start + count)
    a = np.full(count, lo - tol)
    b = np.full(count, hi + tol)
    # interval width halves per pass; 200 passes is far beyond what doubles need
    for _ in range(200):
        if np.all(b - a <= tol):
            break
        mid = 0.5 * (a + b)
        below = sturm_count(m, mid) > idx
        b = np.where(below, mid, b)
        a = np.where(below, a, mid)
    else:
        bad = int(np.argmax(b - a))
        raise ConvergenceError("bisection did not converge", index=int(idx[bad]))
    return 0.5 * (a + b)


def _inverse_iteration(m: TridiagonalSymmetric, lam: np.ndarray) -> np.ndarray:
    n = m.n
    ab = np.zeros((3, n))
    ab[0, 1:] = m.offdiag
    ab[2, :-1] = m.offdiag
    rng = np.random.default_rng(12345)
    vecs = np.empty((n, lam.size))
    lo, hi = gershgorin_bounds(m)
    shift_eps = 10 * _EPS * max(abs(lo), abs(hi), 1.0)
    for k, mu in enumerate(lam):
        ab[1] = m.diag - (mu + shift_eps)
        v = rng.standard_normal(n)
        for _ in range(3):
            v = solve_banded((1, 1), ab, v, check_finite=False)
            v /= np.linalg.norm(v)
        # orthogonalize against earlier vectors of (near-)equal eigenvalues
        for j in range(k):
            if abs(lam[j] - mu) < 1e-7 * max(1.0, abs(mu)):
                v -= (vecs[:, j] @ v) * vecs[:, j]
                v /= np.linalg.norm(v)
        vecs[:, k] = v
    return vecs


def ql_implicit(m: TridiagonalSymmetric, vectors: bool = True, max_iter: int = 60):
    """Full spectrum by the implicit-shift QL algorithm (tqli).

    Pure Python loops, so only sensible for modest N (a few hundred).
    Returns unsorted ``(w, Z)``; raises ConvergenceError with the index of the
    eigenvalue that failed to deflate.
    """
    n = m.n
    d = m.diag.copy()
    e = np.append(m.offdiag, 0.0)
    z = np.eye(n) if vectors else None
    for l in range(n):
        it = 0
        while True:
            mm = l
            while mm < n - 1:
                dd = abs(d[mm]) + abs(d[mm + 1])
                if abs(e[mm]) <= _EPS * dd:
                    break
                mm += 1
            if mm == l:
                break
            it += 1
            if it > max_iter:
                raise ConvergenceError("implicit QL did not converge", index=l)
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[mm] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            i = mm - 1
            deflated = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[mm] = 0.0
                    deflated = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                if z is not None:
                    f = z[:, i + 1].copy()
                    z[:, i + 1] = s * z[:, i] + c * f
                    z[:, i] = c * z[:, i] - s * f
                i -= 1
            if deflated:
                continue
            d[l] -= p
            e[l] = g
            e[mm] = 0.0
    return d, z


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    # largest-magnitude component positive: makes ground states positive
    idx = np.argmax(np.abs(vecs), axis=0)
    sgn = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    sgn[sgn == 0] = 1.0
    return vecs * sgn


def eigen_tridiag(m: TridiagonalSymmetric, count: int, method: str = "lapack",
                  residual_tol: float = DEFAULT_TOLERANCES["eigen_residual"]):
    """Lowest ``count`` eigenpairs of a symmetric tridiagonal matrix.

    Parameters
    ----------
    m : TridiagonalSymmetric
    count : int
        Number of eigenpairs, ``1 <= count <= N``.
    method : {"lapack", "ql", "bisect"}
        ``"lapack"`` uses bisection + inverse iteration from LAPACK (fast, any N).
        ``"ql"`` runs the pure-Python implicit QL iteration and falls back to
        Sturm bisection if QL stalls. ``"bisect"`` is Sturm bisection followed by
        inverse iteration.
    residual_tol : float
        Every pair must satisfy ``|M v - lam v| <= residual_tol * (1 + |lam|)``.

    Returns
    -------
    w : ndarray, shape (count,)
        Eigenvalues in ascending order.
    V : ndarray, shape (N, count)
        Unit eigenvectors in columns, largest component positive.
    """
    if not 1 <= count <= m.n:
        raise ValueError(f"count must lie in [1, {m.n}], got {count}")
    if method == "lapack":
        w, v = eigh_tridiagonal(m.diag, m.offdiag, select="i",
                                select_range=(0, count - 1), check_finite=False)
    elif method == "ql":
        try:
            w_all, z = ql_implicit(m)
            order = np.argsort(w_all, kind="stable")[:count]
            w, v = w_all[order], z[:, order]
        except ConvergenceError:
            w = bisect_eigenvalues(m, count)
            v = _inverse_iteration(m, w)
    elif method == "bisect":
        w = bisect_eigenvalues(m, count)
        v = _inverse_iteration(m, w)
    else:
        raise ValueError(f"unknown method {method!r}")
    v = _fix_signs(v / np.linalg.norm(v, axis=0))
    res = np.linalg.norm(m.matvec(v) - v * w, axis=0)
    bad = np.nonzero(res > residual_tol * (1.0 + np.abs(w)))[0]
    if bad.size:
        j = int(bad[0])
        raise ConvergenceError(
            f"eigenpair {j} residual {res[j]:.3e} exceeds tolerance", index=j)
    return w, v


# ---------------------------------------------------------------------------
# ODE integration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Trajectory:
    s: np.ndarray  # (K,)
    y: np.ndarray  # (K, *state_shape)


def rk4_step(rhs, s, y, h):
    k1 = rhs(s, y)
    k2 = rhs(s + 0.5 * h, y + 0.5 * h * k1)
    k3 = rhs(s + 0.5 * h, y + 0.5 * h * k2)
    k4 = rhs(s + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_ode(rhs: Callable, y0, s_span: tuple[float, float],
                  step: float = DEFAULT_TOLERANCES["ode_step"],
                  method: str = "rk4") -> Trajectory:
    """Integrate ``y' = rhs(s, y)`` and sample on a uniform grid.

    The step is shrunk so that it divides the span exactly. ``y0`` may have any
    shape as long as ``rhs`` preserves it, which lets many initial conditions
    run in one batch. ``rk45`` uses an embedded Dormand-Prince pair with dense
    output evaluated on the same uniform grid.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    s0, s1 = map(float, s_span)
    y = np.array(y0, dtype=float)
    nsteps = max(1, int(math.ceil(abs(s1 - s0) / step - 1e-9)))
    s = np.linspace(s0, s1, nsteps + 1)
    h = (s1 - s0) / nsteps

    if method == "rk4":
        out = np.empty((nsteps + 1,) + y.shape)
        out[0] = y
        with np.errstate(over="ignore", invalid="ignore"):
            for i in range(nsteps):
                y = rk4_step(rhs, s[i], y, h)
                if not np.all(np.isfinite(y)):
                    raise IntegrationError(f"non-finite state at s={s[i + 1]:.6g}", s[i + 1])
                out[i + 1] = y
        return Trajectory(s, out)

    if method == "rk45":
        shape = y.shape

        def flat_rhs(t, z):
            return np.asarray(rhs(t, z.reshape(shape)), dtype=float).ravel()

        sol = solve_ivp(flat_rhs, (s0, s1), y.ravel(), method="RK45", t_eval=s,
                        rtol=1e-10, atol=1e-12, max_step=max(abs(h), 1e-12))
        if sol.status != 0 or not np.all(np.isfinite(sol.y)):
            bad = sol.t[-1] if sol.t.size else s0
            raise IntegrationError(f"rk45 failed near s={bad:.6g}: {sol.message}", bad)
        return Trajectory(s, sol.y.T.reshape((-1,) + shape))

    raise ValueError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureResult:
    value: float
    abs_error_estimate: float
    evaluations: int


def _call_vectorized(f, x):
    try:
        y = np.asarray(f(x), dtype=float)
        if y.shape == x.shape:
            return y
    except (TypeError, ValueError):
        pass
    return np.array([float(f(xi)) for xi in x])


# tanh-sinh nodes beyond |t| = 4 sit closer than 1e-37 to the endpoints
_TS_TMAX = 4.0


def _tanh_sinh_nodes(a, b, t):
    """Abscissae and weights of the double-exponential map for parameters ``t``."""
    hw = 0.5 * (b - a)
    u = 0.5 * math.pi * np.sinh(t)
    # distance to the nearer endpoint computed without cancellation
    dist = 2.0 * hw / (1.0 + np.exp(2.0 * np.abs(u)))
    x = np.where(t < 0, a + dist, b - dist)
    w = hw * 0.5 * math.pi * np.cosh(t) / np.cosh(u) ** 2
    keep = (x > a) & (x < b) & (w > 0)
    return x[keep], w[keep]


def _tanh_sinh(f, a, b, tol, rtol, max_level, budget):
    h = 1.0
    t = np.arange(-_TS_TMAX, _TS_TMAX + 0.5, 1.0)
    x, w = _tanh_sinh_nodes(a, b, t)
    fx = _call_vectorized(f, x)
    if not np.all(np.isfinite(fx)):
        raise QuadratureError("integrand not finite at a quadrature node")
    total = float(np.sum(w * fx))
    evals = x.size
    est = h * total
    err = math.inf
    for level in range(1, max_level + 1):
        h *= 0.5
        t = np.arange(-_TS_TMAX + h, _TS_TMAX, 2 * h)
        x, w = _tanh_sinh_nodes(a, b, t)
        fx = _call_vectorized(f, x)
        if not np.all(np.isfinite(fx)):
            raise QuadratureError("integrand not finite at a quadrature node", best=est)
        total += float(np.sum(w * fx))
        evals += x.size
        new = h * total
        err = abs(new - est)
        est = new
        if level >= 3 and err <= max(tol, rtol * abs(est)):
            return est, err, evals
        if evals > budget:
            break
    raise QuadratureError(
        f"tolerance not reached on [{a:.6g}, {b:.6g}] after {evals} evaluations "
        f"(last change {err:.3e})", best=est)


def adaptive_quad(f: Callable, a: float, b: float,
                  tol: float = DEFAULT_TOLERANCES["quad_tol"], rtol: float = 0.0,
                  breakpoints: Sequence[float] = (), max_level: int = 14,
                  max_evals: int = 400_000) -> QuadratureResult:
    """Integrate ``f`` over ``(a, b)`` with tanh-sinh quadrature.

    The double-exponential substitution clusters nodes at both endpoints, which
    handles integrands that vanish like ``exp(-c/t)`` or carry integrable
    endpoint singularities. Interior ``breakpoints`` split the interval; each
    piece is refined level by level until the change between levels is below
    ``max(tol, rtol*|piece|)`` (``tol`` is shared evenly between pieces).
    ``f`` is called with arrays when it supports that.
    """
    a, b = float(a), float(b)
    if not a < b:
        raise ValueError("need a < b")
    cuts = sorted(float(p) for p in breakpoints if a < p < b)
    edges = [a, *cuts, b]
    npiece = len(edges) - 1
    value = err = 0.0
    evals = 0
    for lo, hi in zip(edges[:-1], edges[1:]):
        try:
            v, e, n = _tanh_sinh(f, lo, hi, tol / npiece, rtol, max_level,
                                 max_evals - evals)
        except QuadratureError as exc:
            best = value + (exc.best if exc.best is not None else 0.0)
            raise QuadratureError(str(exc), best=best) from None
        value += v
        err += e
        evals += n
    return QuadratureResult(value, err, evals)


# ---------------------------------------------------------------------------
# regression
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r_squared: float
    residual_max: float


def fit_loglinear(xs, ys) -> FitResult:
    """Least-squares line ``y = slope*x + intercept``.

    Callers pass already log-transformed data (``log y`` against ``x``, or
    ``log y`` against ``log x`` for a power law).
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.ndim != 1 or x.shape != y.shape:
        raise ValueError("xs and ys must be 1-D of equal length")
    if x.size < 3:
        raise ValueError("need at least 3 points")
    if not np.all(np.isfinite(y)) or not np.all(np.isfinite(x)):
        raise ValueError("data must be finite")
    if np.any(np.diff(x) <= 0):
        raise ValueError("xs must be strictly increasing")
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx <= 0.0 or sxx <= (_EPS * np.abs(x).max()) ** 2 * x.size:
        raise ValueError("xs have zero variance")
    slope = float(xc @ (y - y.mean())) / sxx
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (slope * x + intercept)
    syy = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if syy == 0.0 else 1.0 - float(resid @ resid) / syy
    return FitResult(slope, intercept, min(1.0, max(0.0, r2)), float(np.abs(resid).max()))
