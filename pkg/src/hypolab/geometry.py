"""Sub-Riemannian systems, normal geodesics and distance estimates by shooting.

A system is a family of vector fields ``X_1..X_m`` on ``R^d``. Its Hamiltonian is
``l(x, xi) = sum_i <xi, X_i(x)>^2`` and normal geodesics are projections of the
flow

    x'  =  sum_i 2 <xi, X_i> X_i
    xi' = -sum_i 2 <xi, X_i> J_i^T xi,      J_i = dX_i/dx.

With ``l = 1/4`` the projected curve has unit speed in the metric ``g``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DistanceError
from .numerics import integrate_ode, rk4_step

CONSERVATION_TOL = 1e-8


@dataclass(frozen=True)
class SRSystem:
    """Vector fields with analytic Jacobians.

    ``frame(x)`` maps points of shape (..., d) to fields of shape (..., m, d);
    ``jacobian(x)`` returns (..., m, d, d) with ``J[i, a, b] = d X_i^a / d x_b``.
    """

    name: str
    dim: int
    m: int
    frame: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]

    def fields_at(self, x) -> np.ndarray:
        return self.frame(np.asarray(x, dtype=float))


def elliptic(dim: int = 2) -> SRSystem:
    def frame(x):
        return np.broadcast_to(np.eye(dim), x.shape[:-1] + (dim, dim)).copy()

    def jac(x):
        return np.zeros(x.shape[:-1] + (dim, dim, dim))

    return SRSystem("elliptic", dim, dim, frame, jac)


def grushin(gamma: int = 1, torus: bool = False) -> SRSystem:
    """``X_1 = d/dx1``, ``X_2 = a(x1) d/dx2`` with ``a = x1^gamma`` (or ``sin(pi x1/2)^gamma``)."""
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")

    def coef(x1):
        if torus:
            s = np.sin(0.5 * np.pi * x1)
            a = s**gamma
            da = gamma * s ** (gamma - 1) * 0.5 * np.pi * np.cos(0.5 * np.pi * x1) if gamma else 0 * x1
        else:
            a = x1**gamma
            da = gamma * x1 ** (gamma - 1) if gamma else 0 * x1
        return a, da

    def frame(x):
        a, _ = coef(x[..., 0])
        out = np.zeros(x.shape[:-1] + (2, 2))
        out[..., 0, 0] = 1.0
        out[..., 1, 1] = a
        return out

    def jac(x):
        _, da = coef(x[..., 0])
        out = np.zeros(x.shape[:-1] + (2, 2, 2))
        out[..., 1, 1, 0] = da
        return out

    tag = f"grushin({gamma}{', torus' if torus else ''})"
    return SRSystem(tag, 2, 2, frame, jac)


def heisenberg() -> SRSystem:
    """``X_1 = d/dx + 2y d/ds``, ``X_2 = d/dy - 2x d/ds`` on the universal cover ``R^3``.

    The compact quotient by the integer Heisenberg lattice is left implicit;
    distance queries should stay inside a fundamental box.
    """

    def frame(w):
        out = np.zeros(w.shape[:-1] + (2, 3))
        out[..., 0, 0] = 1.0
        out[..., 0, 2] = 2.0 * w[..., 1]
        out[..., 1, 1] = 1.0
        out[..., 1, 2] = -2.0 * w[..., 0]
        return out

    def jac(w):
        out = np.zeros(w.shape[:-1] + (2, 3, 3))
        out[..., 0, 2, 1] = 2.0
        out[..., 1, 2, 0] = -2.0
        return out

    return SRSystem("heisenberg", 3, 2, frame, jac)


CATALOG = {"elliptic": elliptic, "grushin": grushin, "heisenberg": heisenberg}


def from_name(name: str, gamma: int = 1) -> SRSystem:
    if name == "grushin":
        return grushin(gamma)
    if name == "grushin_torus":
        return grushin(gamma, torus=True)
    if name in CATALOG:
        return CATALOG[name]()
    raise ValueError(f"unknown system {name!r}")


# ---------------------------------------------------------------------------
# Hamiltonian and flow
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CotangentState:
    x: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        xi = np.asarray(self.xi, dtype=float)
        if x.shape != xi.shape or x.ndim != 1:
            raise ValueError("x and xi must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(xi))):
            raise ValueError("state must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "xi", xi)

    def packed(self) -> np.ndarray:
        return np.concatenate([self.x, self.xi])


@dataclass
class GeodesicPath:
    s: np.ndarray
    x: np.ndarray   # (samples, d)
    xi: np.ndarray  # (samples, d)
    ell0: float
    ell: np.ndarray

    def __len__(self):
        return self.s.size

    def state(self, i) -> CotangentState:
        return CotangentState(self.x[i], self.xi[i])

    @property
    def drift(self) -> float:
        return float(np.abs(self.ell - self.ell0).max())

    @property
    def end(self) -> np.ndarray:
        return self.x[-1]


def _ell(sys: SRSystem, x, xi):
    pairing = np.einsum("...id,...d->...i", sys.frame(x), xi)
    return np.sum(pairing**2, axis=-1)


def hamiltonian(sys: SRSystem, st: CotangentState) -> float:
    """``sum_i <xi, X_i(x)>^2``."""
    return float(_ell(sys, st.x, st.xi))


def hamiltonian_rhs(sys: SRSystem):
    d = sys.dim

    def rhs(s, y):
        x, xi = y[..., :d], y[..., d:]
        F = sys.frame(x)
        J = sys.jacobian(x)
        p = 2.0 * np.einsum("...id,...d->...i", F, xi)
        dx = np.einsum("...i,...id->...d", p, F)
        dxi = -np.einsum("...i,...iab,...a->...b", p, J, xi)
        return np.concatenate([dx, dxi], axis=-1)

    return rhs


def horizontal_velocity(sys: SRSystem, x, xi) -> np.ndarray:
    """``sum_i 2 <xi, X_i(x)> X_i(x)``."""
    F = sys.frame(np.asarray(x, dtype=float))
    p = 2.0 * np.einsum("...id,...d->...i", F, xi)
    return np.einsum("...i,...id->...d", p, F)


def _path_from(sys, s, y):
    d = sys.dim
    x, xi = y[:, :d], y[:, d:]
    ell = _ell(sys, x, xi)
    return GeodesicPath(s, x, xi, float(ell[0]), ell)


def flow_geodesic(sys: SRSystem, st0: CotangentState, S: float, step: float = 1e-3,
                  method: str = "rk4") -> GeodesicPath:
    """Integrate the Hamiltonian flow from ``st0`` over ``[0, S]``."""
    if st0.x.size != sys.dim:
        raise ValueError(f"state dimension {st0.x.size} does not match system dimension {sys.dim}")
    tr = integrate_ode(hamiltonian_rhs(sys), st0.packed(), (0.0, float(S)), step, method=method)
    return _path_from(sys, tr.s, tr.y)


def normalize_covector(sys: SRSystem, x, xi, level: float = 0.25) -> np.ndarray:
    """Rescale ``xi`` so that ``l(x, xi) = level``."""
    q = float(_ell(sys, np.asarray(x, float), np.asarray(xi, float)))
    if q <= 0:
        raise ValueError("covector annihilates the distribution; l = 0")
    return np.asarray(xi, float) * math.sqrt(level / q)


# ---------------------------------------------------------------------------
# metric and length
# ---------------------------------------------------------------------------

def sr_controls(sys: SRSystem, x, v):
    """Least-norm ``u`` with ``sum u_i X_i(x) = v`` and the residual norm."""
    A = sys.fields_at(x).T  # (d, m)
    v = np.asarray(v, dtype=float)
    u, *_ = np.linalg.lstsq(A, v, rcond=None)
    return u, float(np.linalg.norm(A @ u - v))


def sr_metric(sys: SRSystem, x, v) -> float:
    """``g(x, v) = inf{ sum u_i^2 : sum u_i X_i(x) = v }``, ``inf`` off the span."""
    u, res = sr_controls(sys, x, v)
    if res > 1e-10 * max(1.0, float(np.linalg.norm(v))):
        return math.inf
    return float(u @ u)


def path_length(sys: SRSystem, path: GeodesicPath) -> float:
    """Trapezoid integral of ``sqrt(g(x, x'))`` along the samples."""
    vel = horizontal_velocity(sys, path.x, path.xi)
    speed = np.empty(len(path))
    for i in range(len(path)):
        g = sr_metric(sys, path.x[i], vel[i])
        if not math.isfinite(g):
            raise ValueError(f"path not horizontal at s={path.s[i]:.6g}")
        speed[i] = math.sqrt(g)
    return float(np.trapezoid(speed, path.s))


# ---------------------------------------------------------------------------
# shooting
# ---------------------------------------------------------------------------

def _as_box(box, d):
    b = np.array([[-np.inf, np.inf]] * d, dtype=float)
    for k, rng in enumerate(box):
        if rng is not None:
            lo, hi = rng
            b[k] = (-np.inf if lo is None else lo, np.inf if hi is None else hi)
    if np.any(b[:, 0] > b[:, 1]):
        raise ValueError("box ranges must satisfy lo <= hi")
    return b


def _inside(x, box):
    return np.all((x >= box[:, 0]) & (x <= box[:, 1]), axis=-1)


def _van_der_corput(n, base=2):
    out = np.zeros(n)
    for k in range(n):
        q, denom, i = 0.0, 1.0, k
        while i:
            denom *= base
            i, r = divmod(i, base)
            q += r / denom
        out[k] = q
    return out


def covector_directions(d: int, shots: int) -> np.ndarray:
    """Unit directions for shooting; the first ``n`` of ``n+1`` requests agree.

    In the plane the angles follow the base-2 van der Corput sequence, so for a
    power of two they are exactly ``2 pi k / shots``. In three dimensions a
    Halton (2, 3) sequence is mapped area-uniformly to the sphere.
    """
    if d == 2:
        th = 2 * math.pi * _van_der_corput(shots, 2)
        return np.column_stack([np.cos(th), np.sin(th)])
    if d == 3:
        u = _van_der_corput(shots, 2)
        w = _van_der_corput(shots, 3)
        z = 1 - 2 * w
        r = np.sqrt(np.clip(1 - z * z, 0, None))
        th = 2 * math.pi * u
        return np.column_stack([r * np.cos(th), r * np.sin(th), z])
    raise ValueError("shooting supports d = 2 or 3")


@dataclass(frozen=True)
class DistanceResult:
    d_est: float
    witness: GeodesicPath
    shot_index: int
    valid_shots: int


def _refine_entry(rhs, y_prev, s_prev, h, box, tol=1e-8):
    lo, hi = 0.0, h
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        y_mid = rk4_step(rhs, s_prev, y_prev, mid)
        if _inside(y_mid[: box.shape[0]], box):
            hi = mid
        else:
            lo = mid
    return s_prev + hi


def distance_to_set(sys: SRSystem, x0, omega, shots: int = 256, S_max: float = 3.0,
                    step: float = 1e-3, drift_tol: float = 1e-6) -> DistanceResult:
    """Upper estimate of ``d(x0, omega)`` by shooting unit-speed normal geodesics.

    ``omega`` is a sequence of ``(lo, hi)`` ranges per coordinate; ``None`` in
    place of a range or of either bound leaves that side unbounded. The first shots to enter ``omega`` are refined by bisection in
    ``s`` and the smallest entry time wins, ties going to the lower shot index.
    """
    if shots < 8:
        raise ValueError("shots must be >= 8")
    if S_max <= 0:
        raise ValueError("S_max must be positive")
    d = sys.dim
    x0 = np.asarray(x0, dtype=float)
    box = _as_box(omega, d)
    dirs = covector_directions(d, shots)

    if _inside(x0, box):
        xi = normalize_covector(sys, x0, next(v for v in dirs if _ell(sys, x0, v) > 1e-14))
        path = _path_from(sys, np.zeros(1), np.concatenate([x0, xi])[None])
        return DistanceResult(0.0, path, 0, shots)

    q = _ell(sys, np.broadcast_to(x0, dirs.shape), dirs)
    usable = np.nonzero(q > 1e-12)[0]
    xi0 = dirs[usable] * np.sqrt(0.25 / q[usable])[:, None]
    y = np.concatenate([np.broadcast_to(x0, xi0.shape), xi0], axis=1)
    rhs = hamiltonian_rhs(sys)
    alive = np.ones(len(usable), bool)

    nsteps = int(math.ceil(S_max / step - 1e-9))
    h = S_max / nsteps
    best = None
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(nsteps):
            s_prev = k * h
            y_new = rk4_step(rhs, s_prev, y, h)
            bad = ~np.all(np.isfinite(y_new), axis=1)
            if bad.any():
                alive &= ~bad
                y_new[bad] = y[bad]
            drift = np.abs(_ell(sys, y_new[:, :d], y_new[:, d:]) - 0.25)
            alive &= drift <= drift_tol
            hit = alive & _inside(y_new[:, :d], box)
            if hit.any():
                for j in np.nonzero(hit)[0]:
                    s_hit = _refine_entry(rhs, y[j], s_prev, h, box)
                    if best is None or s_hit < best[0]:
                        best = (s_hit, j)
                break
            y = y_new

    if best is None:
        raise DistanceError(
            f"no shot reached omega within S_max={S_max} ({int(alive.sum())}/{shots} shots valid)",
            coverage=float(alive.sum()) / shots)
    s_hit, j = best
    st0 = CotangentState(x0, xi0[j])
    witness = flow_geodesic(sys, st0, s_hit, step)
    return DistanceResult(float(s_hit), witness, int(usable[j]), int(alive.sum()))


def min_observation_time(sys: SRSystem, domain, omega, grid: int = 8, shots: int = 256,
                         S_max: float = 4.0, step: float = 1e-3) -> float:
    """``max_x d(x, omega)`` over a ``grid^d`` tensor grid of ``domain``."""
    if grid < 4:
        raise ValueError("grid must be >= 4")
    dom = _as_box(domain, sys.dim)
    axes = [np.linspace(lo, hi, grid) for lo, hi in dom]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, sys.dim)
    worst = 0.0
    for x in pts:
        try:
            r = distance_to_set(sys, x, omega, shots, S_max, step)
        except DistanceError as exc:
            raise DistanceError(f"at x={x.tolist()}: {exc}", coverage=exc.coverage) from exc
        worst = max(worst, r.d_est)
    return worst


def write_path_csv(path: GeodesicPath, dest) -> None:
    d = path.x.shape[1]
    with open(dest, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["s"] + [f"x{i + 1}" for i in range(d)] + [f"xi{i + 1}" for i in range(d)] + ["ell"])
        for i in range(len(path)):
            row = [path.s[i], *path.x[i], *path.xi[i], path.ell[i]]
            w.writerow(["%.17g" % v for v in row])
