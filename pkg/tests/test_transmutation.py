import csv
import math

import numpy as np
import pytest
from scipy.integrate import quad

from hypolab.transmutation import (
    I_asymptotic,
    I_of_lambda,
    TransmuteParams,
    laplace_ratio,
    laplace_sweep,
    log_I,
    norm_equivalence_check,
    ratio_constants,
    transmute,
    write_sweep_csv,
)
from hypolab.evolution import wave_evolve
from hypolab.spectral import OperatorSpec, SpectralVector, build_basis, hsl_norm

P1 = TransmuteParams(T=1.0, S=0.5, alpha=1.0)

# extreme ratios I(T,lam)(1+lam)^{3/4}e^{2 sqrt(alpha lam)} on lam in linspace(1, 500, 2000),
# T=1, S=0.5, alpha=0.625 (measured once, frozen)
C_LOW = 0.1879614314535291
C_HIGH = 0.8335026264581726


@pytest.fixture(scope="module")
def basis():
    return build_basis(OperatorSpec(gamma=1, grid_n=513, fourier_max=40, branch_max=4, lambda_cutoff=500))


def direct(p, lam):
    f = lambda t: math.exp(-p.alpha * (1 / t + 1 / (p.T - t)) - lam * t)
    pts = [min(0.5 * p.T, math.sqrt(p.alpha / lam))] if lam > 0 else None
    return quad(f, 0, p.T, epsabs=0, epsrel=1e-13, limit=500, points=pts)[0]


def test_params_validation():
    with pytest.raises(ValueError, match="alpha"):
        TransmuteParams(1.0, 1.0, 2.0)
    with pytest.raises(ValueError, match="T"):
        TransmuteParams(0.0, 1.0)
    assert TransmuteParams(S=2.0).alpha == pytest.approx(10.0)


@pytest.mark.parametrize("lam", [0.0, 0.5, 3.0, 40.0, 700.0])
def test_I_matches_scipy(lam):
    assert I_of_lambda(P1, lam) == pytest.approx(direct(P1, lam), rel=1e-11)


def test_upper_bound_and_monotone():
    lams = np.concatenate([[0.0], np.geomspace(0.1, 1e4, 40)])
    vals = np.array([log_I(P1, x) for x in lams])
    assert np.all(vals <= math.log(P1.T) - 4 * P1.alpha / P1.T)
    assert np.all(np.diff(vals) < 0)


def test_laplace_ratio_at_large_lambda():
    assert abs(laplace_ratio(P1, 1e4) - 1) <= 0.15


def test_asymptotic_formula_algebra():
    a, b = I_asymptotic(P1, 400.0), I_asymptotic(P1, 800.0)
    shift = 2 * math.sqrt(P1.alpha) * (math.sqrt(800) - math.sqrt(400))
    assert b / a == pytest.approx(2 ** -0.75 * math.exp(-shift), rel=1e-12)
    with pytest.raises(ValueError):
        I_asymptotic(P1, 0.5)


def test_ratio_tends_to_one():
    sw = laplace_sweep(P1, [1e2, 1e3, 1e4, 1e5])
    gaps = np.abs(sw.ratio - 1)
    assert np.all(np.diff(gaps) < 0)


def test_correction_is_bounded_by_quarter_power():
    # |ratio - 1| lam^{1/4} stays bounded (and in fact decays)
    sw = laplace_sweep(P1, np.geomspace(1e2, 1e6, 9))
    scaled = np.abs(sw.ratio - 1) * sw.lambdas**0.25
    assert scaled.max() <= 1.0
    assert scaled[-1] < scaled[0]


def test_correction_leading_term():
    # second-order Laplace term for alpha = T = 1: ratio - 1 ~ -(13/16) lam^{-1/2}
    lam = 1e6
    assert (laplace_ratio(P1, lam) - 1) * math.sqrt(lam) == pytest.approx(-13 / 16, rel=0.02)


def test_underflow_flush(caplog):
    p = TransmuteParams(T=1.0, S=1.0, alpha=50.0)
    assert I_of_lambda(p, 1e6) == 0.0
    assert log_I(p, 1e6) < -700


def test_transmute_zero_and_single_mode(basis):
    p = TransmuteParams()
    w = transmute(p, SpectralVector.zeros(basis))
    assert not np.any(w.u.coeffs) and not np.any(w.ut.coeffs)
    j = 9
    w = transmute(p, SpectralVector.mode(basis, j, 1.7))
    assert not np.any(w.u.coeffs)
    assert w.ut.coeffs[j] == pytest.approx(1.7 * I_of_lambda(p, basis.lambdas[j]), rel=1e-14)


def test_transmute_against_direct_quadrature(basis):
    p = TransmuteParams()
    rng = np.random.default_rng(0)
    picks = rng.choice(len(basis), 50, replace=False)
    y0 = SpectralVector.random(basis, rng)
    w = transmute(p, y0)
    assert np.all(w.u.coeffs == 0.0)
    for j in picks:
        ref = direct(p, basis.lambdas[j]) * y0.coeffs[j]
        assert w.ut.coeffs[j] == pytest.approx(ref, rel=1e-10)


def test_transmuted_wave_starts_at_rest_position(basis):
    p = TransmuteParams()
    y0 = SpectralVector.random(basis, np.random.default_rng(1))
    w = transmute(p, y0)
    # u(s) = sin(sqrt(lam) s)/sqrt(lam) * I y0 solves the modal wave equation
    s = 0.3
    out = wave_evolve(w, s)
    om = np.sqrt(basis.lambdas)
    np.testing.assert_allclose(out.u.coeffs, np.sin(om * s) / om * w.ut.coeffs, rtol=1e-13, atol=1e-300)


def test_norm_sandwich_single_mode(basis):
    p = TransmuteParams()
    for j in (0, 5, 40):
        lo, mid, hi = norm_equivalence_check(p, SpectralVector.mode(basis, j), 0.0)
        assert lo == pytest.approx(mid, rel=1e-12) and hi == pytest.approx(mid, rel=1e-12)


def test_norm_sandwich_random(basis):
    p = TransmuteParams()
    assert ratio_constants(p, np.linspace(1, 500, 2000)) == pytest.approx((C_LOW, C_HIGH), rel=1e-9)
    rng = np.random.default_rng(2)
    for s in (-1.0, 0.0, 1.0):
        for _ in range(20):
            y0 = SpectralVector.random(basis, rng)
            lo, mid, hi = norm_equivalence_check(p, y0, s)
            assert lo <= mid * (1 + 1e-12) and mid <= hi * (1 + 1e-12)
            lam = basis.lambdas
            weighted = np.linalg.norm((1 + lam) ** ((s - 1.5) / 2) * np.exp(-2 * np.sqrt(p.alpha * lam)) * y0.coeffs)
            assert C_LOW * weighted <= mid <= C_HIGH * weighted


def test_refined_sqrt_lower_bound(basis):
    p = TransmuteParams()
    rng = np.random.default_rng(3)
    lam = basis.lambdas
    for _ in range(20):
        y0 = SpectralVector.random(basis, rng)
        iy = transmute(p, y0).ut
        rhs = np.linalg.norm((lam + 1) ** -1.25 * np.exp(-2 * np.sqrt(p.alpha * lam)) * y0.coeffs)
        assert hsl_norm(iy, -1.0) >= C_LOW * rhs


def test_norm_check_rejects_zero(basis):
    with pytest.raises(ValueError):
        norm_equivalence_check(TransmuteParams(), SpectralVector.zeros(basis), 0.0)


def test_sweep_csv(tmp_path):
    sw = laplace_sweep(P1, [1e2, 1e3, 1e4])
    dest = tmp_path / "sweep.csv"
    write_sweep_csv(sw, dest)
    rows = list(csv.reader(dest.open()))
    assert rows[0] == ["lambda", "I_num", "I_asym", "ratio"]
    assert float(rows[2][3]) == pytest.approx(sw.ratio[1], rel=1e-15)
