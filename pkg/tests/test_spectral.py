import math

import numpy as np
import pytest

from hypolab.errors import ConvergenceError
from hypolab.numerics import fit_loglinear
from hypolab.spectral import (
    OperatorSpec,
    SpectralVector,
    apply_calculus,
    build_basis,
    frequency_function,
    gevrey_norm,
    hsl_norm,
    jensen_check,
    load_basis,
    sample_on_grid,
    save_basis,
    spatial_gram,
    subelliptic_ratio,
    torus_ratio,
)


@pytest.fixture(scope="module")
def elliptic():
    return build_basis(OperatorSpec("elliptic", 0, grid_n=513, fourier_max=4, branch_max=4))


@pytest.fixture(scope="module")
def grushin():
    return build_basis(OperatorSpec("grushin_rectangle", 1, grid_n=513, fourier_max=12, branch_max=3))


@pytest.fixture(scope="module")
def torus():
    return build_basis(OperatorSpec("grushin_torus", 1, grid_n=257, fourier_max=4, branch_max=2))


# --- OperatorSpec ------------------------------------------------------------

@pytest.mark.parametrize("kwargs,field", [
    (dict(gamma=-1), "gamma"),
    (dict(grid_n=100), "grid_n"),
    (dict(grid_n=65), "grid_n"),
    (dict(fourier_max=0), "fourier_max"),
    (dict(family="sphere"), "family"),
])
def test_spec_validation_names_field(kwargs, field):
    with pytest.raises(ValueError, match=field):
        OperatorSpec(**kwargs)


def test_hypoellipticity_index():
    assert OperatorSpec(gamma=3).k == 4
    assert OperatorSpec("elliptic", 0).k == 1


# --- build_basis -------------------------------------------------------------

def test_elliptic_closed_form(elliptic):
    exact = [(b * math.pi / 2) ** 2 + (n * math.pi) ** 2 for n, b in zip(elliptic.fourier_n, elliptic.branches)]
    np.testing.assert_allclose(elliptic.lambdas, exact, rtol=1e-6)
    j = elliptic.index_of(1, 1)
    assert elliptic.lambdas[j] == pytest.approx(math.pi**2 / 4 + math.pi**2, rel=1e-7)


def test_grushin_ground_state_near_n_pi():
    b = build_basis(OperatorSpec(gamma=1, grid_n=1025, fourier_indices=(40,)))
    assert 0.99 <= b.lambdas[0] / (40 * math.pi) <= 1.01


def test_growth_exponent_gamma2():
    ns = np.arange(10, 101, 10)
    b = build_basis(OperatorSpec(gamma=2, grid_n=1025, fourier_indices=tuple(ns)))
    fit = fit_loglinear(np.log(b.fourier_n.astype(float)), np.log(b.lambdas))
    assert abs(fit.slope - 2 / 3) <= 0.05


def test_sorted_and_monotone_in_n(grushin):
    assert np.all(np.diff(grushin.lambdas) >= 0)
    ground = grushin.ground_modes()
    order = np.argsort(ground.fourier_n)
    assert np.all(np.diff(ground.lambdas[order]) > 0)


def test_profiles_normalized_and_ground_state_positive(grushin):
    h = grushin.h
    norms = h * np.sum(grushin.profiles**2, axis=1)
    np.testing.assert_allclose(norms, 1.0, atol=1e-8)
    for p in grushin.ground_modes().profiles:
        inner = p[1:-1]
        assert np.all(inner > 0) or np.all(inner < 0)


def test_orthonormality(grushin):
    g = spatial_gram(grushin, (-1, 1), (0, 1), shortcut=False)
    assert np.abs(g - np.eye(len(grushin))).max() <= 1e-8


def test_richardson_stable_between_grids():
    idx = (1, 5, 20)
    a = build_basis(OperatorSpec(gamma=1, grid_n=1025, fourier_indices=idx, branch_max=2))
    b = build_basis(OperatorSpec(gamma=1, grid_n=2049, fourier_indices=idx, branch_max=2))
    np.testing.assert_allclose(a.lambdas, b.lambdas, rtol=1e-6)


def test_thread_count_does_not_change_results():
    a = build_basis(OperatorSpec(gamma=1, grid_n=257, fourier_max=8, branch_max=2, threads=1))
    b = build_basis(OperatorSpec(gamma=1, grid_n=257, fourier_max=8, branch_max=2, threads=4))
    np.testing.assert_array_equal(a.lambdas, b.lambdas)
    np.testing.assert_array_equal(a.profiles, b.profiles)


def test_lambda_cutoff():
    b = build_basis(OperatorSpec(gamma=1, grid_n=257, fourier_max=20, branch_max=3, lambda_cutoff=40.0))
    assert len(b) > 0 and b.lambdas.max() <= 40.0


def test_torus_has_both_parities(torus):
    ns = set(torus.fourier_n.tolist())
    assert {0, 1, -1, 4, -4} <= ns
    g = spatial_gram(torus, (-1, 1), (0, 1), shortcut=False)
    assert np.abs(g - np.eye(len(torus))).max() <= 1e-8


def test_eigensolver_failure_carries_mode(monkeypatch):
    import hypolab.spectral as sp

    def broken(m, count, **kw):
        raise ConvergenceError("boom", index=0)

    monkeypatch.setattr(sp, "eigen_tridiag", broken)
    with pytest.raises(ConvergenceError) as info:
        sp.build_basis(OperatorSpec(gamma=1, grid_n=129, fourier_max=1))
    assert info.value.index == (1, 1)


# --- calculus and norms ------------------------------------------------------

def test_calculus_identity_and_scaling(grushin):
    u = SpectralVector.random(grushin, np.random.default_rng(0))
    np.testing.assert_array_equal(apply_calculus(u, lambda l: np.ones_like(l)).coeffs, u.coeffs)
    e = SpectralVector.mode(grushin, 3, 2.0)
    assert apply_calculus(e, lambda l: l).coeffs[3] == pytest.approx(2.0 * grushin.lambdas[3])


def test_calculus_roundtrip_and_homomorphism(grushin):
    u = SpectralVector.random(grushin, np.random.default_rng(1))
    t = 0.01
    back = apply_calculus(apply_calculus(u, lambda l: np.exp(-t * l)), lambda l: np.exp(t * l))
    np.testing.assert_allclose(back.coeffs, u.coeffs, rtol=1e-12, atol=1e-12)
    f = lambda l: 1 / (1 + l)
    g = lambda l: np.sqrt(l)
    one = apply_calculus(u, lambda l: f(l) * g(l))
    two = apply_calculus(apply_calculus(u, f), g)
    np.testing.assert_allclose(one.coeffs, two.coeffs, rtol=1e-12, atol=1e-15)


def test_calculus_rejects_nonfinite(grushin):
    u = SpectralVector.random(grushin, np.random.default_rng(2))
    with pytest.raises(ValueError, match="lambda_0"):
        apply_calculus(u, lambda l: 1 / (l - l[0]))


def test_hsl_norm_examples(grushin):
    rng = np.random.default_rng(3)
    u = SpectralVector.random(grushin, rng)
    assert hsl_norm(u, 0) == pytest.approx(np.linalg.norm(u.coeffs))
    e = SpectralVector.mode(grushin, 5, -3.0)
    assert hsl_norm(e, 2) == pytest.approx((1 + grushin.lambdas[5]) * 3.0)
    for _ in range(50):
        v = SpectralVector.random(grushin, rng)
        assert hsl_norm(v, 1) ** 2 <= hsl_norm(v, 0) * hsl_norm(v, 2) * (1 + 1e-14)


def test_gevrey_norm(grushin):
    rng = np.random.default_rng(4)
    u = SpectralVector.random(grushin, rng)
    assert gevrey_norm(u, 1.0, 0.0) == pytest.approx(hsl_norm(u, 0), rel=1e-14)
    j = 2
    e = SpectralVector.mode(grushin, j, 0.5)
    assert gevrey_norm(e, 1.0, 0.1) == pytest.approx(0.5 * math.exp(0.1 * grushin.lambdas[j]))
    T = 0.5
    low = grushin.lambdas * T <= 300
    c = np.where(low, u.coeffs, 0.0)
    v = SpectralVector(grushin, c)
    heated = apply_calculus(v, lambda l: np.exp(-T * l))
    assert gevrey_norm(heated, 1.0, T) == pytest.approx(hsl_norm(v, 0), rel=1e-12)


def test_gevrey_guard_names_lambda_max(grushin):
    u = SpectralVector.mode(grushin, len(grushin) - 1)
    with pytest.raises(OverflowError, match="lambda_max"):
        gevrey_norm(u, 1.0, 1e3)


def test_frequency_function(grushin):
    j = 4
    e = SpectralVector.mode(grushin, j, 7.0)
    assert frequency_function(e, 1.0) == pytest.approx((1 + grushin.lambdas[j]) ** 0.5)
    with pytest.raises(ValueError):
        frequency_function(SpectralVector.zeros(grushin), 1.0)


def _random_vectors(basis, count, rng):
    # mix of scales so the spectrum is explored unevenly
    c = rng.standard_normal((count, len(basis)))
    c *= np.exp(rng.uniform(-3, 3, (count, len(basis))))
    return c


def test_frequency_inequalities_on_random_vectors(grushin):
    rng = np.random.default_rng(5)
    lam = grushin.lambdas
    for c in _random_vectors(grushin, 2000, rng):
        u = SpectralVector(grushin, c)
        hu = apply_calculus(u, lambda l: 1 / (1 + l))
        assert frequency_function(hu, 1.0) <= 2 * frequency_function(u, 1.0)
        F = np.sqrt(1 + lam)
        G = 1 + lam
        a = np.linalg.norm(F * c) * np.linalg.norm(G * c)
        b = 2 * np.linalg.norm(F * G * c) * np.linalg.norm(c)
        assert a <= b


def test_jensen(grushin):
    rng = np.random.default_rng(6)
    e = SpectralVector.mode(grushin, 3, 2.0)
    lhs, rhs = jensen_check(e, lambda s: s + 1, lambda s: 1 / np.sqrt(s))
    assert lhs == pytest.approx(rhs, rel=1e-14)
    alpha = 0.5
    for c in _random_vectors(grushin, 500, rng):
        u = SpectralVector(grushin, c)
        lhs, rhs = jensen_check(u, lambda s: s + 1, lambda s: 1 / np.sqrt(s))
        assert lhs <= rhs * (1 + 1e-12)
        # ||u|| / ||u||_{H^-1} <= ||u||_{H^1} / ||u||
        assert hsl_norm(u, 0) / hsl_norm(u, -1) <= hsl_norm(u, 1) / hsl_norm(u, 0) * (1 + 1e-12)
        lhs, rhs = jensen_check(u, lambda s: s, lambda s: np.exp(-3 * np.sqrt(alpha * s)))
        assert lhs <= rhs * (1 + 1e-12)


# --- physical space ----------------------------------------------------------

def test_sampling_dirichlet_and_zero(grushin):
    j = grushin.index_of(1, 1)
    vals = sample_on_grid(SpectralVector.mode(grushin, j), 65, 33)
    np.testing.assert_allclose(vals[:, 0], 0.0, atol=1e-14)
    assert not np.any(sample_on_grid(SpectralVector.zeros(grushin), 9, 9))


def test_parseval(grushin):
    rng = np.random.default_rng(7)
    c = np.zeros(len(grushin))
    c[:10] = rng.standard_normal(10)
    u = SpectralVector(grushin, c)
    vals = sample_on_grid(u, 512, 512)
    h1, h2 = 2 / 511, 1 / 511
    w1 = np.full(512, h1)
    w1[[0, -1]] /= 2
    w2 = np.full(512, h2)
    w2[[0, -1]] /= 2
    grid_norm = math.sqrt(w1 @ vals**2 @ w2)
    assert abs(grid_norm / hsl_norm(u, 0) - 1) <= 0.01


def test_partial_gram_matches_grid_quadrature(grushin):
    sub = grushin.subset(np.arange(6))
    g = spatial_gram(sub, (0.2, 0.7), (0.1, 0.6))
    x1 = np.linspace(0.2, 0.7, 2001)
    x2 = np.linspace(0.1, 0.6, 2001)
    phi = sub.profiles_at(x1)[:, None, :] * sub.x2_factors(x2)[None, :, :]
    w1 = np.full(x1.size, x1[1] - x1[0])
    w1[[0, -1]] /= 2
    w2 = np.full(x2.size, x2[1] - x2[0])
    w2[[0, -1]] /= 2
    ref = np.einsum("a,b,abi,abj->ij", w1, w2, phi, phi)
    np.testing.assert_allclose(g, ref, atol=1e-5)


def test_shortcut_matches_full_gram(grushin):
    a = spatial_gram(grushin, (0.3, 0.9), (0, 1))
    b = spatial_gram(grushin, (0.3, 0.9), (0, 1), shortcut=False)
    assert np.abs(a - b).max() <= 1e-12


# --- subelliptic ratio -------------------------------------------------------

def test_constant_ratio_is_one():
    u = np.full((64, 32), 3.0)
    assert torus_ratio(u, 1) == pytest.approx(1.0, rel=1e-12)


def test_elliptic_ratio_at_most_one():
    spec = OperatorSpec("grushin_torus", 0, grid_n=129, fourier_max=1)
    r = subelliptic_ratio(spec, 40, band=(4, 8), seed=1, nx1=128)
    assert r.max() <= 1 + 1e-10


def test_ratio_needs_torus():
    with pytest.raises(ValueError):
        subelliptic_ratio(OperatorSpec(), 3)


# --- basis file --------------------------------------------------------------

def test_basis_roundtrip(tmp_path, torus):
    p = tmp_path / "basis.txt"
    save_basis(torus, p)
    back = load_basis(p)
    assert back.spec == torus.spec
    np.testing.assert_array_equal(back.lambdas, torus.lambdas)
    np.testing.assert_array_equal(back.profiles, torus.profiles)
    np.testing.assert_array_equal(back.fourier_n, torus.fourier_n)


def test_load_rejects_garbage(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("hello\n")
    with pytest.raises(ValueError):
        load_basis(p)
