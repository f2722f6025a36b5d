import json
import math

import numpy as np
import pytest

from hypolab.evolution import ObservationRegion, restricted_heat_norm
from hypolab.observability import (
    admissible_D,
    frequency_cost_experiment,
    gevrey_cost_experiment,
    gramian_min_eig,
    heat_gramian,
    lowfreq_cost_experiment,
    min_eigenvalue,
    minimal_power,
    parabolic_tradeoff_experiment,
    tunneling_experiment,
)
from hypolab.spectral import OperatorSpec, SpectralVector, build_basis

OMEGA = ObservationRegion((0.3, 0.9))
FULL = ObservationRegion()
LAMBDA_GRID = np.arange(40.0, 301.0, 20.0)


@pytest.fixture(scope="module")
def tun1():
    return build_basis(OperatorSpec(gamma=1, grid_n=2049, fourier_indices=tuple(range(20, 81)), threads=4))


@pytest.fixture(scope="module")
def low():
    return build_basis(OperatorSpec(gamma=1, grid_n=1025, fourier_max=100, branch_max=8,
                                    lambda_cutoff=300, threads=4))


@pytest.fixture(scope="module")
def small():
    return build_basis(OperatorSpec(gamma=1, grid_n=513, fourier_max=6, branch_max=3))


# --- tunnelling ---------------------------------------------------------------

def test_full_domain_masses_are_one(tun1):
    r = tunneling_experiment(tun1, FULL)
    np.testing.assert_allclose(r.gram_min_eigs, 1.0, atol=1e-8)
    assert abs(r.fitted_exponent) <= 1e-8


def test_gamma1_decay_rate_and_prefactor(tun1):
    r = tunneling_experiment(tun1, OMEGA)
    assert abs(r.extras["exponent_in_lambda"] / 0.09 - 1) <= 0.10
    assert 0.5 <= r.extras["prefactor_ratio_min"] and r.extras["prefactor_ratio_max"] <= 2.0
    assert r.extras["excluded"] == 0


def test_gamma2_selects_natural_power():
    ns = tuple(np.unique(np.geomspace(2, 2000, 40).astype(int)))
    b = build_basis(OperatorSpec(gamma=2, grid_n=2049, fourier_indices=ns, threads=4))
    r = tunneling_experiment(b, ObservationRegion((0.4, 0.9)))
    r2 = r.extras["r2_by_power"]
    assert r.extras["best_power"] == 1.5
    assert r2[1.5] - max(r2[1.0], r2[2.0]) >= 0.02


def test_report_json(tmp_path, tun1):
    r = tunneling_experiment(tun1, OMEGA)
    dest = tmp_path / "t.json"
    r.write_json(dest)
    data = json.loads(dest.read_text())
    assert data["exponent_in_lambda"] == pytest.approx(r.extras["exponent_in_lambda"])
    assert list(data) == sorted(data)


# --- Gramians -----------------------------------------------------------------

def test_full_domain_gramian_is_diagonal(small):
    T = 0.7
    G = heat_gramian(small, FULL, T)
    lam = small.lambdas
    np.testing.assert_allclose(np.diag(G), -np.expm1(-2 * lam * T) / (2 * lam), rtol=1e-12)
    assert np.abs(G - np.diag(np.diag(G))).max() <= 1e-12


def test_one_dimensional_gramian(small):
    sub = small.subset([3])
    G = heat_gramian(sub, OMEGA, 0.5)
    ref = restricted_heat_norm(SpectralVector.mode(small, 3), OMEGA.with_window(0, 0.5))
    assert G.shape == (1, 1) and G[0, 0] == pytest.approx(ref, rel=1e-12)


def test_gramian_symmetric_and_positive(small):
    for region in (OMEGA, ObservationRegion((0.2, 0.6), (0.1, 0.5))):
        G = heat_gramian(small, region, 1.0)
        assert np.abs(G - G.T).max() <= 1e-12
        assert np.linalg.eigvalsh(G)[0] >= -1e-12
        assert gramian_min_eig(small, region, 1.0) > 0


def test_min_eigenvalue_relative_accuracy():
    rng = np.random.default_rng(0)
    Q, _ = np.linalg.qr(rng.standard_normal((6, 6)))
    ev = np.array([1e-14, 1e-9, 1e-3, 0.5, 1.0, 2.0])
    G = (Q * ev) @ Q.T
    assert min_eigenvalue(G) == pytest.approx(1e-14, rel=1e-2)


def test_block_and_dense_agree(small):
    G = heat_gramian(small, OMEGA, 1.0)
    assert gramian_min_eig(small, OMEGA, 1.0) == pytest.approx(np.linalg.eigvalsh(G)[0], rel=1e-6)


# --- low-frequency cost -------------------------------------------------------

def test_full_domain_cost_is_polynomial(low):
    r = lowfreq_cost_experiment(low, FULL, 1.0, LAMBDA_GRID)
    lam_min = low.lambdas
    for lam, cost in zip(r.lambdas, r.extras["cost"]):
        sel = lam_min <= lam
        expect = np.max(2 * lam_min[sel] / -np.expm1(-2 * lam_min[sel]))
        assert cost == pytest.approx(expect, rel=1e-8)
    assert abs(r.fitted_exponent) <= 0.02


def test_lowfreq_exponent_stable_and_matches_tunnelling(low, tun1):
    r = lowfreq_cost_experiment(low, OMEGA, 1.0, LAMBDA_GRID)
    assert r.fitted_exponent > 0
    assert abs(r.extras["exponent_drop_last"] / r.fitted_exponent - 1) <= 0.15
    tun = tunneling_experiment(tun1, OMEGA).extras["exponent_in_lambda"]
    assert abs(r.fitted_exponent / tun - 1) <= 0.25
    assert np.all(np.diff(r.extras["cost"]) >= 0)
    assert r.extras["max_dim"] <= 300


def test_cost_non_increasing_in_T(low):
    costs = [lowfreq_cost_experiment(low, OMEGA, T, LAMBDA_GRID[:5]).extras["cost"] for T in (0.5, 1.0, 2.0)]
    assert np.all(costs[0] >= costs[1]) and np.all(costs[1] >= costs[2])


def test_lambda_grid_precondition(low):
    with pytest.raises(ValueError):
        lowfreq_cost_experiment(low, OMEGA, 1.0, [40, 60, 80])


# --- parabolic tradeoff -------------------------------------------------------

def test_minimal_power_examples():
    # A <= eps^-p B + eps C with A = C: nothing binds
    assert minimal_power(0.0, 0.0, 0.0, 0.0) == 0.0
    # A = G = 1, B = e^-10: the constraint binds just below eps = 1
    p = minimal_power(0.0, -10.0, 0.0, 0.0)
    eps = np.concatenate([np.logspace(-12, -1, 2000), 1 - np.logspace(-1, -8, 20000)])
    with np.errstate(over="ignore"):
        assert np.all(eps ** -p * math.exp(-10) + eps >= 1 - 1e-12)
        assert np.any(eps ** (-0.8 * p) * math.exp(-10) + eps < 1)


def test_contraction_branch(low):
    rng = np.random.default_rng(1)
    c = rng.standard_normal(len(low))
    T = 0.5
    assert np.sum(c**2 * np.exp(-2 * low.lambdas * T)) <= np.sum(c**2)


def test_beta_finite_and_decreasing(low):
    rows, info = parabolic_tradeoff_experiment(low, OMEGA, [0.1, 0.2, 0.4, 0.8, 1.6], 0.02, random_count=100)
    betas = [r[1] for r in rows]
    assert all(math.isfinite(b) for b in betas)
    assert all(a > b for a, b in zip(betas, betas[1:]))
    assert info["T0"] > 0
    assert rows[0][0] > info["T0"] + info["eta"]


def test_eigenmode_beta_halving_breaks_inequality(low):
    rows, info = parabolic_tradeoff_experiment(low, OMEGA, [0.2, 0.4], 0.02, random_count=0)
    for T, _, T0, beta in rows:
        D = admissible_D(low, OMEGA, T, 0.02, beta)
        assert 0 < D <= 1
        assert admissible_D(low, OMEGA, T, 0.02, beta / 2) < D


def test_parabolic_needs_k2():
    b = build_basis(OperatorSpec(gamma=2, grid_n=257, fourier_max=3))
    with pytest.raises(ValueError):
        parabolic_tradeoff_experiment(b, OMEGA, [0.5], 0.02)


# --- Gevrey cost --------------------------------------------------------------

def test_gevrey_power_decreases_in_theta(low):
    thetas = [0.8, 1.0, 1.5, 2.0]
    rows, info = gevrey_cost_experiment(low, OMEGA, 1.0, thetas, random_count=100)
    p = [r[1] for r in rows]
    assert all(a > b for a, b in zip(p, p[1:]))
    theory = [r[3] for r in rows]
    assert all(a > b for a, b in zip(theory, theory[1:]))


def test_gevrey_single_high_mode_margin(low):
    rows, info = gevrey_cost_experiment(low, OMEGA, 1.0, [0.8, 1.0, 1.5, 2.0], random_count=0)
    top = int(np.argmax(np.where(low.branches == 1, low.lambdas, -1)))
    for (theta, _, theta0, p_theory), ps in zip(rows, info["powers"]):
        assert ps[top] < p_theory


def test_gevrey_large_theta_limit(low):
    rows, _ = gevrey_cost_experiment(low, OMEGA, 1.0, [2.0, 2.3], random_count=20)
    assert rows[1][1] < rows[0][1] < 0.5


def test_gevrey_rejects_small_theta(low):
    with pytest.raises(ValueError, match="theta0"):
        gevrey_cost_experiment(low, OMEGA, 1.0, [0.1])


def test_gevrey_overflow_guard(low):
    with pytest.raises(OverflowError, match="lambda_max"):
        gevrey_cost_experiment(low, OMEGA, 1.0, [5.0])


# --- frequency cost -----------------------------------------------------------

def test_frequency_cost_bins(low):
    rows, info = frequency_cost_experiment(low, OMEGA, 1.0, random_count=200)
    costs = [r[1] for r in rows]
    assert np.all(np.diff(costs) >= 0)
    assert info["exponent"] > 0
    assert abs(info["exponent_drop_last"] / info["exponent"] - 1) <= 0.20


def test_lowest_mode_cost_is_minimal(low):
    rows, info = frequency_cost_experiment(low, OMEGA, 1.0, random_count=50)
    j = int(np.argmin(low.lambdas))
    lam_k = info["lambda_k"][j]
    assert lam_k == pytest.approx(1 + low.lambdas[j])
    assert info["cost"][j] == pytest.approx(info["cost"].min())
    assert rows[0][1] == pytest.approx(min(r[1] for r in rows))
