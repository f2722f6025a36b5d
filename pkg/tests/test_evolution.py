import math

import numpy as np
import pytest

from hypolab.evolution import (
    ObservationRegion,
    WaveState,
    heat_evolve,
    restricted_heat_norm,
    restricted_wave_norm,
    wave_energy,
    wave_evolve,
    write_heatmap_csv,
)
from hypolab.spectral import OperatorSpec, SpectralVector, build_basis, restricted_mass


@pytest.fixture(scope="module")
def basis():
    return build_basis(OperatorSpec(gamma=1, grid_n=513, fourier_max=10, branch_max=3))


@pytest.fixture(scope="module")
def deep():
    return build_basis(OperatorSpec(gamma=1, grid_n=2049, fourier_indices=(20, 40, 60)))


def rand(basis, seed):
    return SpectralVector.random(basis, np.random.default_rng(seed))


def test_region_validation():
    with pytest.raises(ValueError, match="x1_range"):
        ObservationRegion((0.5, 0.2))
    with pytest.raises(ValueError, match="x2_range"):
        ObservationRegion(x2_range=(0.0, 1.5))
    with pytest.raises(ValueError, match="t_range"):
        ObservationRegion(t_range=(1.0, 1.0))
    assert ObservationRegion((0.3, 0.9)).distance_to_singular_line == pytest.approx(0.3)


# --- heat --------------------------------------------------------------------

def test_heat_identity_and_mode(basis):
    u = rand(basis, 0)
    np.testing.assert_array_equal(heat_evolve(u, 0.0).coeffs, u.coeffs)
    e = SpectralVector.mode(basis, 4, 2.0)
    assert heat_evolve(e, 0.3).coeffs[4] == pytest.approx(2.0 * math.exp(-0.3 * basis.lambdas[4]))


def test_heat_semigroup(basis):
    u = rand(basis, 1)
    a = heat_evolve(heat_evolve(u, 0.013), 0.021).coeffs
    b = heat_evolve(u, 0.034).coeffs
    assert np.abs(a - b).max() <= 1e-14


def test_heat_contraction(basis):
    u = rand(basis, 2)
    norms = [np.linalg.norm(heat_evolve(u, t).coeffs) for t in np.linspace(0, 0.2, 20)]
    assert np.all(np.diff(norms) <= 0)


def test_full_domain_heat_norm_is_diagonal(basis):
    u = rand(basis, 3)
    T = 0.5
    lam = basis.lambdas
    exact = np.sum(u.coeffs**2 * -np.expm1(-2 * lam * T) / (2 * lam))
    got = restricted_heat_norm(u, ObservationRegion(t_range=(0, T)))
    assert abs(got - exact) <= 1e-10 * exact


def test_full_domain_shortcut_cross_validated(basis):
    u = rand(basis, 4)
    region = ObservationRegion((-1, 1), (0.0, 1.0), (0, 0.5))
    shifted = ObservationRegion((-1, 1), (0.0, 1.0 - 1e-13), (0, 0.5))
    assert restricted_heat_norm(u, region) == pytest.approx(restricted_heat_norm(u, shifted), rel=1e-10)


def test_zero_data(basis):
    z = SpectralVector.zeros(basis)
    r = ObservationRegion((0.3, 0.9))
    assert restricted_heat_norm(z, r) == 0.0
    assert restricted_wave_norm(WaveState(z, z), r) == 0.0


def test_resolution_precondition(basis):
    with pytest.raises(ValueError):
        restricted_heat_norm(rand(basis, 0), ObservationRegion(), quad_nt=8)


def test_single_mode_matches_decay_law(deep):
    a = 0.3
    region = ObservationRegion((a, 0.9), t_range=(0, 1.0))
    for j, n in enumerate(deep.fourier_n):
        e = SpectralVector.mode(deep, j)
        lam = deep.lambdas[j]
        mass = restricted_mass(deep, (a, 0.9), (0, 1))[j]
        val = restricted_heat_norm(e, region)
        assert val == pytest.approx(mass * -np.expm1(-2 * lam) / (2 * lam), rel=1e-12)
        law = math.exp(-a * a * n * math.pi) / (2 * a * math.pi * math.sqrt(n))
        assert 0.5 <= mass / law <= 2.0


def test_heat_norm_monotone_in_region(basis):
    u = rand(basis, 5)
    small = ObservationRegion((0.3, 0.5), (0.2, 0.6), (0, 0.3))
    mid = ObservationRegion((0.2, 0.7), (0.1, 0.6), (0, 0.3))
    big = ObservationRegion((0.1, 0.9), (0.0, 0.9), (0, 0.5))
    vals = [restricted_heat_norm(u, r) for r in (small, mid, big)]
    assert vals[0] <= vals[1] <= vals[2]


def test_partial_region_against_brute_force(basis):
    rng = np.random.default_rng(6)
    c = np.zeros(len(basis))
    c[:6] = rng.standard_normal(6)
    u = SpectralVector(basis, c)
    region = ObservationRegion((0.1, 0.6), (0.2, 0.7), (0.05, 0.2))
    ts = np.linspace(0.05, 0.2, 401)
    x1 = np.linspace(0.1, 0.6, 401)
    x2 = np.linspace(0.2, 0.7, 401)
    sub = basis.subset(np.arange(6))
    phi = sub.profiles_at(x1)[:, None, :] * sub.x2_factors(x2)[None, :, :]
    vals = np.einsum("abj,tj->tab", phi, c[:6] * np.exp(-np.outer(ts, sub.lambdas)))
    from scipy.integrate import simpson
    brute = simpson(simpson(simpson(vals**2, x=x2), x=x1), x=ts)
    assert restricted_heat_norm(u, region) == pytest.approx(brute, rel=1e-5)


# --- wave --------------------------------------------------------------------

def test_wave_identity_and_mode(basis):
    u = rand(basis, 7)
    w = WaveState(u, rand(basis, 8))
    same = wave_evolve(w, 0.0)
    np.testing.assert_array_equal(same.u.coeffs, w.u.coeffs)
    j = 5
    e = WaveState(SpectralVector.mode(basis, j), SpectralVector.zeros(basis))
    t = 0.37
    out = wave_evolve(e, t)
    assert out.u.coeffs[j] == pytest.approx(math.cos(math.sqrt(basis.lambdas[j]) * t))


@pytest.mark.parametrize("s", [0.0, 1.0, 2.0])
def test_wave_energy_conserved(basis, s):
    w = WaveState(rand(basis, 9), rand(basis, 10))
    e0 = wave_energy(w, s)
    for t in (0.1, 1.7, -3.2, 25.0):
        assert abs(wave_energy(wave_evolve(w, t), s) - e0) <= 1e-12 * e0


def test_wave_reversible(basis):
    w = WaveState(rand(basis, 11), rand(basis, 12))
    back = wave_evolve(wave_evolve(w, 2.3), -2.3)
    assert np.abs(back.u.coeffs - w.u.coeffs).max() <= 1e-12
    assert np.abs(back.ut.coeffs - w.ut.coeffs).max() <= 1e-12 * np.abs(w.ut.coeffs).max() * 10


def test_wave_full_domain_single_mode(basis):
    j = 7
    e = WaveState(SpectralVector.mode(basis, j), SpectralVector.zeros(basis))
    T = 1.3
    om = math.sqrt(basis.lambdas[j])
    exact = T + math.sin(2 * om * T) / (2 * om)
    got = restricted_wave_norm(e, ObservationRegion(t_range=(-T, T)))
    assert got == pytest.approx(exact, rel=1e-10)


def test_wave_time_average_brackets_mass(deep):
    region = ObservationRegion((0.3, 0.9), t_range=(-5.0, 5.0))
    mass = restricted_mass(deep, (0.3, 0.9), (0, 1))
    for j in range(len(deep)):
        e = WaveState(SpectralVector.mode(deep, j), SpectralVector.zeros(deep))
        avg = restricted_wave_norm(e, region) / 10.0
        # cos^2 averages to 1/2 over many periods
        ratio = avg / (0.5 * mass[j])
        assert 0.5 <= ratio <= 2.0
        assert abs(ratio - 1) <= 0.05


def test_wave_norm_against_brute_force(basis):
    rng = np.random.default_rng(13)
    c = np.zeros(len(basis))
    v = np.zeros(len(basis))
    c[:5] = rng.standard_normal(5)
    v[:5] = rng.standard_normal(5)
    w = WaveState(SpectralVector(basis, c), SpectralVector(basis, v))
    region = ObservationRegion((0.1, 0.6), (0.0, 1.0), (-0.5, 0.8))
    ts = np.linspace(-0.5, 0.8, 4001)
    from hypolab.spectral import spatial_gram
    mass_gram = spatial_gram(basis.subset(np.arange(5)), (0.1, 0.6), (0, 1))
    traj = np.array([wave_evolve(w, t).u.coeffs[:5] for t in ts])
    from scipy.integrate import simpson
    brute = simpson(np.einsum("ti,ij,tj->t", traj, mass_gram, traj), x=ts)
    assert restricted_wave_norm(w, region) == pytest.approx(brute, rel=1e-8)


def test_heatmap_export(tmp_path, basis):
    dest = tmp_path / "h.csv"
    write_heatmap_csv(SpectralVector.mode(basis, 0), 5, 4, dest)
    lines = dest.read_text().splitlines()
    assert lines[0] == "x1,x2,value" and len(lines) == 21
