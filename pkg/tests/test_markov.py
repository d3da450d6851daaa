import numpy as np
import pytest

import oracle
from slowobs.basis import build_basis
from slowobs.markov import (
    chapman_kolmogorov_residual,
    haar_average_P,
    haar_average_kernel,
    haar_subspace_state,
    levy_bound,
    sample_kernel_column,
    stationarity_residual,
    stationary_distribution,
    trajectory_markov_residual,
)
from slowobs.operators import build_density_wave, build_xxz, coarse_grain
from slowobs.spectral import EmptySubspaceError, diagonalize
from slowobs.states import gaussian_random_state


@pytest.fixture(scope="module")
def sys8():
    basis = build_basis(8)
    H = build_xxz(basis)
    spec = diagonalize(H)
    lam, norm = build_density_wave(basis, 1)
    obs = coarse_grain(lam, 0.74, norm)
    projs = oracle.projectors(obs.labels)
    return basis, H, spec, obs, projs


def test_kernel_matches_oracle_and_is_stochastic(sys8):
    _, H, spec, obs, projs = sys8
    tau = 1.3
    P = haar_average_kernel(obs, spec, tau)
    for j, y in enumerate(obs.xs):
        assert P[:, j].sum() == pytest.approx(1.0, abs=1e-10)
        for i, x in enumerate(obs.xs):
            ref = oracle.haar_kernel_entry(H.dense(), tau, projs[int(x)], projs[int(y)])
            assert P[i, j] == pytest.approx(ref, abs=1e-10)
            assert haar_average_P(obs, spec, tau, int(x), int(y)) == pytest.approx(
                ref, abs=1e-12
            )
    assert np.all(P >= -1e-14)


def test_kernel_annihilates_stationary_distribution(sys8):
    _, _, spec, obs, _ = sys8
    pi = stationary_distribution(obs)
    assert pi.sum() == pytest.approx(1.0, abs=1e-12)
    for tau in (0.4, 2.0, 11.0):
        P = haar_average_kernel(obs, spec, tau)
        assert stationarity_residual(P, pi) < 1e-12


def test_kernel_at_zero_tau_is_identity(sys8):
    _, _, spec, obs, _ = sys8
    P = haar_average_kernel(obs, spec, 0.0)
    assert np.abs(P - np.eye(len(obs.xs))).max() < 1e-10


def test_symmetry_identity_exact(sys8):
    # tr{Pi_x U Pi_y U^dag} = tr{Pi_y U Pi_x U^dag} for the real H
    _, _, spec, obs, _ = sys8
    tau = 1.7
    for x, y in ((0, 1), (2, -1), (-2, 1)):
        lhs = haar_average_P(obs, spec, tau, x, y) * obs.volumes[y]
        rhs = haar_average_P(obs, spec, tau, y, x) * obs.volumes[x]
        assert abs(lhs - rhs) < 1e-12


def test_haar_subspace_state_support_and_norm(sys8):
    _, _, _, obs, _ = sys8
    rng = np.random.default_rng(0)
    amp = haar_subspace_state(obs, 1, rng)
    assert np.linalg.norm(amp) == pytest.approx(1.0, abs=1e-12)
    assert np.abs(amp[~obs.mask(1)]).max() == 0.0
    with pytest.raises(EmptySubspaceError):
        haar_subspace_state(obs, 99, rng)


def test_sample_mean_matches_kernel_column(sys8):
    _, _, spec, obs, _ = sys8
    rep = sample_kernel_column(obs, spec, 1.0, y=0, n_samples=2000, seed=1)
    se = rep.sample_std / np.sqrt(rep.n_samples)
    dev = np.abs(rep.sample_mean - rep.haar_mean)
    # every entry within 4 standard errors of the Haar average
    assert np.all(dev <= 4.0 * np.maximum(se, 1e-12))


def test_sample_requires_two(sys8):
    _, _, spec, obs, _ = sys8
    with pytest.raises(ValueError):
        sample_kernel_column(obs, spec, 1.0, y=0, n_samples=1)


def test_volume_one_subspace_has_zero_spread(sys8):
    _, _, spec, _, _ = sys8
    # synthetic labels with a singleton macrostate: the Haar state there is
    # unique up to phase, so the sampled probabilities cannot fluctuate
    lam = np.zeros(spec.dim)
    lam[0] = 2.0
    obs = coarse_grain(lam, 1.0)
    y = 2
    assert obs.volumes[y] == 1
    rep = sample_kernel_column(obs, spec, 1.0, y=y, n_samples=20, seed=2)
    assert rep.sample_std.max() < 1e-12
    assert np.abs(rep.sample_mean - rep.haar_mean).max() < 1e-12


def test_levy_bound_structure():
    assert levy_bound(0.0, 0.5, 100) == 1.0
    assert levy_bound(-1.0, 0.5, 100) == 1.0
    assert levy_bound(0.01, 0.01, 10) == 1.0  # clamped
    eps, p = 0.5, 0.5
    v1, v2 = levy_bound(eps, p, 50_000), levy_bound(eps, p, 200_000)
    # exponent linear in V_y: quadrupling V_y raises the log-bound fourfold
    assert np.log(v2 / 4.0) == pytest.approx(4.0 * np.log(v1 / 4.0), rel=1e-10)
    # and quadratic in eps at fixed V_y
    w1, w2 = levy_bound(eps, p, 100_000), levy_bound(2 * eps, p, 100_000)
    assert np.log(w2 / 4.0) == pytest.approx(4.0 * np.log(w1 / 4.0), rel=1e-10)
    assert levy_bound(eps, p, 10**7) < 1e-6


def test_exceedance_below_bound(sys8):
    _, _, spec, obs, _ = sys8
    rep = sample_kernel_column(obs, spec, 1.0, y=0, n_samples=500, seed=3)
    for eps in (0.05, 0.1, 0.3):
        for x in (0, 1, -1):
            assert rep.exceedance_fraction(eps, x) <= rep.bound(eps, x) + 1e-12


def test_statistics_invariant_under_subspace_rotation(sys8):
    # Haar sampling inside the subspace makes the spread independent of
    # which orthonormal frame spans it
    _, _, spec, obs, _ = sys8
    rep_a = sample_kernel_column(obs, spec, 1.0, y=0, n_samples=1500, seed=4)
    rep_b = sample_kernel_column(obs, spec, 1.0, y=0, n_samples=1500, seed=5)
    ratio = rep_a.sample_std[1:-1] / rep_b.sample_std[1:-1]
    assert np.all(np.abs(ratio - 1.0) < 0.15)


def test_trajectory_residual_orderings(sys8):
    _, _, spec, obs, _ = sys8
    psi = gaussian_random_state(spec.dim, 0)
    times = np.linspace(0.0, 10.0, 6)
    res = trajectory_markov_residual(psi, times, 1.0, obs, spec)
    assert np.all(res.values >= 0)
    assert np.all(res.values <= 2.0 + 1e-12)  # total-variation style bound


def test_chapman_kolmogorov_vanishes_at_zero_tau(sys8):
    _, _, spec, obs, _ = sys8
    assert chapman_kolmogorov_residual(obs, spec, 0.0) < 1e-10
    # away from tau = 0 the averaged kernel is not an exact semigroup
    assert 0.0 <= chapman_kolmogorov_residual(obs, spec, 1.0) < 1.0
