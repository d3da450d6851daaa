import numpy as np
import pytest

import oracle
from slowobs.basis import CapacityError, build_basis
from slowobs.operators import (
    HermitianOperator,
    build_density_wave,
    build_ising_xmag,
    build_xxz,
    coarse_grain,
)
from slowobs.spectral import (
    band_profile,
    bandedness_commutator_bound,
    commutator_ratio,
    correlation_functions,
    diagonalize,
    operator_norm,
)


@pytest.fixture(scope="module")
def xxz8():
    basis = build_basis(8)
    H = build_xxz(basis)
    return basis, H, diagonalize(H)


def test_diagonalize_reconstructs(xxz8):
    _, H, spec = xxz8
    recon = (spec.vectors * spec.energies[None, :]) @ spec.vectors.conj().T
    assert np.abs(recon - H.dense()).max() < 1e-10
    assert np.all(np.diff(spec.energies) >= -1e-12)


def test_capacity_limit(xxz8):
    _, H, _ = xxz8
    with pytest.raises(CapacityError):
        diagonalize(H, capacity=10)


def test_spacing_and_width(xxz8):
    _, _, spec = xxz8
    e = spec.energies
    assert spec.delta_e == pytest.approx((e[-1] - e[0]) / (len(e) - 1))
    assert spec.delta_E == pytest.approx(float(np.std(e)))


def test_operator_norm_matches_dense(xxz8):
    _, H, _ = xxz8
    exact = np.abs(np.linalg.eigvalsh(H.dense())).max()
    assert operator_norm(H.matrix) == pytest.approx(exact, rel=1e-6)


def test_commutator_ratio_matches_dense(xxz8):
    basis, H, _ = xxz8
    lam, _ = build_density_wave(basis, 1)
    X = np.diag(lam)
    Hd = H.dense()
    comm = Hd @ X - X @ Hd
    exact = (
        np.linalg.norm(comm, 2)
        / (np.linalg.norm(Hd, 2) * np.linalg.norm(X, 2))
    )
    assert commutator_ratio(H, X) == pytest.approx(exact, rel=1e-4)


def test_band_profile_slow_vs_fast():
    basis = build_basis(10)
    spec = diagonalize(build_xxz(basis))
    lam_slow, _ = build_density_wave(basis, 1)
    lam_fast, _ = build_density_wave(basis, 5)
    slow = band_profile(lam_slow, spec)
    fast = band_profile(lam_fast, spec)
    assert 0 < slow.bandwidth < fast.bandwidth
    assert slow.d_states < fast.d_states


def test_bandedness_inequality_L10():
    basis = build_basis(10)
    H = build_xxz(basis)
    spec = diagonalize(H)
    lam, _ = build_density_wave(basis, 1)
    rep = bandedness_commutator_bound(H, lam, spec)
    assert rep.holds
    assert 0.0 <= rep.out_of_band_fraction < 0.5


def test_commutator_ratio_decays_as_inverse_L():
    ratios = {}
    for L in (4, 6, 8, 10):
        H, X = build_ising_xmag(L)
        ratios[L] = commutator_ratio(HermitianOperator(H, f"ising-{L}"), X)
    Ls = np.array(sorted(ratios))
    slope = np.polyfit(np.log(Ls), np.log([ratios[L] for L in Ls]), 1)[0]
    assert slope == pytest.approx(-1.0, abs=0.3)


def test_correlation_functions_initial_value_and_decay():
    basis = build_basis(8)
    H = build_xxz(basis)
    spec = diagonalize(H)
    lam, norm = build_density_wave(basis, 1)
    obs = coarse_grain(lam, 0.74, norm)
    times = np.linspace(0.0, 30.0, 40)
    C, CX = correlation_functions(obs, spec, times)
    assert C.values[0] == pytest.approx(1.0)
    assert CX.values[0] == pytest.approx(1.0)
    assert np.abs(C.values[-10:]).max() < 0.9  # decayed away from the start

    # cross-check one point against the literal double sum
    Xe = spec.vectors.conj().T @ (lam[:, None] * spec.vectors)
    t = times[7]
    om = spec.energies[:, None] - spec.energies[None, :]
    ref = np.real(np.sum(np.abs(Xe) ** 2 * np.exp(1j * om * t)))
    ref /= np.sum(np.abs(Xe) ** 2)
    assert C.values[7] == pytest.approx(ref, abs=1e-10)
