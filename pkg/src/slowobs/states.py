"""Initial-state preparation recipes.

Every constructor is deterministic per (parameters, seed) and returns a
normalized PureState carrying its recipe for provenance.
"""

from __future__ import annotations

import numpy as np

from slowobs.basis import SectorBasis
from slowobs.operators import CoarseObservable
from slowobs.propagation import PureState, normalize
from slowobs.spectral import EmptySubspaceError, Spectrum


def gaussian_random_state(dim_or_basis, seed: int) -> PureState:
    """Random state with i.i.d. zero-mean Gaussian real and imaginary parts.

    Mimics an infinite-temperature state spread over the full space.
    """
    dim = dim_or_basis.dim if isinstance(dim_or_basis, SectorBasis) else int(dim_or_basis)
    rng = np.random.default_rng(seed)
    amp = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return normalize(amp, recipe={"kind": "gaussian-random", "seed": seed})


def tilted_state(psi_r: PureState, obs: CoarseObservable, kappa: float) -> PureState:
    """Reweight a reference state by e^{-kappa lambda(z) / 2} and renormalize."""
    amp = psi_r.amplitudes * np.exp(-0.5 * kappa * obs.lambda_vals)
    recipe = dict(psi_r.recipe)
    recipe.update({"kind": "tilted", "kappa": kappa})
    return normalize(amp, recipe=recipe)


def two_subspace_state(
    obs: CoarseObservable, p0: float, p1: float, seeds: tuple[int, int]
) -> PureState:
    """State spread over the x=0 and x=1 macrostates only.

    sqrt(p0) Pi_0 |psi_R^0> + sqrt(p1) Pi_1 |psi_R^1> with independent
    Gaussian references, each piece normalized within its subspace so the
    target weights are met exactly.
    """
    if abs(p0 + p1 - 1.0) > 1e-12:
        raise ValueError("subspace weights must sum to 1")
    for x in (0, 1):
        if obs.volumes.get(x, 0) == 0:
            raise EmptySubspaceError(f"macrostate x={x} is empty")
    amp = np.zeros(obs.dim, dtype=np.complex128)
    for x, p, seed in ((0, p0, seeds[0]), (1, p1, seeds[1])):
        rng = np.random.default_rng(seed)
        piece = rng.standard_normal(obs.dim) + 1j * rng.standard_normal(obs.dim)
        piece[~obs.mask(x)] = 0.0
        amp += np.sqrt(p) * piece / np.linalg.norm(piece)
    return normalize(
        amp, recipe={"kind": "two-subspace", "p0": p0, "p1": p1, "seeds": list(seeds)}
    )


def two_subspace_from_delta(obs, delta_p: float = 0.2, seeds=(0, 1)) -> PureState:
    """Convenience wrapper with p0 = (1 + dp)/2, p1 = (1 - dp)/2."""
    return two_subspace_state(obs, (1 + delta_p) / 2, (1 - delta_p) / 2, seeds)


def microcanonical_window_center(spec: Spectrum, beta: float) -> float:
    """Canonical mean energy tr(e^{-beta H} H) / tr(e^{-beta H})."""
    e = spec.energies
    w = np.exp(-beta * (e - e.min()))  # shift avoids overflow
    return float((w * e).sum() / w.sum())


def microcanonical_window_state(
    spec: Spectrum,
    beta: float,
    delta_E: float,
    obs: CoarseObservable,
    kappa: float,
    seed: int,
) -> PureState:
    """Tilted Gaussian state restricted to a microcanonical energy window.

    The window is centered on the canonical mean energy for `beta`; the
    projection onto the window is applied after the observable tilt.
    """
    center = microcanonical_window_center(spec, beta)
    in_window = np.abs(spec.energies - center) <= delta_E / 2.0
    if not in_window.any():
        raise EmptySubspaceError("microcanonical energy window is empty")
    psi = tilted_state(gaussian_random_state(spec.dim, seed), obs, kappa)
    c = spec.vectors.conj().T @ psi.amplitudes
    c[~in_window] = 0.0
    amp = spec.vectors @ c
    return normalize(
        amp,
        recipe={
            "kind": "microcanonical-window",
            "beta": beta,
            "delta_E": delta_E,
            "kappa": kappa,
            "seed": seed,
        },
    )


def canonical_product_state(
    spec_A: Spectrum,
    spec_B: Spectrum,
    beta_A: float,
    beta_B: float,
    seeds: tuple[int, int],
) -> PureState:
    """Product of canonically tilted Gaussian states of two subsystems.

    e^{-beta H / 2} acts in each subsystem eigenbasis; subsystem A is the
    low tensor factor (index = beta_index * dim_A + alpha_index).
    """
    pieces = []
    for spec, beta, seed in ((spec_A, beta_A, seeds[0]), (spec_B, beta_B, seeds[1])):
        rng = np.random.default_rng(seed)
        amp = rng.standard_normal(spec.dim) + 1j * rng.standard_normal(spec.dim)
        c = spec.vectors.conj().T @ amp
        e = spec.energies
        c *= np.exp(-0.5 * beta * (e - e.min()))
        pieces.append(spec.vectors @ c)
    amp = np.kron(pieces[1], pieces[0])
    return normalize(
        amp,
        recipe={
            "kind": "canonical-product",
            "beta_A": beta_A,
            "beta_B": beta_B,
            "seeds": list(seeds),
        },
    )
