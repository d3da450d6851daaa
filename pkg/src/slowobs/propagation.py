"""Time evolution of pure states under e^{-iHt}.

Exact eigenbasis phases are the default whenever a spectrum is available;
a Lanczos short-iterate propagator with residual-controlled substepping
covers dimensions beyond dense-diagonalization capacity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from slowobs.operators import HermitianOperator
from slowobs.spectral import Spectrum

NORM_TOL = 1e-10


class PropagationError(RuntimeError):
    pass


@dataclass
class PureState:
    """Normalized complex amplitude vector with a preparation tag."""

    amplitudes: np.ndarray
    recipe: dict = field(default_factory=dict)

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if not np.all(np.isfinite(self.amplitudes.view(np.float64))):
            raise PropagationError("non-finite amplitudes")
        n = self.norm
        if abs(n - 1.0) > NORM_TOL:
            raise PropagationError(f"state norm {n} deviates from 1")

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    @property
    def dim(self) -> int:
        return len(self.amplitudes)

    def overlap(self, other: "PureState") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))


def normalize(amplitudes: np.ndarray, recipe: dict | None = None) -> PureState:
    amplitudes = np.asarray(amplitudes, dtype=np.complex128)
    n = np.linalg.norm(amplitudes)
    if n == 0.0 or not np.isfinite(n):
        raise PropagationError("cannot normalize zero or non-finite vector")
    return PureState(amplitudes / n, recipe=recipe or {})


@dataclass
class PropagatorConfig:
    mode: str = "exact-eigenbasis"  # or "krylov"
    krylov_dim: int = 30
    step_tol: float = 1e-10
    max_substep: float = 1.0

    def __post_init__(self):
        if self.krylov_dim < 4:
            raise ValueError("krylov_dim must be >= 4")
        if self.step_tol <= 0:
            raise ValueError("step_tol must be positive")


def evolve(psi: PureState, generator, t: float, config: PropagatorConfig | None = None) -> PureState:
    """Propagate psi by e^{-iHt}.

    `generator` is either a Spectrum (exact phases) or a HermitianOperator /
    matrix (Krylov stepping).
    """
    if not np.isfinite(t):
        raise ValueError("evolution time must be finite")
    if isinstance(generator, Spectrum):
        if generator.dim != psi.dim:
            raise ValueError("state and spectrum dimensions differ")
        return _evolve_exact(psi, generator, t)
    config = config or PropagatorConfig(mode="krylov")
    m = generator.matrix if isinstance(generator, HermitianOperator) else generator
    if m.shape[0] != psi.dim:
        raise ValueError("state and operator dimensions differ")
    return _evolve_krylov(psi, m, t, config)


def evolve_batch(states, generator, t: float, config: PropagatorConfig | None = None):
    """Elementwise evolve; results independent of batch order."""
    return [evolve(psi, generator, t, config) for psi in states]


def _evolve_exact(psi: PureState, spec: Spectrum, t: float) -> PureState:
    c = spec.vectors.conj().T @ psi.amplitudes
    c *= np.exp(-1j * spec.energies * t)
    out = spec.vectors @ c
    return PureState(out / np.linalg.norm(out), recipe=psi.recipe)


def _evolve_krylov(psi: PureState, H, t: float, config: PropagatorConfig) -> PureState:
    v = psi.amplitudes.copy()
    remaining = float(t)
    sign = 1.0 if remaining >= 0 else -1.0
    remaining = abs(remaining)
    while remaining > 0.0:
        dt = min(remaining, config.max_substep)
        while True:
            v_new, err = _lanczos_step(H, v, sign * dt, config.krylov_dim)
            if err <= config.step_tol or dt <= 1e-12:
                break
            dt /= 2.0  # retry the substep from the same start vector
        v = v_new
        remaining -= dt
        nrm = np.linalg.norm(v)
        if not np.isfinite(nrm) or nrm == 0.0:
            raise PropagationError("Krylov propagation produced non-finite state")
        v /= nrm
    return PureState(v, recipe=psi.recipe)


def _lanczos_step(H, v: np.ndarray, dt: float, m: int) -> tuple[np.ndarray, float]:
    """One Lanczos approximation of e^{-iH dt} v with a residual estimate.

    Happy breakdown (invariant subspace) yields the exact subspace
    propagator and zero residual.
    """
    n = len(v)
    m = min(m, n)
    V = np.zeros((n, m), dtype=np.complex128)
    alpha = np.zeros(m)
    beta = np.zeros(m)
    V[:, 0] = v
    w = H @ V[:, 0]
    alpha[0] = np.real(np.vdot(V[:, 0], w))
    w = w - alpha[0] * V[:, 0]
    k_used = m
    breakdown = False
    for j in range(1, m):
        beta[j] = np.linalg.norm(w)
        if beta[j] < 1e-14:
            k_used = j
            breakdown = True
            break
        V[:, j] = w / beta[j]
        # full reorthogonalization keeps the basis usable at large dt
        V[:, j] -= V[:, :j] @ (V[:, :j].conj().T @ V[:, j])
        V[:, j] /= np.linalg.norm(V[:, j])
        w = H @ V[:, j]
        alpha[j] = np.real(np.vdot(V[:, j], w))
        w = w - alpha[j] * V[:, j] - beta[j] * V[:, j - 1]

    k = k_used
    T = np.diag(alpha[:k]) + np.diag(beta[1:k], 1) + np.diag(beta[1:k], -1)
    evals, evecs = np.linalg.eigh(T)
    phases = np.exp(-1j * evals * dt)
    small = evecs @ (phases * evecs[0].conj())
    out = V[:, :k] @ small
    if breakdown:
        return out, 0.0
    # residual proxy: weight in the last Krylov direction times the next coupling
    err = float(np.linalg.norm(w) * abs(small[-1]) * abs(dt))
    return out, err
