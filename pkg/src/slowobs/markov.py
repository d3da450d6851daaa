"""Subspace-averaged transition kernels and measure concentration.

The Haar average of the one-step conditional probabilities over states
drawn from a macrostate subspace is a classical stochastic kernel; the
sampled fluctuations around it concentrate at the inverse-sqrt rate in
the subspace dimension, with a Levy-type tail bound.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from slowobs.operators import CoarseObservable
from slowobs.spectral import EmptySubspaceError, Spectrum

DEFAULT_SAMPLES = 200


def haar_average_kernel(obs: CoarseObservable, spec: Spectrum, tau: float) -> np.ndarray:
    """P[i_x, i_y] = tr{Pi_x U_tau Pi_y U_tau^dag} / V_y; columns sum to 1."""
    phases = np.exp(-1j * spec.energies * tau)
    M = len(obs.xs)
    P = np.zeros((M, M))
    rows = [spec.vectors[obs.mask(int(x)), :] for x in obs.xs]
    for j, y in enumerate(obs.xs):
        Vy = obs.volumes[int(y)]
        Ry = (rows[j] * phases[None, :]).conj()
        for i in range(M):
            P[i, j] = np.sum(np.abs(rows[i] @ Ry.T) ** 2) / Vy
    return P


def stationary_distribution(obs: CoarseObservable) -> np.ndarray:
    """pi_x = V_x / D, the maximum-entropy macrostate distribution."""
    vols = np.array([obs.volumes[int(x)] for x in obs.xs], dtype=np.float64)
    return vols / obs.dim


def stationarity_residual(P: np.ndarray, pi: np.ndarray) -> float:
    """max_x |sum_y P_{x|y} pi_y - pi_x|; zero for the Haar-averaged kernel."""
    return float(np.max(np.abs(P @ pi - pi)))


def haar_subspace_state(obs: CoarseObservable, y: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unit vector supported on the macrostate-y subspace."""
    if obs.volumes.get(y, 0) == 0:
        raise EmptySubspaceError(f"macrostate y={y} is empty")
    amp = np.zeros(obs.dim, dtype=np.complex128)
    m = obs.mask(y)
    amp[m] = rng.standard_normal(int(m.sum())) + 1j * rng.standard_normal(int(m.sum()))
    return amp / np.linalg.norm(amp)


def levy_bound(eps: float, mean_p: float, V_y: int) -> float:
    """Tail bound on Pr[|p - <p>| > eps <p>] for Haar states on a V_y-dim sphere.

    The Lipschitz constant of the quadratic observable on the unit sphere
    is 2, giving 4 exp(-eps^2 <p>^2 V_y / (18 pi^3)); clamped to [0, 1].
    """
    if eps <= 0:
        return 1.0
    val = 4.0 * np.exp(-(eps**2) * mean_p**2 * V_y / (18.0 * np.pi**3))
    return float(min(1.0, val))


@dataclass
class ConcentrationReport:
    """Sampled conditional probabilities against the Haar-average prediction."""

    y: int
    V_y: int
    tau: float
    xs: np.ndarray
    haar_mean: np.ndarray  # kernel column P_{x|y}
    sample_mean: np.ndarray
    sample_std: np.ndarray
    samples: np.ndarray  # (n_samples, M)

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    def exceedance_fraction(self, eps: float, x: int) -> float:
        """Observed fraction of samples with relative deviation above eps."""
        i = int(np.searchsorted(self.xs, x))
        mean = self.haar_mean[i]
        if mean == 0.0:
            return 0.0
        dev = np.abs(self.samples[:, i] - mean) / mean
        return float(np.mean(dev > eps))

    def bound(self, eps: float, x: int) -> float:
        i = int(np.searchsorted(self.xs, x))
        return levy_bound(eps, float(self.haar_mean[i]), self.V_y)


def sample_kernel_column(
    obs: CoarseObservable,
    spec: Spectrum,
    tau: float,
    y: int,
    n_samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
) -> ConcentrationReport:
    """Monte Carlo over Haar states in subspace y of the one-step outcome
    probabilities, compared against the subspace-averaged kernel column."""
    if n_samples < 2:
        raise ValueError("need at least 2 samples")
    rng = np.random.default_rng(seed)
    phases = np.exp(-1j * spec.energies * tau)
    M = len(obs.xs)
    masks = [obs.mask(int(x)) for x in obs.xs]
    samples = np.empty((n_samples, M))
    for s in range(n_samples):
        amp = haar_subspace_state(obs, y, rng)
        c = spec.vectors.conj().T @ amp
        out = spec.vectors @ (phases * c)
        w = np.abs(out) ** 2
        samples[s] = [w[m].sum() for m in masks]

    j = int(np.searchsorted(obs.xs, y))
    haar_col = haar_average_kernel(obs, spec, tau)[:, j]
    return ConcentrationReport(
        y=y,
        V_y=obs.volumes[y],
        tau=tau,
        xs=obs.xs.copy(),
        haar_mean=haar_col,
        sample_mean=samples.mean(axis=0),
        sample_std=samples.std(axis=0, ddof=1),
        samples=samples,
    )


def haar_average_P(obs: CoarseObservable, spec: Spectrum, tau: float, x: int, y: int) -> float:
    """Single kernel entry tr{Pi_x U_tau Pi_y U_tau^dag} / V_y."""
    if obs.volumes.get(y, 0) == 0:
        raise EmptySubspaceError(f"macrostate y={y} is empty")
    phases = np.exp(-1j * spec.energies * tau)
    Rx = spec.vectors[obs.mask(x), :]
    Ry = spec.vectors[obs.mask(y), :]
    M = (Rx * phases[None, :]) @ Ry.conj().T
    return float(np.sum(np.abs(M) ** 2) / obs.volumes[y])


# Report covers the whole kernel column at once; the per-x view is free.
sample_P = sample_kernel_column


def trajectory_markov_residual(
    psi0,
    times: np.ndarray,
    tau: float,
    obs: CoarseObservable,
    spec: Spectrum,
):
    """residual(t) = sum_x |p_x(t + tau) - sum_y P_{x|y}(tau) p_y(t)|.

    Measures how closely the actual trajectory follows the Haar-averaged
    one-step kernel; the gap is the state's own coherence contribution.
    """
    from slowobs.series import DiagnosticSeries

    P = haar_average_kernel(obs, spec, tau)
    masks = [obs.mask(int(x)) for x in obs.xs]

    def pops(t: float) -> np.ndarray:
        c = spec.vectors.conj().T @ psi0.amplitudes
        c = c * np.exp(-1j * spec.energies * t)
        w = np.abs(spec.vectors @ c) ** 2
        return np.array([w[m].sum() for m in masks])

    values = np.empty(len(times))
    for i, t in enumerate(times):
        values[i] = np.abs(pops(t + tau) - P @ pops(t)).sum()
    return DiagnosticSeries("markov_residual", np.asarray(times, dtype=np.float64), values, metadata={"tau": tau})


def chapman_kolmogorov_residual(
    obs: CoarseObservable, spec: Spectrum, tau: float
) -> float:
    """max-entry |P(2 tau) - P(tau)^2|: semigroup defect of the averaged kernel."""
    P1 = haar_average_kernel(obs, spec, tau)
    P2 = haar_average_kernel(obs, spec, 2.0 * tau)
    return float(np.max(np.abs(P2 - P1 @ P1)))
