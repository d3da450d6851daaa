"""Full diagonalization, banded-matrix statistics and slowness diagnostics.

Everything here works with a dense spectrum; capacity defaults to
dimension 16384 beyond which callers should switch to Krylov propagation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from slowobs.basis import CapacityError
from slowobs.operators import CoarseObservable, HermitianOperator
from slowobs.series import DiagnosticSeries

DEFAULT_CAPACITY = 16384


class EmptySubspaceError(ValueError):
    """A requested macrostate projector has no members."""


@dataclass
class Spectrum:
    """Eigen-decomposition H = V diag(E) V^dagger."""

    energies: np.ndarray
    vectors: np.ndarray
    basis_tag: str = ""

    @property
    def dim(self) -> int:
        return len(self.energies)

    @property
    def delta_E(self) -> float:
        """Standard deviation of the energy spectrum."""
        return float(np.std(self.energies))

    @property
    def delta_e(self) -> float:
        """Mean level spacing."""
        e = self.energies
        return float((e[-1] - e[0]) / (len(e) - 1))

    def to_eigenbasis(self, op) -> np.ndarray:
        """Rotate an operator (dense or sparse) into the eigenbasis."""
        m = op.matrix if isinstance(op, HermitianOperator) else op
        if sp.issparse(m):
            return self.vectors.conj().T @ (m @ self.vectors)
        return self.vectors.conj().T @ m @ self.vectors


def diagonalize(H: HermitianOperator, capacity: int = DEFAULT_CAPACITY) -> Spectrum:
    """Dense eigen-decomposition of a Hermitian operator."""
    if H.dim > capacity:
        raise CapacityError(
            f"dimension {H.dim} exceeds dense-solver capacity {capacity}; "
            "use Krylov propagation instead"
        )
    dense = H.dense()
    energies, vectors = np.linalg.eigh(dense)
    return Spectrum(energies=energies, vectors=vectors, basis_tag=H.basis_tag)


@dataclass
class BandProfile:
    omega_bins: np.ndarray  # bin edges
    mean_sq: np.ndarray  # mean |X_kl|^2 per bin
    bandwidth: float  # delta-E band at the relative threshold
    d_states: int  # band width in state count
    threshold: float

    @property
    def omega_centers(self) -> np.ndarray:
        return 0.5 * (self.omega_bins[:-1] + self.omega_bins[1:])


def band_profile(
    X, spec: Spectrum, nbins: int = 200, threshold: float = 0.01
) -> BandProfile:
    """Binned mean |X_kl|^2 versus transition frequency.

    The bandwidth is the largest |omega| bin whose mean square still
    reaches `threshold` times the peak.  `X` may be a HermitianOperator,
    a dense matrix in the computational basis, or a 1D array of diagonal
    entries (projector indicator / eigenvalue map).
    """
    if nbins < 4:
        raise ValueError("need at least 4 frequency bins")
    Xe = _in_eigenbasis(X, spec)
    E = spec.energies
    omega = E[:, None] - E[None, :]
    mag = np.abs(Xe) ** 2

    full = float(E[-1] - E[0])
    if full == 0.0:
        full = 1.0
    edges = np.linspace(-full, full, nbins + 1)
    which = np.clip(np.digitize(omega.ravel(), edges) - 1, 0, nbins - 1)
    sums = np.bincount(which, weights=mag.ravel(), minlength=nbins)
    counts = np.bincount(which, minlength=nbins)
    mean_sq = np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)

    centers = 0.5 * (edges[:-1] + edges[1:])
    peak = mean_sq.max()
    if peak <= 0.0:
        bandwidth = 0.0
    else:
        above = np.abs(centers[mean_sq >= threshold * peak])
        bandwidth = float(above.max()) if above.size else 0.0
    d_states = int(np.ceil(bandwidth / spec.delta_e)) if spec.dim > 1 else 1
    return BandProfile(
        omega_bins=edges,
        mean_sq=mean_sq,
        bandwidth=bandwidth,
        d_states=d_states,
        threshold=threshold,
    )


def _in_eigenbasis(X, spec: Spectrum) -> np.ndarray:
    if isinstance(X, HermitianOperator):
        return spec.to_eigenbasis(X)
    X = np.asarray(X.matrix) if hasattr(X, "matrix") else X
    if sp.issparse(X):
        return spec.to_eigenbasis(X)
    X = np.asarray(X)
    if X.ndim == 1:  # diagonal in the computational basis
        return spec.vectors.conj().T @ (X[:, None] * spec.vectors)
    return spec.vectors.conj().T @ X @ spec.vectors


def operator_norm(A, tol: float = 1e-8, max_iter: int = 200, seed: int = 7) -> float:
    """Spectral norm of a Hermitian operator by power iteration.

    Randomized restarts guard against an unlucky start vector orthogonal
    to the dominant eigenspace.
    """
    rng = np.random.default_rng(seed)
    n = A.shape[0]
    best = 0.0
    for _ in range(3):
        v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        v /= np.linalg.norm(v)
        prev = 0.0
        for _ in range(max_iter):
            w = A @ v
            norm = np.linalg.norm(w)
            if norm == 0.0:
                break
            v = w / norm
            if abs(norm - prev) < tol * max(1.0, norm):
                break
            prev = norm
        best = max(best, float(norm))
    return best


def commutator_ratio(H: HermitianOperator, X) -> float:
    """||[H, X]|| / (||H|| ||X||), all norms via power iteration.

    i[H, X] is Hermitian, so the same power iteration applies to the
    commutator as to H and X themselves.
    """
    Hm = H.matrix
    Xm = X.matrix if hasattr(X, "matrix") else X
    if Hm.shape != Xm.shape:
        raise ValueError("operator dimensions differ")

    class _Comm:
        shape = Hm.shape

        def __matmul__(self, v):
            return 1j * (Hm @ (Xm @ v) - Xm @ (Hm @ v))

    norm_c = operator_norm(_Comm())
    norm_h = operator_norm(Hm)
    norm_x = operator_norm(Xm)
    if norm_h == 0.0 or norm_x == 0.0:
        return 0.0
    return norm_c / (norm_h * norm_x)


@dataclass
class BandednessReport:
    """Commutator bound from a finite observed bandwidth, with slack."""

    commutator_norm: float
    bandwidth: float
    x_norm: float
    out_of_band_fraction: float  # |X_kl|^2 mass outside the band

    @property
    def bound(self) -> float:
        return self.bandwidth * self.x_norm

    @property
    def holds(self) -> bool:
        return self.commutator_norm <= self.bound + 1e-12


def bandedness_commutator_bound(
    H: HermitianOperator, X, spec: Spectrum, threshold: float = 0.01
) -> BandednessReport:
    """Check ||[H, X]|| <= bandwidth * ||X|| after rescaling H to [0, 1].

    The bandwidth comes from the binned envelope at `threshold`; the
    residual |X_kl|^2 mass outside the band is reported as slack rather
    than folded into the inequality.
    """
    E = spec.energies
    span = float(E[-1] - E[0])
    if span == 0.0:
        span = 1.0
    E01 = (E - E[0]) / span
    spec01 = Spectrum(energies=E01, vectors=spec.vectors, basis_tag=spec.basis_tag)

    Xe = _in_eigenbasis(X, spec01)
    prof = band_profile(X, spec01, threshold=threshold)
    omega = np.abs(E01[:, None] - E01[None, :])
    mag = np.abs(Xe) ** 2
    total = mag.sum()
    outside = float(mag[omega > prof.bandwidth].sum() / total) if total > 0 else 0.0

    comm = 1j * (np.diag(E01) @ Xe - Xe @ np.diag(E01))
    norm_c = float(np.linalg.norm(comm, 2))
    norm_x = float(np.linalg.norm(Xe, 2))
    return BandednessReport(
        commutator_norm=norm_c,
        bandwidth=prof.bandwidth,
        x_norm=norm_x,
        out_of_band_fraction=outside,
    )


def correlation_functions(
    X_obs: CoarseObservable, spec: Spectrum, times: np.ndarray
) -> tuple[DiagnosticSeries, DiagnosticSeries]:
    """Infinite-temperature autocorrelations of X and of the central projector.

    C(t)   = tr{X(t) X} / tr{X^2}
    C_X(t) = tr{Pi_0(t) Pi_0} / tr{Pi_0}
    evaluated as phase sums over |matrix element|^2 in the eigenbasis.
    """
    times = np.asarray(times, dtype=np.float64)
    if 0 not in X_obs.volumes:
        raise EmptySubspaceError("x = 0 macrostate is empty for this observable")

    Xe = _in_eigenbasis(X_obs.lambda_vals, spec)
    Pe = _in_eigenbasis(X_obs.mask(0).astype(np.float64), spec)
    cx = _phase_autocorrelation(Xe, spec.energies, times)
    cp = _phase_autocorrelation(Pe, spec.energies, times)
    meta = {"delta_X": X_obs.delta_X}
    return (
        DiagnosticSeries("C", times, cx / cx[0], metadata=meta),
        DiagnosticSeries("C_X", times, cp / cp[0], metadata=meta),
    )


def _phase_autocorrelation(Ae: np.ndarray, E: np.ndarray, times: np.ndarray) -> np.ndarray:
    """tr{A(t) A} = sum_kl e^{i omega_kl t} |A_kl|^2, real by Hermiticity.

    Evaluated as quadratic forms u(t)^dag mag u(t); all time points are
    batched into one real matrix product so mag streams through memory
    once instead of once per point.
    """
    mag = np.abs(Ae) ** 2
    phases = np.exp(1j * np.outer(E, times))  # (D, T)
    U = np.concatenate([phases.real, phases.imag], axis=1)
    W = mag @ U
    T = len(times)
    wr, wi = W[:, :T], W[:, T:]
    # Re{u^dag (mag u)} with u = cos + i sin
    out = np.einsum("dt,dt->t", phases.real, wr) + np.einsum(
        "dt,dt->t", phases.imag, wi
    )
    return out
