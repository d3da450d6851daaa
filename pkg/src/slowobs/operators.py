"""Hamiltonians and coarse-grained observables.

XXZ chain (spin-1/2 operators s = sigma/2, periodic, nearest plus
next-nearest s_z couplings) restricted to the zero-magnetization sector;
spin density wave observables; coupled tilted-field Ising chains on the
full product space with an energy-difference observable; coarse-graining
of eigenvalue maps into macrostate projectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from slowobs.basis import SectorBasis, SectorError, _rank

HERMITICITY_TOL = 1e-12


@dataclass
class HermitianOperator:
    """Hermitian matrix over a tagged basis.

    `matrix` is a scipy CSR matrix or a dense ndarray; `spin_convention`
    records whether matrix elements were built from s = sigma/2 or full
    Pauli operators.
    """

    matrix: object
    basis_tag: str
    spin_convention: str = "s=sigma/2"

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def dense(self) -> np.ndarray:
        if sp.issparse(self.matrix):
            return self.matrix.toarray()
        return np.asarray(self.matrix)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return self.matrix @ v

    def hermiticity_defect(self) -> float:
        m = self.matrix
        if sp.issparse(m):
            return abs(m - m.conjugate().T).max() if m.nnz else 0.0
        return float(np.abs(m - m.conjugate().T).max())


@dataclass
class CoarseObservable:
    """Diagonal observable with macrostate labels and volumes.

    `lambda_vals[i]` is the (unit second central moment) eigenvalue of
    configuration i; `labels[i]` the integer macrostate it falls in.
    Projectors are index masks, so they resolve the identity exactly.
    """

    lambda_vals: np.ndarray
    delta_X: float
    labels: np.ndarray
    norm_const: float
    basis_tag: str
    xs: np.ndarray = field(init=False)
    volumes: dict = field(init=False)

    def __post_init__(self):
        xs, counts = np.unique(self.labels, return_counts=True)
        self.xs = xs
        self.volumes = {int(x): int(c) for x, c in zip(xs, counts)}

    @property
    def dim(self) -> int:
        return len(self.lambda_vals)

    def members(self, x: int) -> np.ndarray:
        return np.nonzero(self.labels == x)[0]

    def mask(self, x: int) -> np.ndarray:
        return self.labels == x

    def project(self, x: int, psi: np.ndarray) -> np.ndarray:
        out = np.zeros_like(psi)
        m = self.mask(x)
        out[m] = psi[m]
        return out

    def populations(self, psi: np.ndarray) -> dict:
        w = np.abs(psi) ** 2
        return {int(x): float(w[self.mask(x)].sum()) for x in self.xs}


def build_xxz(basis: SectorBasis) -> HermitianOperator:
    """XXZ chain with periodic boundaries in the zero-magnetization sector.

    H = sum_l (s_x s_x + s_y s_y + 3/2 s_z s_z)_{l,l+1} + 1/2 (s_z s_z)_{l,l+2}.
    The flip-flop part gives off-diagonal entries 1/2 between configurations
    differing by one adjacent up-down swap.
    """
    L = basis.L
    if L < 4:
        raise SectorError(f"XXZ with next-nearest couplings needs L >= 4, got {L}")
    D = basis.dim
    spins = basis.spins()  # (D, L) of +-1

    nn = np.roll(spins, -1, axis=1)
    nnn = np.roll(spins, -2, axis=1)
    diag = 1.5 * 0.25 * (spins * nn).sum(axis=1) + 0.5 * 0.25 * (spins * nnn).sum(axis=1)

    rows, cols, vals = [], [], []
    for i in range(D):
        c = int(basis.configs[i])
        for l in range(L):
            lp = (l + 1) % L
            bl = (c >> l) & 1
            blp = (c >> lp) & 1
            if bl != blp:
                j = _rank(c ^ ((1 << l) | (1 << lp)), L)
                rows.append(i)
                cols.append(j)
                vals.append(0.5)
    offdiag = sp.csr_matrix((vals, (rows, cols)), shape=(D, D))
    h = offdiag + sp.diags(diag, format="csr")
    h.sort_indices()
    return HermitianOperator(matrix=h, basis_tag=f"xxz-sector-L{L}")


def build_density_wave(basis: SectorBasis, q: int) -> tuple[np.ndarray, float]:
    """Spin density wave eigenvalue map with unit second central moment.

    Returns (lambda values over the sector configs, normalization N).
    lambda(z) = sum_l cos(2 pi l q / L) z_l / 2 / N, with N fixing
    sum lambda^2 / D - (sum lambda / D)^2 = 1.
    """
    L = basis.L
    if not 1 <= q <= L // 2:
        raise ValueError(f"wavenumber q must lie in [1, L/2], got q={q} at L={L}")
    sites = np.arange(1, L + 1)
    weights = np.cos(2.0 * np.pi * sites * q / L)
    raw = basis.spins() @ (weights / 2.0)
    mean = raw.mean()
    var = (raw**2).mean() - mean**2
    norm = float(np.sqrt(var))
    return raw / norm, norm


def coarse_grain(
    lambda_vals: np.ndarray,
    delta_X: float,
    norm_const: float = 1.0,
    basis_tag: str = "",
) -> CoarseObservable:
    """Assign macrostate labels x from bins of width delta_X centered on x*delta_X.

    Bins are half-open [(x-1/2) dX, (x+1/2) dX); a value exactly on a bin
    edge is assigned toward the lower-|x| bin so that label(-lam) = -label(lam)
    holds exactly and the bins partition the spectrum.
    """
    if delta_X <= 0:
        raise ValueError("coarse-graining width must be positive")
    lam = np.asarray(lambda_vals, dtype=np.float64)
    scaled = np.abs(lam) / delta_X + 0.5
    mag = np.floor(scaled).astype(np.int64)
    on_edge = scaled == mag  # |lam| exactly on a shared bin edge
    mag[on_edge] -= 1
    labels = np.sign(lam).astype(np.int64) * mag
    return CoarseObservable(
        lambda_vals=lam,
        delta_X=float(delta_X),
        labels=labels,
        norm_const=float(norm_const),
        basis_tag=basis_tag,
    )


# Pauli matrices for the full-space Ising builders.
_SX = np.array([[0.0, 1.0], [1.0, 0.0]])
_SY = np.array([[0.0, -1.0j], [1.0j, 0.0]])
_SZ = np.array([[1.0, 0.0], [0.0, -1.0]])


def _site_op(op: np.ndarray, site: int, n: int) -> np.ndarray:
    """Embed a single-site operator at `site` (1-based) in an n-site chain.

    Site 1 is the least significant tensor factor, matching the bit
    convention of the sector basis.
    """
    out = np.ones((1, 1))
    for s in range(1, n + 1):
        out = np.kron(op, out) if s == site else np.kron(np.eye(2), out)
    return out


def build_tilted_ising(n: int, h_x: float = 1.0, h_z: float = 0.5, g_z: float = 1.0) -> np.ndarray:
    """Single tilted-field Ising chain, full Pauli convention, periodic."""
    if n < 3:
        raise ValueError("tilted-field Ising chain needs n >= 3")
    dim = 2**n
    H = np.zeros((dim, dim))
    for l in range(1, n + 1):
        H += h_x * _site_op(_SX, l, n)
        H += h_z * _site_op(_SZ, l, n)
        lp = l % n + 1
        H += g_z * _site_op(_SZ, l, n) @ _site_op(_SZ, lp, n)
    return H


def build_coupled_ising(
    n: int,
    h_x: float = 1.0,
    h_z: float = 0.5,
    g_z: float = 1.0,
    lambda_c: float = 0.5,
) -> HermitianOperator:
    """Two tilted-field Ising chains coupled through their last sites.

    H = H_A + H_B + lambda_c sigma_z^(n,A) sigma_z^(n,B) on the full
    2^(2n) product space; chain A is the low tensor factor.
    """
    HA = build_tilted_ising(n, h_x, h_z, g_z)
    dim = HA.shape[0]
    eye = np.eye(dim)
    sz_n = _site_op(_SZ, n, n)
    H = np.kron(eye, HA) + np.kron(HA, eye) + lambda_c * np.kron(sz_n, sz_n)
    return HermitianOperator(matrix=H, basis_tag=f"coupled-ising-n{n}", spin_convention="sigma")


def build_energy_difference(
    e_A: np.ndarray, e_B: np.ndarray
) -> tuple[np.ndarray, float]:
    """Energy-difference eigenvalue map over the product eigenbasis.

    lambda(alpha, beta) = (e_alpha - e_beta) / N with unit second central
    moment; ordering matches kron(basis_B, basis_A) with A as the low
    factor, i.e. index = beta * dim_A + alpha.
    """
    e_A = np.asarray(e_A, dtype=np.float64)
    e_B = np.asarray(e_B, dtype=np.float64)
    raw = (e_A[None, :] - e_B[:, None]).ravel()
    mean = raw.mean()
    var = (raw**2).mean() - mean**2
    norm = float(np.sqrt(var))
    return raw / norm, norm


def build_ising_xmag(L: int) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """1D Ising chain H = sum sigma_z + sum sigma_x sigma_x (periodic) on the
    full 2^L space, with the total magnetization X = sum sigma_z.

    The textbook example of an extensive slow observable; returned sparse.
    """
    dim = 2**L
    idx = np.arange(dim)
    bits = (idx[:, None] >> np.arange(L)[None, :]) & 1
    z = 2 * bits - 1
    mag = z.sum(axis=1).astype(np.float64)
    X = sp.diags(mag, format="csr")

    rows, cols = [], []
    for l in range(L):
        lp = (l + 1) % L
        flip = np.bitwise_xor(idx, (1 << l) | (1 << lp))
        rows.extend(idx)
        cols.extend(flip)
    H = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(dim, dim)) + X
    return H.tocsr(), X
