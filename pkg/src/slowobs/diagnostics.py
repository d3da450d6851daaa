"""Scalar diagnostics of coarse-grained pure-state dynamics.

Two-time probability tables, the measurement-disturbance term Q and its
four-point microcanonical counterpart, transition-rate tables with the
detailed-balance residual, thermodynamic entropy, probability currents,
thermalization times and effective volumes.

All functions take a state snapshot plus the spectrum in the basis where
the macrostate projectors are diagonal index masks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from slowobs.operators import CoarseObservable
from slowobs.propagation import PureState
from slowobs.series import DiagnosticSeries
from slowobs.spectral import EmptySubspaceError, Spectrum
from slowobs.time_reversal import TimeReversal

PROB_FLOOR = 1e-8  # conditioning on a macrostate below this weight is undefined


def _real_mm(V: np.ndarray, B: np.ndarray) -> np.ndarray:
    """V @ B for real V and complex B without upcasting V.

    Real and imaginary parts are stacked into one real matrix product, so
    V streams through memory once.
    """
    if np.iscomplexobj(V) or not np.iscomplexobj(B):
        return V @ B
    n = B.shape[1] if B.ndim == 2 else 1
    RB = np.concatenate([B.real.reshape(len(B), n), B.imag.reshape(len(B), n)], axis=1)
    W = V @ RB
    out = W[:, :n] + 1j * W[:, n:]
    return out[:, 0] if B.ndim == 1 else out


def _u_apply_many(spec: Spectrum, t: float, B: np.ndarray) -> np.ndarray:
    """e^{-iHt} applied to every column of B through eigenbasis phases."""
    C = _real_mm(spec.vectors.T.conj(), B)
    phases = np.exp(-1j * spec.energies * t)
    C = C * (phases[:, None] if C.ndim == 2 else phases)
    return _real_mm(spec.vectors, C)


def _u_apply(spec: Spectrum, t: float, v: np.ndarray) -> np.ndarray:
    """e^{-iHt} v through eigenbasis phases."""
    return _u_apply_many(spec, t, v)


def _u_matrix(spec: Spectrum, t: float) -> np.ndarray:
    phases = np.exp(-1j * spec.energies * t)
    return (spec.vectors * phases[None, :]) @ spec.vectors.conj().T


def _weights(obs: CoarseObservable, v: np.ndarray) -> np.ndarray:
    """Unnormalized macrostate weights of a (not necessarily unit) vector."""
    w = np.abs(v) ** 2
    return np.array([w[obs.mask(int(x))].sum() for x in obs.xs])


def _mask_matrix(obs: CoarseObservable) -> np.ndarray:
    """(M, D) indicator rows; pops of column vectors via one product."""
    return np.stack([obs.mask(int(x)).astype(np.float64) for x in obs.xs])


def _branch_matrix(obs: CoarseObservable, v: np.ndarray, with_full: bool = False) -> np.ndarray:
    """Columns Pi_x v for every macrostate, optionally plus v itself."""
    M = len(obs.xs)
    B = np.zeros((obs.dim, M + (1 if with_full else 0)), dtype=np.complex128)
    for j, x in enumerate(obs.xs):
        m = obs.mask(int(x))
        B[m, j] = v[m]
    if with_full:
        B[:, M] = v
    return B


@dataclass
class ProbTable:
    """Single- and two-time outcome probabilities on a macrostate grid."""

    xs: np.ndarray
    joint: np.ndarray  # joint[i2, i1] = p(x2, x1)
    unmeasured: np.ndarray  # p(x2, skipped x1)
    t1: float
    t2: float

    def index(self, x: int) -> int:
        i = int(np.searchsorted(self.xs, x))
        if i >= len(self.xs) or self.xs[i] != x:
            raise KeyError(f"macrostate {x} not in table")
        return i


def two_time_probs(
    psi0: PureState, t1: float, t2: float, obs: CoarseObservable, spec: Spectrum
) -> ProbTable:
    """Measured and unmeasured two-time outcome probabilities.

    p(x2, x1) = ||Pi_{x2} U(t2-t1) Pi_{x1} U(t1) psi||^2 and
    p(x2, no measurement at t1) = ||Pi_{x2} U(t2) psi||^2.
    """
    if not (0 <= t1 <= t2):
        raise ValueError("need 0 <= t1 <= t2")
    psi1 = _u_apply(spec, t1, psi0.amplitudes)
    M = len(obs.xs)
    B = _branch_matrix(obs, psi1, with_full=True)
    W = np.abs(_u_apply_many(spec, t2 - t1, B)) ** 2
    pops = _mask_matrix(obs) @ W
    return ProbTable(
        xs=obs.xs.copy(), joint=pops[:, :M], unmeasured=pops[:, M], t1=t1, t2=t2
    )


def quantum_term_Q(
    psi0: PureState, t1: float, t2: float, x2: int, obs: CoarseObservable, spec: Spectrum
) -> float:
    """Kolmogorov-consistency defect Q = p(x2, skip) - sum_x1 p(x2, x1)."""
    table = two_time_probs(psi0, t1, t2, obs, spec)
    i2 = table.index(x2)
    return float(table.unmeasured[i2] - table.joint[i2].sum())


def q_four_point(
    x2: int,
    x0: int,
    t1: float,
    t2: float,
    obs: CoarseObservable,
    spec: Spectrum,
) -> float:
    """Microcanonical coherence term with initial state Pi_{x0} / V_{x0}.

    Evaluated exactly as the unmeasured-minus-dephased difference of the
    mixed-state evolution; vanishes at t1 = 0 or t2 = 0 (Zeno) and sums
    to zero over x2.
    """
    V0 = obs.volumes.get(x0, 0)
    if V0 == 0:
        raise EmptySubspaceError(f"macrostate x0={x0} is empty")
    rho0 = np.zeros((obs.dim, obs.dim), dtype=np.complex128)
    idx = obs.members(x0)
    rho0[idx, idx] = 1.0 / V0

    U1 = _u_matrix(spec, t1)
    rho1 = U1 @ rho0 @ U1.conj().T
    dephased = np.zeros_like(rho1)
    for x1 in obs.xs:
        m = obs.members(int(x1))
        dephased[np.ix_(m, m)] = rho1[np.ix_(m, m)]

    U2 = _u_matrix(spec, t2 - t1) if t2 != t1 else None
    diff = rho1 - dephased
    if U2 is not None:
        diff = U2 @ diff @ U2.conj().T
    m2 = obs.mask(x2)
    return float(np.real(np.trace(diff[np.ix_(m2, m2)])))


def q_tau(psi: PureState, tau: float, obs: CoarseObservable, spec: Spectrum) -> float:
    """Coherence contribution sum_x |full_x - block-diagonal_x| over one tau step.

    Algebraically identical to the double sum over distinct macrostate
    pairs, at the cost of M + 1 propagations instead of M^2 terms.
    """
    M = len(obs.xs)
    B = _branch_matrix(obs, psi.amplitudes, with_full=True)
    W = np.abs(_u_apply_many(spec, tau, B)) ** 2
    pops = _mask_matrix(obs) @ W
    full = pops[:, M]
    block = pops[:, :M].sum(axis=1)
    return float(np.abs(full - block).sum())


def q_tau_series(
    psi0: PureState, times: np.ndarray, tau: float, obs: CoarseObservable, spec: Spectrum
) -> DiagnosticSeries:
    """Q_tau(t) along a trajectory started from psi0."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    values = np.empty(len(times))
    for i, t in enumerate(times):
        psi_t = PureState(_u_apply(spec, t, psi0.amplitudes), recipe=psi0.recipe)
        values[i] = q_tau(psi_t, tau, obs, spec)
    return DiagnosticSeries("Q_tau", times, values, metadata={"tau": tau})


def time_average(series: DiagnosticSeries, t_lo: float, t_hi: float) -> float:
    """Trapezoidal mean over [t_lo, t_hi], interpolating the window edges."""
    if t_hi <= t_lo:
        raise ValueError("empty averaging window")
    t, v = series.times, series.values
    if t_lo < t[0] or t_hi > t[-1]:
        raise ValueError("window extends beyond the series")
    grid = np.concatenate(([t_lo], t[(t > t_lo) & (t < t_hi)], [t_hi]))
    vals = np.interp(grid, t, v)
    return float(np.trapezoid(vals, grid) / (t_hi - t_lo))


def thermalization_time(trajectories, threshold: float = 0.01) -> float:
    """Mean first time the rescaled expectation decays below threshold for good.

    Each trajectory is a DiagnosticSeries of the rescaled expectation;
    the crossing must hold for the rest of the simulated horizon.
    """
    crossings = []
    for series in trajectories:
        below = np.abs(series.values) < threshold
        held = np.logical_and.accumulate(below[::-1])[::-1]
        idx = np.nonzero(held)[0]
        if idx.size == 0:
            raise RuntimeError("threshold never held within the simulated horizon")
        crossings.append(series.times[idx[0]])
    return float(np.mean(crossings))


@dataclass
class RateTable:
    """Conditional transition probabilities over one tau step."""

    xs: np.ndarray
    rates: np.ndarray  # rates[i_to, i_from], columns sum to 1
    defined: np.ndarray  # bool per source column (weight above the floor)
    tau: float
    volumes: dict = field(default_factory=dict)

    def get(self, x_to: int, x_from: int) -> float:
        i = int(np.searchsorted(self.xs, x_to))
        j = int(np.searchsorted(self.xs, x_from))
        if not self.defined[j]:
            raise ValueError(f"rate from empty/underweight macrostate {x_from}")
        return float(self.rates[i, j])


def rate_table(
    psi: PureState,
    tau: float,
    obs: CoarseObservable,
    spec: Spectrum,
    floor: float = PROB_FLOOR,
    volumes: dict | None = None,
) -> RateTable:
    """R_{x,y} = tr{Pi_x U_tau rho_y U_tau^dag} with rho_y conditioned on y."""
    M = len(obs.xs)
    rates = np.zeros((M, M))
    defined = np.zeros(M, dtype=bool)
    B = _branch_matrix(obs, psi.amplitudes)
    p = np.linalg.norm(B, axis=0) ** 2
    W = np.abs(_u_apply_many(spec, tau, B)) ** 2
    pops = _mask_matrix(obs) @ W
    for j in range(M):
        if p[j] < floor:
            continue
        defined[j] = True
        rates[:, j] = pops[:, j] / p[j]
    return RateTable(
        xs=obs.xs.copy(),
        rates=rates,
        defined=defined,
        tau=tau,
        volumes=volumes if volumes is not None else dict(obs.volumes),
    )


def ldb_residual(
    table: RateTable,
    theta: TimeReversal,
    x_from: int = 0,
    x_to: int = 1,
) -> float:
    """Detailed-balance residual |V_to R_{to,from} / (V_from R^TR_{from,to}) - 1|.

    The reversed rate is looked up through the time-reversal label map;
    volumes may be the exact V_x or effective ones.
    """
    r_fwd = table.get(x_to, x_from)
    r_rev = table.get(theta.label_map(x_from), theta.label_map(x_to))
    v_to = table.volumes[x_to]
    v_from = table.volumes[x_from]
    if r_rev * v_from == 0.0:
        raise ZeroDivisionError("reversed rate vanished; residual undefined")
    return float(abs(v_to * r_fwd / (v_from * r_rev) - 1.0))


def ldb_series(
    psi0: PureState,
    times: np.ndarray,
    tau: float,
    obs: CoarseObservable,
    spec: Spectrum,
    theta: TimeReversal,
    x_from: int = 0,
    x_to: int = 1,
    volumes: dict | None = None,
) -> DiagnosticSeries:
    """Delta_{from->to}(t, tau) along a trajectory; NaN where undefined."""
    for x in (x_from, x_to, theta.label_map(x_from), theta.label_map(x_to)):
        if obs.volumes.get(x, 0) == 0:
            raise EmptySubspaceError(f"macrostate x={x} is empty")
    values = np.empty(len(times))
    for i, t in enumerate(times):
        psi_t = PureState(_u_apply(spec, t, psi0.amplitudes), recipe=psi0.recipe)
        table = rate_table(psi_t, tau, obs, spec, volumes=volumes)
        try:
            values[i] = ldb_residual(table, theta, x_from, x_to)
        except (ValueError, ZeroDivisionError):
            values[i] = np.nan
    return DiagnosticSeries(
        "Delta", times, values, metadata={"tau": tau, "x_from": x_from, "x_to": x_to}
    )


def effective_volumes(
    psi0: PureState,
    times: np.ndarray,
    obs: CoarseObservable,
    spec: Spectrum,
    t_lo: float,
    t_hi: float,
) -> dict:
    """Time-averaged occupations scaled by D: the volumes seen by the state."""
    pops = np.empty((len(times), len(obs.xs)))
    for i, t in enumerate(times):
        pops[i] = _weights(obs, _u_apply(spec, t, psi0.amplitudes))
    out = {}
    for j, x in enumerate(obs.xs):
        series = DiagnosticSeries("pop", times, pops[:, j])
        out[int(x)] = obs.dim * time_average(series, t_lo, t_hi)
    return out


def entropy_of(p: np.ndarray, volumes: np.ndarray) -> float:
    """S = sum_x p_x (-ln p_x + ln V_x) with 0 ln 0 = 0."""
    p = np.asarray(p, dtype=np.float64)
    if np.any((volumes <= 0) & (p > 1e-15)):
        raise ValueError("nonzero probability on a zero-volume macrostate")
    nz = p > 0
    return float(np.sum(p[nz] * (-np.log(p[nz]) + np.log(volumes[nz]))))


def entropy_series(
    psi0: PureState, times: np.ndarray, obs: CoarseObservable, spec: Spectrum
) -> tuple[DiagnosticSeries, DiagnosticSeries]:
    """Thermodynamic entropy S(t) and its rescaled form (S - S0)/(ln D - S0)."""
    vols = np.array([obs.volumes[int(x)] for x in obs.xs], dtype=np.float64)
    S = np.empty(len(times))
    for i, t in enumerate(times):
        p = _weights(obs, _u_apply(spec, t, psi0.amplitudes))
        S[i] = entropy_of(p, vols)
    s_inf = np.log(obs.dim)
    denom = s_inf - S[0]
    tilde = (S - S[0]) / denom if denom != 0.0 else np.zeros_like(S)
    return (
        DiagnosticSeries("S", times, S),
        DiagnosticSeries("S_tilde", times, tilde),
    )


def relative_entropy(p: np.ndarray, pi: np.ndarray) -> float:
    """KL divergence sum p ln(p/pi); with pi_x = V_x / D this equals ln D - S(p)."""
    p = np.asarray(p, dtype=np.float64)
    pi = np.asarray(pi, dtype=np.float64)
    if np.any((pi <= 0) & (p > 1e-15)):
        return float("inf")
    nz = p > 0
    return float(np.sum(p[nz] * np.log(p[nz] / pi[nz])))


def currents(psi: PureState, H, obs: CoarseObservable) -> np.ndarray:
    """Antisymmetric probability currents J[i_x, i_y] between macrostates.

    J_{x,y} = 2 Im <Pi_x psi| H |Pi_y psi>; dp_x/dt = sum_y J_{x,y}.
    """
    Hm = H.matrix if hasattr(H, "matrix") else H
    M = len(obs.xs)
    parts = []
    for x in obs.xs:
        branch = np.zeros_like(psi.amplitudes)
        m = obs.mask(int(x))
        branch[m] = psi.amplitudes[m]
        parts.append(branch)
    J = np.zeros((M, M))
    for i in range(M):
        hi = Hm @ parts[i]
        for j in range(i + 1, M):
            # vdot(a_j, H a_i) = a_j^dag H a_i, which is J_{j,i}
            val = 2.0 * float(np.imag(np.vdot(parts[j], hi)))
            J[j, i] = val
            J[i, j] = -val
    return J


def rescaled_expectation_series(
    psi0: PureState, times: np.ndarray, obs: CoarseObservable, spec: Spectrum
) -> DiagnosticSeries:
    """<X>(t) / <X>(0); the observable is traceless so the long-time value is 0."""
    vals = np.empty(len(times))
    for i, t in enumerate(times):
        amp = _u_apply(spec, t, psi0.amplitudes)
        vals[i] = float(np.sum(obs.lambda_vals * np.abs(amp) ** 2))
    x0 = vals[0]
    if x0 == 0.0:
        return DiagnosticSeries("X_tilde", times, np.zeros_like(vals))
    return DiagnosticSeries("X_tilde", times, vals / x0)
