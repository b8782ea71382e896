"""Observables: populations, concurrence, fidelity, reference states, timescales."""

from dataclasses import dataclass

import numpy as np

from . import linalg, model

_SY = np.array([[0.0, -1.0j], [1.0j, 0.0]])
SPIN_FLIP = np.kron(_SY, _SY).real  # sigma_y x sigma_y is real


@dataclass
class ObservableSeries:
    times: np.ndarray
    values: np.ndarray   # (T,) scalar series or (T, dim) population set
    stderr: np.ndarray


def populations(state) -> np.ndarray:
    """Basis populations: |amplitudes|^2 for a vector, diagonal for a matrix."""
    state = np.asarray(state)
    if state.ndim == 1:
        return np.abs(state) ** 2
    return np.diag(state).real.copy()


def _check_density(rho, dim=None, tol=1e-8):
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"expected a square density matrix, got shape {rho.shape}")
    if dim is not None and rho.shape[0] != dim:
        raise ValueError(f"expected dimension {dim}, got {rho.shape[0]}")
    if np.abs(rho - rho.conj().T).max() > 1e-8:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > 1e-6:
        raise ValueError(f"density matrix trace is {np.trace(rho).real:.6g}, not 1")
    return 0.5 * (rho + rho.conj().T)


def concurrence(rho, tol: float = 1e-8) -> float:
    """Two-qubit concurrence C = max{0, t1 - t2 - t3 - t4}.

    t_i are the descending eigenvalues of R = sqrt(sqrt(rho) rho~ sqrt(rho)),
    rho~ = (sy x sy) rho* (sy x sy).  `tol` is the PSD clamp for Monte Carlo
    noise in ensemble-averaged inputs.
    """
    rho = _check_density(rho, dim=4, tol=tol)
    rt = linalg.herm_psd_sqrt(rho, tol=tol)
    rho_tilde = SPIN_FLIP @ rho.conj() @ SPIN_FLIP
    m = rt @ rho_tilde @ rt
    r = linalg.herm_psd_sqrt(0.5 * (m + m.conj().T), tol=tol)
    taus = np.sort(np.linalg.eigvalsh(r))[::-1]
    return float(max(0.0, taus[0] - taus[1] - taus[2] - taus[3]))


def uhlmann_fidelity(rho_t, rho, tol: float = 1e-8) -> float:
    """Mixed-state fidelity F = (Tr sqrt(sqrt(rho_t) rho sqrt(rho_t)))^2."""
    rho_t = np.asarray(rho_t, dtype=np.complex128)
    rho = np.asarray(rho, dtype=np.complex128)
    if rho_t.shape != rho.shape:
        raise ValueError(f"dimension mismatch: {rho_t.shape} vs {rho.shape}")
    rt = linalg.herm_psd_sqrt(0.5 * (rho_t + rho_t.conj().T), tol=tol)
    m = rt @ rho @ rt
    s = linalg.herm_psd_sqrt(0.5 * (m + m.conj().T), tol=tol)
    return float(max(0.0, np.trace(s).real) ** 2)


def no_jump_reference(spec, t: float, psi0=None) -> np.ndarray:
    """Projector onto the noiselessly evolved state exp(-iHt)|psi0>, renormalized."""
    if t < 0:
        raise ValueError("t must be >= 0")
    if psi0 is None:
        psi0 = model.initial_state(spec)
    phi = linalg.mat_exp(-1j * model.build_hamiltonian(spec) * t) @ np.asarray(psi0, complex)
    nrm = np.linalg.norm(phi)
    if nrm < 1e-300:
        raise ValueError(f"reference state fully decayed at t = {t:.6g}")
    phi = phi / nrm
    return np.outer(phi, phi.conj())


def w_state(n_qubits: int) -> np.ndarray:
    """Equal single-excitation superposition (|10..0> + |01..0> + ... )/sqrt(n)."""
    d = 2 ** n_qubits
    psi = np.zeros(d, dtype=np.complex128)
    for q in range(n_qubits):
        psi[1 << (n_qubits - 1 - q)] = 1.0
    return psi / np.sqrt(n_qubits)


def w_state_fidelity(rho, n_qubits: int) -> float:
    """Overlap <W|rho|W> -- the entanglement proxy reported for n >= 3."""
    w = w_state(n_qubits)
    return float(np.real(w.conj() @ np.asarray(rho, complex) @ w))


# --- series extraction from ensembles -------------------------------------

def ensemble_clamp_tol(ens) -> float:
    # MC-averaged matrices can dip ~1/sqrt(n) below PSD
    return max(1e-8, 3.0 / np.sqrt(max(ens.n_ok, 1)))


def population_series(ens) -> ObservableSeries:
    return ObservableSeries(ens.times, ens.pop_mean, ens.pop_stderr)


def _batch_scalar_series(ens, fn):
    """Apply fn(rho) along the time axis; stderr from the per-batch means."""
    values = np.array([fn(r) for r in ens.rho])
    n_b = len(ens.batch_rho)
    if n_b > 1:
        bvals = np.array([[fn(r) for r in batch] for batch in ens.batch_rho])
        stderr = bvals.std(axis=0, ddof=1) / np.sqrt(n_b)
    else:
        stderr = np.zeros_like(values)
    return values, stderr


def concurrence_series(ens) -> ObservableSeries:
    tol = ensemble_clamp_tol(ens)
    values, stderr = _batch_scalar_series(ens, lambda r: concurrence(r, tol=tol))
    return ObservableSeries(ens.times, values, stderr)


def fidelity_series(ens, spec=None, psi0=None) -> ObservableSeries:
    """Fidelity of the ensemble state against the no-jump reference at each time."""
    spec = spec if spec is not None else ens.spec
    tol = ensemble_clamp_tol(ens)
    refs = [no_jump_reference(spec, t, psi0) for t in ens.times]
    values = np.array([uhlmann_fidelity(ref, r, tol=tol) for ref, r in zip(refs, ens.rho)])
    n_b = len(ens.batch_rho)
    if n_b > 1:
        bvals = np.array(
            [[uhlmann_fidelity(ref, r, tol=tol) for ref, r in zip(refs, batch)]
             for batch in ens.batch_rho]
        )
        stderr = bvals.std(axis=0, ddof=1) / np.sqrt(n_b)
    else:
        stderr = np.zeros_like(values)
    return ObservableSeries(ens.times, values, stderr)


# --- timescale extraction ---------------------------------------------------

def balance_time(series, subset, tol: float = 0.02):
    """Earliest time at which the selected populations equalize.

    series: ObservableSeries whose values are (T, dim) populations (or a bare
    (T, k) array with series.times).  Two triggers, whichever comes first: the
    pairwise spread (max - min over `subset`) drops below `tol`, or the
    initially leading population is caught by the best of the rest (the
    crossing can be much narrower than the sample spacing, so the spread dip
    alone is not reliable).  Both are refined by linear interpolation.
    Returns None if the populations never meet.
    """
    times = series.times
    vals = series.values[:, list(subset)] if subset is not None else series.values
    spread = vals.max(axis=1) - vals.min(axis=1)
    candidates = []

    below = np.flatnonzero(spread < tol)
    if below.size:
        k = int(below[0])
        if k == 0:
            candidates.append(float(times[0]))
        else:
            t0, t1 = times[k - 1], times[k]
            s0, s1 = spread[k - 1], spread[k]
            candidates.append(
                float(t1) if s1 == s0
                else float(t0 + (tol - s0) * (t1 - t0) / (s1 - s0)))

    leader = int(np.argmax(vals[0]))
    others = [i for i in range(vals.shape[1]) if i != leader]
    if others:
        lead = vals[:, leader] - vals[:, others].max(axis=1)
        hit = np.flatnonzero(lead <= 0.0)
        if hit.size:
            k = int(hit[0])
            if k == 0:
                candidates.append(float(times[0]))
            else:
                l0, l1 = lead[k - 1], lead[k]
                candidates.append(
                    float(times[k]) if l1 == l0
                    else float(times[k - 1] - l0 * (times[k] - times[k - 1]) / (l1 - l0)))

    return min(candidates) if candidates else None


def balance_time_with_error(ens, subset, tol: float = 0.02):
    """(balance time from the pooled ensemble, batch-resampled standard error)."""
    pooled = balance_time(population_series(ens), subset, tol)
    estimates = []
    for batch in ens.batch_rho:
        pops = np.einsum("tii->ti", batch).real
        t = balance_time(ObservableSeries(ens.times, pops, None), subset, tol)
        if t is not None:
            estimates.append(t)
    if pooled is None or len(estimates) < 2:
        return pooled, float("nan")
    return pooled, float(np.std(estimates, ddof=1) / np.sqrt(len(estimates)))


def peak_concurrence(series) -> tuple:
    """(t_peak, c_max) of a scalar series, argmax with 3-point parabolic refinement."""
    times = np.asarray(series.times, dtype=float)
    vals = np.asarray(series.values, dtype=float)
    if vals.size == 0:
        raise ValueError("empty series")
    k = int(np.argmax(vals))  # ties -> earliest
    if k == 0 or k == vals.size - 1:
        return float(times[k]), float(vals[k])
    y0, y1, y2 = vals[k - 1], vals[k], vals[k + 1]
    denom = y0 - 2.0 * y1 + y2
    if denom >= 0:  # flat or degenerate neighborhood; keep the sample
        return float(times[k]), float(vals[k])
    off = 0.5 * (y0 - y2) / denom
    h = times[k] - times[k - 1]
    c = y1 - 0.25 * (y0 - y2) * off
    return float(times[k] + off * h), float(c)


def peak_concurrence_with_error(ens):
    """Pooled (t_peak, c_max) plus batch-resampled standard errors of both."""
    tol = ensemble_clamp_tol(ens)
    t_peak, c_max = peak_concurrence(concurrence_series(ens))
    est = []
    for batch in ens.batch_rho:
        vals = np.array([concurrence(r, tol=tol) for r in batch])
        est.append(peak_concurrence(ObservableSeries(ens.times, vals, None)))
    if len(est) < 2:
        return (t_peak, float("nan")), (c_max, float("nan"))
    est = np.array(est)
    n_b = len(est)
    t_se = float(est[:, 0].std(ddof=1) / np.sqrt(n_b))
    c_se = float(est[:, 1].std(ddof=1) / np.sqrt(n_b))
    return (t_peak, t_se), (c_max, c_se)
