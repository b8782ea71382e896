"""Stochastic integration of the qubit dynamics along reproducible noise paths.

Two unravelings of the same noisy evolution:

* sse -- pure-state trajectories ("quantum-jump" diffusive unraveling),
  renormalized after every Euler-Maruyama step;
* sme -- density-matrix trajectories, re-Hermitized and trace-renormalized
  after every step.

`deterministic_channel` toggles the deterministic drift of the noise channel
(+1/2 L^dag L dt on states, +1/2 {L, {L, rho}} dt on density matrices): off it
reproduces the jump-term-only treatment, on it includes the full channel.

Reproducibility contract: a trajectory's noise derives only from
(master_seed, traj_index) through a counter-based Philox stream; the ensemble
reduction runs in a fixed ascending order over a fixed batch layout, so results
are byte-identical for any worker count.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels, model

N_BATCHES = 20  # fixed work-unit count; independent of worker count by design

SCHEMES = ("sse", "sme")


class DegenerateStepError(RuntimeError):
    """State norm / trace collapsed below 1e-12 before renormalization."""

    def __init__(self, scheme, time=None, traj_index=None):
        self.scheme = scheme
        self.time = time
        self.traj_index = traj_index
        where = "" if traj_index is None else f" in trajectory {traj_index}"
        when = "" if time is None else f" at t = {time:.6g}"
        super().__init__(f"degenerate {scheme} step{where}{when}")


class EnsembleError(RuntimeError):
    """More than 1% of trajectories failed; the ensemble average is not trustworthy."""


@dataclass(frozen=True)
class TrajectoryConfig:
    dt: float = 1e-3
    t_max: float = 20.0
    n_traj: int = 1
    master_seed: int = 0
    scheme: str = "sse"
    deterministic_channel: bool = False
    sample_stride: int = 10

    def __post_init__(self):
        if not (self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.t_max != 0 and self.t_max < self.dt:
            raise ValueError("t_max must be 0 or >= dt")
        if self.n_traj < 1:
            raise ValueError("n_traj must be >= 1")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.sample_stride < 1:
            raise ValueError("sample_stride must be >= 1")
        if not isinstance(self.master_seed, int) or self.master_seed < 0:
            raise ValueError("master_seed must be a nonnegative integer")

    @property
    def n_steps(self) -> int:
        return math.ceil(self.t_max / self.dt)


@dataclass(frozen=True)
class WienerPath:
    master_seed: int
    traj_index: int
    n_channels: int
    dt: float
    increments: np.ndarray  # (n_steps, n_channels), each ~ Normal(0, dt)


def wiener_path(master_seed, traj_index, n_channels, n_steps, dt) -> WienerPath:
    """Gaussian increments of variance dt, a pure function of (master_seed, traj_index)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(traj_index,))
    gen = np.random.Generator(np.random.Philox(ss))
    inc = gen.standard_normal((n_steps, n_channels)) * math.sqrt(dt)
    return WienerPath(master_seed, traj_index, n_channels, dt, inc)


def sse_step(psi, h, ls, dt, dw, deterministic_channel=False, normalize=True):
    """One Euler-Maruyama (Ito) step of the pure-state unraveling.

    psi' = psi + [-iH + c/2 sum_j L_j^dag L_j] psi dt - sum_j L_j psi dW_j,
    then exact renormalization.  General-matrix reference implementation; the
    ensemble runner uses the diagonal-operator kernels instead.
    """
    psi = np.asarray(psi, dtype=np.complex128)
    new = psi + dt * (-1j * (h @ psi))
    if deterministic_channel:
        for l in ls:
            new = new + 0.5 * dt * (l.conj().T @ (l @ psi))
    for l, w in zip(ls, dw):
        new = new - w * (l @ psi)
    if not normalize:
        return new
    nrm = np.linalg.norm(new)
    if nrm < 1e-12:
        raise DegenerateStepError("sse")
    return new / nrm


def sme_step(rho, h, ls, dt, dw, deterministic_channel=False, normalize=True):
    """One Euler-Maruyama (Ito) step of the density-matrix unraveling.

    rho' = rho + [-i(H rho - rho H^dag) + c/2 sum_j {L_j, {L_j, rho}}] dt
           - sum_j {L_j, rho} dW_j,
    then re-Hermitization and trace renormalization.
    """
    rho = np.asarray(rho, dtype=np.complex128)
    new = rho + dt * (-1j * (h @ rho - rho @ h.conj().T))
    if deterministic_channel:
        for l in ls:
            anti = l @ rho + rho @ l
            new = new + 0.5 * dt * (l @ anti + anti @ l)
    for l, w in zip(ls, dw):
        new = new - w * (l @ rho + rho @ l)
    if not normalize:
        return new
    new = 0.5 * (new + new.conj().T)
    tr = float(np.trace(new).real)
    if tr < 1e-12:
        raise DegenerateStepError("sme")
    return new / tr


def _sample_grid(cfg: TrajectoryConfig):
    n_steps = cfg.n_steps
    n_samples = n_steps // cfg.sample_stride + 1
    times = np.arange(n_samples) * (cfg.dt * cfg.sample_stride)
    return n_steps, n_samples, times


def run_trajectory(spec, cfg: TrajectoryConfig, traj_index: int, psi0=None):
    """Integrate a single trajectory; returns (times, samples).

    samples has shape (n_samples, dim) for sse and (n_samples, dim, dim) for
    sme, sampled every cfg.sample_stride steps starting at t = 0.
    """
    if psi0 is None:
        psi0 = model.initial_state(spec)
    psi0 = np.asarray(psi0, dtype=np.complex128)
    h = model.build_hamiltonian(spec)
    ldiag = model.jump_diagonals(spec)
    return _run_one(spec, cfg, traj_index, psi0, h, ldiag, kernels.chains())


def _run_one(spec, cfg, traj_index, psi0, h, ldiag, chain_fns):
    n_steps, n_samples, times = _sample_grid(cfg)
    path = wiener_path(cfg.master_seed, traj_index, spec.n_qubits, n_steps, cfg.dt)
    c_det = 1 if cfg.deterministic_channel else 0
    sse_fn, sme_fn = chain_fns
    if cfg.scheme == "sse":
        out = np.empty((n_samples, spec.dim), dtype=np.complex128)
        bad = sse_fn(psi0, h, ldiag, cfg.dt, path.increments, c_det, cfg.sample_stride, out)
    else:
        rho0 = np.outer(psi0, psi0.conj())
        out = np.empty((n_samples, spec.dim, spec.dim), dtype=np.complex128)
        bad = sme_fn(rho0, h, ldiag, cfg.dt, path.increments, c_det, cfg.sample_stride, out)
    if bad >= 0:
        raise DegenerateStepError(cfg.scheme, time=(bad + 1) * cfg.dt, traj_index=traj_index)
    return times, out


@dataclass
class EnsembleResult:
    """Ensemble average with per-observable statistics.

    rho is the mean density matrix over surviving trajectories; batch_rho holds
    the per-batch means (fixed contiguous batches) used for standard errors of
    nonlinear observables.
    """

    times: np.ndarray
    rho: np.ndarray            # (T, d, d)
    pop_mean: np.ndarray       # (T, d)
    pop_stderr: np.ndarray     # (T, d)
    batch_rho: np.ndarray      # (B, T, d, d)
    batch_counts: np.ndarray   # (B,)
    n_ok: int
    n_failed: int
    failures: list
    spec: object = None
    cfg: object = None

    @property
    def n_batches(self) -> int:
        return len(self.batch_counts)


def _batch_bounds(n_traj: int, n_batches: int):
    return [(b * n_traj // n_batches, (b + 1) * n_traj // n_batches) for b in range(n_batches)]


def _run_batch(spec, cfg, psi0, lo, hi, h, ldiag, chain_fns, shape):
    n_samples, d = shape
    rho_sum = np.zeros((n_samples, d, d), dtype=np.complex128)
    pop_sum = np.zeros((n_samples, d))
    pop_sq = np.zeros((n_samples, d))
    count = 0
    failures = []
    for idx in range(lo, hi):
        try:
            _, out = _run_one(spec, cfg, idx, psi0, h, ldiag, chain_fns)
        except DegenerateStepError as err:
            failures.append((idx, err.time))
            continue
        if cfg.scheme == "sse":
            p = np.abs(out) ** 2
            rho_sum += np.einsum("ti,tj->tij", out, out.conj())
        else:
            p = np.einsum("tii->ti", out).real
            rho_sum += out
        pop_sum += p
        pop_sq += p * p
        count += 1
    return rho_sum, pop_sum, pop_sq, count, failures


def resolve_workers(workers=None) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("NHQUBITS_WORKERS", "").strip()
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_ensemble(spec, cfg: TrajectoryConfig, psi0=None, workers=None) -> EnsembleResult:
    """Average cfg.n_traj trajectories; deterministic for any worker count.

    Failed trajectories are excluded and counted; more than 1% failures raises
    EnsembleError.  Standard errors: populations from per-trajectory moments,
    everything nonlinear downstream from the per-batch means in batch_rho.
    """
    if psi0 is None:
        psi0 = model.initial_state(spec)
    psi0 = np.asarray(psi0, dtype=np.complex128)
    h = model.build_hamiltonian(spec)
    ldiag = model.jump_diagonals(spec)
    chain_fns = kernels.chains()
    _, n_samples, times = _sample_grid(cfg)
    shape = (n_samples, spec.dim)

    n_batches = min(N_BATCHES, cfg.n_traj)
    bounds = _batch_bounds(cfg.n_traj, n_batches)
    n_workers = resolve_workers(workers)
    if n_workers == 1:
        parts = [_run_batch(spec, cfg, psi0, lo, hi, h, ldiag, chain_fns, shape)
                 for lo, hi in bounds]
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            futures = [pool.submit(_run_batch, spec, cfg, psi0, lo, hi, h, ldiag, chain_fns, shape)
                       for lo, hi in bounds]
            parts = [f.result() for f in futures]  # batch order, not completion order

    failures = []
    for part in parts:
        failures.extend(part[4])
    n_failed = len(failures)
    n_ok = cfg.n_traj - n_failed
    if n_failed > 0.01 * cfg.n_traj:
        raise EnsembleError(
            f"{n_failed}/{cfg.n_traj} trajectories failed (> 1%); first: {failures[0]}"
        )

    rho_sum = np.zeros((n_samples, spec.dim, spec.dim), dtype=np.complex128)
    pop_sum = np.zeros(shape)
    pop_sq = np.zeros(shape)
    batch_rho = []
    batch_counts = []
    for rs, ps, pq, count, _ in parts:  # ascending batch order: fixed reduction
        rho_sum += rs
        pop_sum += ps
        pop_sq += pq
        if count > 0:
            batch_rho.append(rs / count)
            batch_counts.append(count)

    rho = rho_sum / n_ok
    pop_mean = pop_sum / n_ok
    if n_ok > 1:
        var = np.clip((pop_sq - n_ok * pop_mean**2) / (n_ok - 1), 0.0, None)
        pop_stderr = np.sqrt(var / n_ok)
    else:
        pop_stderr = np.zeros(shape)
    return EnsembleResult(
        times=times,
        rho=rho,
        pop_mean=pop_mean,
        pop_stderr=pop_stderr,
        batch_rho=np.array(batch_rho),
        batch_counts=np.array(batch_counts, dtype=np.int64),
        n_ok=n_ok,
        n_failed=n_failed,
        failures=failures,
        spec=spec,
        cfg=cfg,
    )
