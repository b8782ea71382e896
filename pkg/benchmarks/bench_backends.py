#!/usr/bin/env python3
"""Compare the jitted and pure-numpy step kernels on a realistic workload."""

import argparse
import time

import numpy as np

from nhqubits import SystemSpec, TrajectoryConfig
from nhqubits import kernels, model, trajectory


def run_chain(backend, spec, cfg, scheme, n_traj):
    sse, sme = kernels.chains(backend)
    h = model.build_hamiltonian(spec)
    ldiag = model.jump_diagonals(spec)
    n_steps, n_samples, _ = trajectory._sample_grid(cfg)
    d = spec.dim
    psi0 = model.initial_state(spec)
    total = 0.0
    for k in range(n_traj):
        dw = trajectory.wiener_path(cfg.master_seed, k, spec.n_qubits,
                                    n_steps, cfg.dt).increments
        c_det = scheme == "sme"  # bare SME noise is unstable at this gamma
        if scheme == "sse":
            out = np.empty((n_samples, d), dtype=np.complex128)
            t0 = time.perf_counter()
            bad = sse(psi0, h, ldiag, cfg.dt, dw, c_det, cfg.sample_stride, out)
        else:
            rho0 = np.outer(psi0, psi0.conj())
            out = np.empty((n_samples, d, d), dtype=np.complex128)
            t0 = time.perf_counter()
            bad = sme(rho0, h, ldiag, cfg.dt, dw, c_det, cfg.sample_stride, out)
        total += time.perf_counter() - t0
        assert bad < 0, "trajectory collapsed mid-benchmark"
    return total, out


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-traj", type=int, default=50)
    ap.add_argument("--t-max", type=float, default=20.0)
    ap.add_argument("--n-qubits", type=int, default=2, choices=(2, 3, 4))
    args = ap.parse_args()

    n = args.n_qubits
    spec = SystemSpec(n, 0.1, (1.1,) + (0.5,) * (n - 1), (0.1,) * n)
    cfg = TrajectoryConfig(dt=1e-3, t_max=args.t_max, master_seed=7)
    steps = cfg.n_steps * args.n_traj

    print(f"available backends: {kernels.available_backends()}")
    print(f"workload: {args.n_traj} trajectories x {cfg.n_steps} steps, dim {spec.dim}")
    print()
    for scheme in ("sse", "sme"):
        print(f"=== {scheme} ===")
        results = {}
        for backend in kernels.available_backends():
            if backend == "numba":
                run_chain(backend, spec, cfg, scheme, 1)  # JIT warmup outside timing
            elapsed, out = run_chain(backend, spec, cfg, scheme, args.n_traj)
            results[backend] = (elapsed, out)
            print(f"{backend:>6}: {elapsed:8.3f}s  ({elapsed / steps * 1e6:7.3f} us/step)")
        if len(results) == 2:
            t_nb, out_nb = results["numba"]
            t_np, out_np = results["numpy"]
            print(f"speedup: {t_np / t_nb:.1f}x   "
                  f"max |diff|: {np.abs(out_nb - out_np).max():.3e}")
        print()


if __name__ == "__main__":
    main()
