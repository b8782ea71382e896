"""Euler-Maruyama chain integrators: numba-jitted kernels with a numpy twin.

Backend selection: set NHQUBITS_BACKEND=numpy or numba; default is numba when
importable, numpy otherwise.  Each backend is deterministic on its own; the two
differ only in last-ulp rounding (different summation compilation), so
cross-backend comparisons must be tolerance-based.

Both kernels integrate one trajectory along a precomputed noise path and write
samples every `stride` steps into `out` (out[0] is the initial state).  Jump
operators enter through their real diagonals, shape (n_channels, dim).
Return value: -1 on success, else the 0-based step index at which the state
degenerated (norm or trace below 1e-12 before renormalization).
"""

import math
import os

import numpy as np

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    numba = None
    HAS_NUMBA = False

_NORM_FLOOR = 1e-12


def _sse_chain_np(psi0, h, ldiag, dt, dw, c_det, stride, out):
    psi = psi0.copy()
    out[0] = psi
    drift = 0.5 * float(c_det) * (ldiag * ldiag).sum(axis=0)
    n_steps = dw.shape[0]
    for k in range(n_steps):
        noise = ldiag.T @ dw[k]
        new = psi + dt * (-1j * (h @ psi) + drift * psi) - noise * psi
        nrm = math.sqrt(float(np.real(np.vdot(new, new))))
        if nrm < _NORM_FLOOR:
            return k
        psi = new / nrm
        if (k + 1) % stride == 0:
            row = (k + 1) // stride
            if row < out.shape[0]:
                out[row] = psi
    return -1


def _sme_chain_np(rho0, h, ldiag, dt, dw, c_det, stride, out):
    rho = rho0.copy()
    out[0] = rho
    # anticommutators with diagonal L are elementwise: ({L, X})_im = (l_i + l_m) X_im
    s = ldiag[:, :, None] + ldiag[:, None, :]  # (n_ch, d, d)
    d2 = 0.5 * float(c_det) * (s * s).sum(axis=0)
    n_steps = dw.shape[0]
    for k in range(n_steps):
        a = h @ rho
        w = np.einsum("j,jim->im", dw[k], s)
        new = rho + dt * (-1j * (a - a.conj().T) + d2 * rho) - w * rho
        new = 0.5 * (new + new.conj().T)
        tr = float(np.trace(new).real)
        if tr < _NORM_FLOOR:
            return k
        rho = new / tr
        if (k + 1) % stride == 0:
            row = (k + 1) // stride
            if row < out.shape[0]:
                out[row] = rho
    return -1


if HAS_NUMBA:

    @numba.njit(cache=True, nogil=True)
    def _sse_chain_nb(psi0, h, ldiag, dt, dw, c_det, stride, out):  # pragma: no cover - jitted
        d = psi0.shape[0]
        nch = ldiag.shape[0]
        n_steps = dw.shape[0]
        psi = psi0.copy()
        new = np.empty(d, np.complex128)
        drift = np.zeros(d, np.float64)
        if c_det:
            for j in range(nch):
                for i in range(d):
                    drift[i] += 0.5 * ldiag[j, i] * ldiag[j, i]
        for i in range(d):
            out[0, i] = psi[i]
        for k in range(n_steps):
            for i in range(d):
                acc = 0.0j
                for m in range(d):
                    acc += h[i, m] * psi[m]
                noise = 0.0
                for j in range(nch):
                    noise += ldiag[j, i] * dw[k, j]
                new[i] = psi[i] + dt * (-1j * acc + drift[i] * psi[i]) - noise * psi[i]
            nrm2 = 0.0
            for i in range(d):
                nrm2 += new[i].real * new[i].real + new[i].imag * new[i].imag
            if nrm2 < _NORM_FLOOR * _NORM_FLOOR:
                return k
            inv = 1.0 / math.sqrt(nrm2)
            for i in range(d):
                psi[i] = new[i] * inv
            if (k + 1) % stride == 0:
                row = (k + 1) // stride
                if row < out.shape[0]:
                    for i in range(d):
                        out[row, i] = psi[i]
        return -1

    @numba.njit(cache=True, nogil=True)
    def _sme_chain_nb(rho0, h, ldiag, dt, dw, c_det, stride, out):  # pragma: no cover - jitted
        d = rho0.shape[0]
        nch = ldiag.shape[0]
        n_steps = dw.shape[0]
        rho = rho0.copy()
        a = np.empty((d, d), np.complex128)
        new = np.empty((d, d), np.complex128)
        d2 = np.zeros((d, d), np.float64)
        if c_det:
            for j in range(nch):
                for i in range(d):
                    for m in range(d):
                        sij = ldiag[j, i] + ldiag[j, m]
                        d2[i, m] += 0.5 * sij * sij
        for i in range(d):
            for m in range(d):
                out[0, i, m] = rho[i, m]
        for k in range(n_steps):
            for i in range(d):
                for m in range(d):
                    acc = 0.0j
                    for p in range(d):
                        acc += h[i, p] * rho[p, m]
                    a[i, m] = acc
            for i in range(d):
                for m in range(d):
                    w = 0.0
                    for j in range(nch):
                        w += dw[k, j] * (ldiag[j, i] + ldiag[j, m])
                    new[i, m] = (
                        rho[i, m]
                        + dt * (-1j * (a[i, m] - np.conj(a[m, i])) + d2[i, m] * rho[i, m])
                        - w * rho[i, m]
                    )
            tr = 0.0
            for i in range(d):
                tr += new[i, i].real
            if tr < _NORM_FLOOR:
                return k
            inv = 1.0 / tr
            for i in range(d):
                for m in range(i, d):
                    val = 0.5 * (new[i, m] + np.conj(new[m, i])) * inv
                    rho[i, m] = val
                    rho[m, i] = np.conj(val)
            if (k + 1) % stride == 0:
                row = (k + 1) // stride
                if row < out.shape[0]:
                    for i in range(d):
                        for m in range(d):
                            out[row, i, m] = rho[i, m]
        return -1


def available_backends():
    return ("numba", "numpy") if HAS_NUMBA else ("numpy",)


def default_backend() -> str:
    env = os.environ.get("NHQUBITS_BACKEND", "").strip().lower()
    if env:
        if env not in ("numba", "numpy"):
            raise ValueError(f"NHQUBITS_BACKEND must be 'numba' or 'numpy', got {env!r}")
        if env == "numba" and not HAS_NUMBA:
            raise RuntimeError("NHQUBITS_BACKEND=numba requested but numba is not importable")
        return env
    return "numba" if HAS_NUMBA else "numpy"


def chains(backend: str = None):
    """Return (sse_chain, sme_chain) for the requested backend."""
    name = backend or default_backend()
    if name == "numba":
        if not HAS_NUMBA:
            raise RuntimeError("numba backend requested but numba is not importable")
        return _sse_chain_nb, _sme_chain_nb
    if name == "numpy":
        return _sse_chain_np, _sme_chain_np
    raise ValueError(f"unknown backend {name!r}")


def sse_chain(psi0, h, ldiag, dt, dw, c_det, stride, out):
    return chains()[0](psi0, h, ldiag, dt, dw, c_det, stride, out)


def sme_chain(rho0, h, ldiag, dt, dw, c_det, stride, out):
    return chains()[1](rho0, h, ldiag, dt, dw, c_det, stride, out)
