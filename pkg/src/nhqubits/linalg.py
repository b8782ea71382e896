"""Small dense complex-matrix kernels (dimension <= 16).

Everything downstream -- Hamiltonians, density matrices, jump operators,
optical-network blocks -- lives in this size range, so these helpers favor
clarity and tight validation over asymptotics.
"""

import numpy as np
import scipy.linalg

MAX_DIM = 16

# default clamp for almost-PSD inputs: Monte Carlo averages carry noise of
# order 1/sqrt(n_traj), tiny negative eigenvalues are expected
PSD_CLAMP_TOL = 1e-8


class NotPSDError(ValueError):
    """Hermitian input has an eigenvalue below the allowed tolerance."""


def _square(a, max_dim: int = MAX_DIM) -> np.ndarray:
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if a.shape[0] > max_dim:
        raise ValueError(f"dimension {a.shape[0]} exceeds the supported maximum {max_dim}")
    if not np.isfinite(a).all():
        raise ValueError("matrix has non-finite entries")
    return a


def mat_exp(a) -> np.ndarray:
    """Matrix exponential e^A for a square complex matrix, dim <= 16."""
    return scipy.linalg.expm(_square(a))


def eig_sorted(a):
    """Eigen-decomposition with the global ordering convention.

    Eigenvalues sorted by descending real part, ties broken by descending
    imaginary part. Returns (values, vectors) with vectors in columns.
    """
    w, v = np.linalg.eig(_square(a))
    order = np.lexsort((-w.imag, -w.real))
    return w[order], v[:, order]


def herm_psd_sqrt(a, tol: float = PSD_CLAMP_TOL) -> np.ndarray:
    """Hermitian square root of an (almost) PSD Hermitian matrix.

    Eigenvalues in [-tol, 0) are clamped to zero; anything below -tol is a
    genuine violation and raises NotPSDError.
    """
    a = _square(a)
    if np.abs(a - a.conj().T).max() > 1e-10:
        raise ValueError("input is not Hermitian")
    w, v = np.linalg.eigh(a)
    if w.min() < -tol:
        raise NotPSDError(f"eigenvalue {w.min():.6e} below -tol = {-tol:.1e}")
    # zero modes come back as O(eps)-relative junk whose sqrt (~1e-9) would
    # pollute trace formulas; flush everything below the rounding floor
    floor = 4096.0 * np.finfo(np.float64).eps * max(w.max(), 0.0)
    w[w < floor] = 0.0
    return (v * np.sqrt(w)) @ v.conj().T


def svd_2x2(m):
    """SVD of a 2x2 complex matrix: m = U @ diag(s) @ V^dagger, s1 >= s2 >= 0."""
    m = _square(m)
    if m.shape[0] != 2:
        raise ValueError("svd_2x2 expects a 2x2 matrix")
    u, s, vh = np.linalg.svd(m)
    return u, s, vh.conj().T
