"""Stochastic trajectory simulator for coupled lossy qubits, with a wave-plate compiler.

Pure-state (SSE) and density-matrix (SME) unravelings of a non-Hermitian
two-to-four-qubit model whose dissipative rates carry white noise; ensemble
observables (populations, concurrence, fidelity, balance/peak times); spectrum
scans of the effective two-level block; and compilation of the two-qubit
evolution onto a QWP/HWP/BD network.
"""

from .model import SystemSpec, basis_label, build_hamiltonian, initial_state, spectrum_scan
from .trajectory import (
    EnsembleResult,
    TrajectoryConfig,
    run_ensemble,
    run_trajectory,
    wiener_path,
)
from .metrics import (
    balance_time,
    concurrence,
    no_jump_reference,
    peak_concurrence,
    uhlmann_fidelity,
    w_state_fidelity,
)
from .photonic import emit_program, ksp_factor, trotter_product, waveplate_fit

__version__ = "0.1.0"

__all__ = [
    "SystemSpec",
    "TrajectoryConfig",
    "EnsembleResult",
    "basis_label",
    "build_hamiltonian",
    "initial_state",
    "spectrum_scan",
    "run_trajectory",
    "run_ensemble",
    "wiener_path",
    "concurrence",
    "uhlmann_fidelity",
    "no_jump_reference",
    "balance_time",
    "peak_concurrence",
    "w_state_fidelity",
    "ksp_factor",
    "waveplate_fit",
    "trotter_product",
    "emit_program",
    "__version__",
]
