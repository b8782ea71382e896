"""System specification, Hamiltonians, jump operators, and spectra.

The model: n qubits (n = 2, 3, 4) with excitation exchange at strength J and
per-qubit decay rates Gamma_j that fluctuate with white noise of strength
gamma_j.  The pair topology couples the two qubits directly; the star topology
couples qubit 1 to every other qubit with the same J.

Basis convention (fixed globally): basis index b = sum_j bit_j * 2^(n-j), i.e.
qubit 1 is the most significant bit, so |10> -> index 2 for n = 2.
"""

from dataclasses import dataclass
import math

import numpy as np

TOPOLOGIES = ("pair", "star")


@dataclass(frozen=True)
class SystemSpec:
    n_qubits: int
    J: float
    Gamma: tuple
    gamma: tuple
    topology: str = None  # defaults to pair for n=2, star otherwise

    def __post_init__(self):
        if self.n_qubits not in (2, 3, 4):
            raise ValueError(f"n_qubits must be 2, 3 or 4, got {self.n_qubits}")
        if not (self.J > 0):
            raise ValueError(f"J must be positive, got {self.J}")
        object.__setattr__(self, "Gamma", tuple(float(g) for g in self.Gamma))
        object.__setattr__(self, "gamma", tuple(float(g) for g in self.gamma))
        if len(self.Gamma) != self.n_qubits:
            raise ValueError(f"Gamma needs {self.n_qubits} entries, got {len(self.Gamma)}")
        if len(self.gamma) != self.n_qubits:
            raise ValueError(f"gamma needs {self.n_qubits} entries, got {len(self.gamma)}")
        if any(g < 0 for g in self.Gamma):
            raise ValueError("Gamma entries must be >= 0")
        if any(g < 0 for g in self.gamma):
            raise ValueError("gamma entries must be >= 0")
        topo = self.topology
        if topo is None:
            topo = "pair" if self.n_qubits == 2 else "star"
            object.__setattr__(self, "topology", topo)
        if topo not in TOPOLOGIES:
            raise ValueError(f"topology must be one of {TOPOLOGIES}, got {topo!r}")
        if topo == "pair" and self.n_qubits != 2:
            raise ValueError("pair topology requires n_qubits = 2")
        if topo == "star" and self.n_qubits < 3:
            raise ValueError("star topology requires n_qubits >= 3")

    @property
    def dim(self) -> int:
        return 2 ** self.n_qubits


def basis_label(index: int, n_qubits: int) -> str:
    """Bit-string label of a basis state, qubit 1 leftmost ('10' -> index 2)."""
    return format(index, f"0{n_qubits}b")


def initial_state(spec: SystemSpec) -> np.ndarray:
    """Default initial state |10...0>: qubit 1 excited, the rest in the ground state."""
    psi = np.zeros(spec.dim, dtype=np.complex128)
    psi[1 << (spec.n_qubits - 1)] = 1.0
    return psi


def build_hamiltonian(spec: SystemSpec) -> np.ndarray:
    """Non-Hermitian Hamiltonian H = H_int - i sum_j Gamma_j |1><1|_j.

    H_int exchanges one excitation between qubit 1 and each partner qubit
    (qubit 2 for pair; every other qubit for star) with strength J.
    """
    n, d = spec.n_qubits, spec.dim
    h = np.zeros((d, d), dtype=np.complex128)
    for b in range(d):
        g = 0.0
        for j in range(n):
            if b & (1 << (n - 1 - j)):
                g += spec.Gamma[j]
        h[b, b] = -1j * g
    msb = 1 << (n - 1)
    for q in range(1, n):  # partners of qubit 1
        bit = 1 << (n - 1 - q)
        for b in range(d):
            # sigma_1^- sigma_q^+ : qubit 1 excited, qubit q not
            if (b & msb) and not (b & bit):
                b2 = b - msb + bit
                h[b, b2] += spec.J
                h[b2, b] += spec.J
    return h


def jump_diagonals(spec: SystemSpec) -> np.ndarray:
    """Real diagonals of the jump operators, shape (n_qubits, dim).

    The jump operator of qubit j is sqrt(2 gamma_j Gamma_j^2) |1><1|_j --
    diagonal in the computational basis, which the integration kernels exploit.
    """
    n, d = spec.n_qubits, spec.dim
    out = np.zeros((n, d), dtype=np.float64)
    for j in range(n):
        pref = math.sqrt(2.0 * spec.gamma[j]) * spec.Gamma[j]
        bit = 1 << (n - 1 - j)
        for b in range(d):
            if b & bit:
                out[j, b] = pref
    return out


def jump_operators(spec: SystemSpec) -> list:
    """Jump operators as full matrices, one per qubit (Hermitian, PSD, diagonal)."""
    return [np.diag(row.astype(np.complex128)) for row in jump_diagonals(spec)]


def effective_block(spec: SystemSpec) -> np.ndarray:
    """Restriction of H to span{|10>, |01>} (two qubits only), in that row order."""
    if spec.n_qubits != 2:
        raise ValueError("effective_block is unsupported for n_qubits != 2")
    g1, g2 = spec.Gamma
    return np.array([[-1j * g1, spec.J], [spec.J, -1j * g2]], dtype=np.complex128)


@dataclass(frozen=True)
class SpectrumPoint:
    gamma1: float
    eigenvalues: tuple  # (lambda_plus, lambda_minus)


def spectrum_scan(spec: SystemSpec, gamma1_grid):
    """Closed-form spectrum of the effective block along a Gamma_1 scan.

    For each grid value: lambda_pm = -i(G1+G2)/2 +- sqrt(J^2 - (G1-G2)^2/4)
    (principal branch; the pair is unordered downstream). Returns the list of
    SpectrumPoints and the nonnegative exceptional points Gamma_2 +- 2J.
    """
    if spec.n_qubits != 2:
        raise ValueError("spectrum_scan is unsupported for n_qubits != 2")
    g2, j = spec.Gamma[1], spec.J
    points = []
    for g1 in gamma1_grid:
        g1 = float(g1)
        if g1 < 0:
            raise ValueError("gamma1_grid values must be >= 0")
        root = np.sqrt(complex(j * j - (g1 - g2) ** 2 / 4.0))
        center = -0.5j * (g1 + g2)
        points.append(SpectrumPoint(g1, (center + root, center - root)))
    eps = tuple(e for e in (g2 - 2 * j, g2 + 2 * j) if e >= 0)
    return points, eps
