"""Compile the two-qubit non-unitary evolution onto a wave-plate network.

The network is U = K.S.P with S = T.M.T.  P, K, T are fixed gates on the four
photon modes (spatial rail x polarization); M carries the single-excitation
block on rail 0 as a QWP-HWP-QWP / loss-plate / QWP-HWP-QWP sandwich, fitted
numerically.  All matrix comparisons are modulo a global phase.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import linalg, model, trajectory

P_GATE = np.array([
    [-1, 0, 0, 0],
    [0, 1, 0, 0],
    [0, 0, 0, 1],
    [0, 0, 1, 0]], dtype=np.complex128)

K_GATE = np.array([
    [0, 1, 0, 0],
    [1, 0, 0, 0],
    [0, 0, 1, 0],
    [0, 0, 0, -1]], dtype=np.complex128)

T_GATE = np.array([
    [0, 1, 0, 0],
    [0, 0, 0, 1],
    [1, 0, 0, 0],
    [0, 0, 1, 0]], dtype=np.complex128)

# computational basis state j enters network input port INPUT_PORT[j];
# outputs are read in port order
INPUT_PORT = (0, 2, 1, 3)

BLOCK = (1, 2)  # single-excitation basis indices |01>, |10>

ELEMENT_KINDS = ("QWP", "HWP", "BD", "LOSS")

FORMAT_VERSION = 1


class NotPhysicalError(ValueError):
    """Requested transfer matrix amplifies; passive plates cannot realize it."""


class FitFailureError(RuntimeError):
    def __init__(self, message, step_index=None):
        super().__init__(message)
        self.step_index = step_index


class FactorizationError(RuntimeError):
    """Network product disagrees with the target beyond tolerance."""

    def __init__(self, message, network=None, target=None, step_index=None):
        super().__init__(message)
        self.network = network
        self.target = target
        self.step_index = step_index


def wrap_angle(deg: float) -> float:
    """Reduce a plate angle to [-90, 90) degrees (all plates have period 180)."""
    return (float(deg) + 90.0) % 180.0 - 90.0


def qwp(theta: float) -> np.ndarray:
    """Quarter-wave plate at angle theta (degrees)."""
    t = math.radians(theta)
    c, s = math.cos(t), math.sin(t)
    return np.array([
        [c * c + 1j * s * s, (1 - 1j) * c * s],
        [(1 - 1j) * c * s, 1j * c * c + s * s]])


def hwp(phi: float) -> np.ndarray:
    """Half-wave plate at angle phi (degrees)."""
    t = 2.0 * math.radians(phi)
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, s], [s, -c]], dtype=np.complex128)


def loss_plate(theta_v: float, theta_h: float) -> np.ndarray:
    """Polarization-dependent loss: antidiagonal (sin 2theta_V, sin 2theta_H)."""
    return np.array([
        [0.0, math.sin(2.0 * math.radians(theta_v))],
        [math.sin(2.0 * math.radians(theta_h)), 0.0]], dtype=np.complex128)


def rot_plate(theta: float, phi: float, alpha: float) -> np.ndarray:
    """QWP(theta) . HWP(phi) . QWP(alpha) -- covers SU(2) up to a phase."""
    return qwp(theta) @ hwp(phi) @ qwp(alpha)


# --- noisy generator and Trotter product -----------------------------------

def hxi_matrix(spec, xi) -> np.ndarray:
    """Non-Hermitian generator at one white-noise sample xi (per channel).

    H_xi = H + (i/2) sum_j L_j^2 - i sum_j xi_j L_j with the diagonal jump
    operators; only the imaginary diagonal shifts with xi.
    """
    if spec.n_qubits != 2:
        raise ValueError("the photonic network encodes exactly two qubits")
    ld = model.jump_diagonals(spec)
    xi = np.asarray(xi, dtype=np.float64)
    if xi.shape != (ld.shape[0],):
        raise ValueError(f"xi needs shape ({ld.shape[0]},), got {xi.shape}")
    shift = 0.5j * (ld * ld).sum(axis=0) - 1j * (xi @ ld)
    return model.build_hamiltonian(spec) + np.diag(shift)


def trotter_product(spec, noise, tau: float, n_steps: int) -> np.ndarray:
    """Midpoint-sampled product of short-time propagators over [0, tau].

    noise: None (zero samples), an (n_steps, n_channels) array, or a callable
    t -> per-channel samples.  Factors multiply right-to-left in time order.
    """
    if not (tau > 0):
        raise ValueError(f"tau must be positive, got {tau}")
    if int(n_steps) != n_steps or n_steps < 1:
        raise ValueError(f"n_steps must be a positive integer, got {n_steps}")
    n_steps = int(n_steps)
    dt = tau / n_steps
    n_ch = spec.n_qubits
    if noise is None:
        samples = np.zeros((n_steps, n_ch))
    elif callable(noise):
        samples = np.array([noise((k + 0.5) * dt) for k in range(n_steps)], dtype=np.float64)
        samples = samples.reshape(n_steps, n_ch)
    else:
        samples = np.asarray(noise, dtype=np.float64)
        if samples.shape != (n_steps, n_ch):
            raise ValueError(f"noise needs shape ({n_steps}, {n_ch}), got {samples.shape}")
    u = np.eye(spec.dim, dtype=np.complex128)
    for k in range(n_steps):
        u = linalg.mat_exp(-1j * hxi_matrix(spec, samples[k]) * dt) @ u
    return u


# --- K.S.P factorization -----------------------------------------------------

def _block(a: np.ndarray) -> np.ndarray:
    return a[np.ix_(BLOCK, BLOCK)]


def _network(m: np.ndarray) -> np.ndarray:
    """Full network product with input ports relabeled to basis order."""
    full = K_GATE @ T_GATE @ m @ T_GATE @ P_GATE
    return full[:, INPUT_PORT]


def _phase_aligned_residual(candidate, target) -> float:
    """Frobenius distance minimized over a unit-modulus global factor."""
    candidate = np.asarray(candidate)
    target = np.asarray(target)
    i, j = np.unravel_index(np.argmax(np.abs(target)), target.shape)
    if abs(target[i, j]) < 1e-300:
        return float(np.linalg.norm(candidate - target))
    ratio = candidate[i, j] / target[i, j]
    phase = ratio / abs(ratio) if abs(ratio) > 0 else 1.0
    return float(np.linalg.norm(candidate - phase * target))


@dataclass
class KSPFactors:
    k: np.ndarray
    p: np.ndarray
    t: np.ndarray
    m: np.ndarray
    network: np.ndarray  # relabeled product K.T.M.T.P
    target: np.ndarray
    residual: float      # Frobenius, restricted to the single-excitation block


def _v_matrix(rate_sum: float, tau: float) -> np.ndarray:
    return -np.array([[0.0, 1.0], [math.exp(-rate_sum * tau), 0.0]], dtype=np.complex128)


def ksp_factor(spec, tau: float, v_as_identity: bool = False, tol: float = 1e-6) -> KSPFactors:
    """Factor exp(-iHtau) into the fixed-gate network for noiseless rates."""
    if spec.n_qubits != 2:
        raise ValueError("the photonic network encodes exactly two qubits")
    if any(g != 0 for g in spec.gamma):
        raise ValueError("ksp_factor handles the deterministic case only (gamma = 0)")
    if not (tau > 0):
        raise ValueError(f"tau must be positive, got {tau}")
    g1, g2 = spec.Gamma
    ul = linalg.mat_exp(-1j * model.effective_block(spec) * tau)
    v = np.eye(2, dtype=np.complex128) if v_as_identity else _v_matrix(g1 + g2, tau)
    m = np.zeros((4, 4), dtype=np.complex128)
    m[:2, :2] = ul
    m[2:, 2:] = v
    network = _network(m)
    target = linalg.mat_exp(-1j * model.build_hamiltonian(spec) * tau)
    residual = float(np.linalg.norm(_block(network) - _block(target)))
    if residual > tol:
        raise FactorizationError(
            f"single-excitation residual {residual:.3e} exceeds {tol:.1e}",
            network=network, target=target)
    return KSPFactors(K_GATE.copy(), P_GATE.copy(), T_GATE.copy(), m, network, target, residual)


# --- wave-plate fitting -------------------------------------------------------

_START_LATTICE = [np.array(p) for p in itertools.product((0.0, math.pi / 2), repeat=3)]


def _fit_rotation(w: np.ndarray):
    """Angles (deg) of a QWP-HWP-QWP triple matching unitary w up to phase.

    Multi-start simplex descent of the squared Frobenius distance at the
    optimal global phase, evaluated as a direct difference (the equivalent
    4 - 2|tr| form cannot resolve residuals below ~1e-8 in doubles).  The
    cost is hand-rolled scalar 2x2 algebra; the caller re-verifies the
    result against the plate matrices proper.
    """
    w00, w01 = complex(w[0, 0]), complex(w[0, 1])
    w10, w11 = complex(w[1, 0]), complex(w[1, 1])

    def cost(x):
        ct, st = math.cos(x[0]), math.sin(x[0])
        c2, s2 = math.cos(2.0 * x[1]), math.sin(2.0 * x[1])
        ca, sa = math.cos(x[2]), math.sin(x[2])
        q0 = ct * ct + 1j * st * st
        q1 = (1 - 1j) * ct * st
        q3 = 1j * ct * ct + st * st
        r0 = ca * ca + 1j * sa * sa
        r1 = (1 - 1j) * ca * sa
        r3 = 1j * ca * ca + sa * sa
        a00 = q0 * c2 + q1 * s2
        a01 = q0 * s2 - q1 * c2
        a10 = q1 * c2 + q3 * s2
        a11 = q1 * s2 - q3 * c2
        m00 = a00 * r0 + a01 * r1
        m01 = a00 * r1 + a01 * r3
        m10 = a10 * r0 + a11 * r1
        m11 = a10 * r1 + a11 * r3
        ip = (w00.conjugate() * m00 + w01.conjugate() * m01
              + w10.conjugate() * m10 + w11.conjugate() * m11)
        aip = abs(ip)
        if aip < 1e-300:
            return 4.0
        ph = ip / aip
        d00 = m00 - ph * w00
        d01 = m01 - ph * w01
        d10 = m10 - ph * w10
        d11 = m11 - ph * w11
        return (d00.real * d00.real + d00.imag * d00.imag
                + d01.real * d01.real + d01.imag * d01.imag
                + d10.real * d10.real + d10.imag * d10.imag
                + d11.real * d11.real + d11.imag * d11.imag)

    best = None
    for start in _START_LATTICE:
        res = minimize(cost, start, method="Nelder-Mead",
                       options={"xatol": 1e-12, "fatol": 1e-26, "maxiter": 2000})
        if best is None or res.fun < best.fun:
            best = res
        if best.fun < 1e-22:
            break
    angles = tuple(wrap_angle(math.degrees(a)) for a in best.x)
    return angles, math.sqrt(max(best.fun, 0.0))


@dataclass
class WavePlateFit:
    theta1: float
    phi1: float
    alpha1: float
    theta_v: float
    theta_h: float
    theta2: float
    phi2: float
    alpha2: float
    residual: float

    def recompose(self) -> np.ndarray:
        return (rot_plate(self.theta2, self.phi2, self.alpha2)
                @ loss_plate(self.theta_v, self.theta_h)
                @ rot_plate(self.theta1, self.phi1, self.alpha1))


_SWAP2 = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=np.complex128)


def waveplate_fit(m2, tol: float = 1e-8) -> WavePlateFit:
    """Decompose a 2x2 contraction as R2 . L(theta_V, theta_H) . R1.

    SVD route: m2 = u diag(s) v^dag with L = diag(s) swapped onto the
    antidiagonal and the swap absorbed into R1; each rotation factor is fitted
    up to a global phase.
    """
    m2 = np.asarray(m2, dtype=np.complex128)
    if m2.shape != (2, 2):
        raise ValueError(f"expected a 2x2 matrix, got shape {m2.shape}")
    u, s, v = linalg.svd_2x2(m2)
    if s[0] > 1 + 1e-9:
        raise NotPhysicalError(
            f"singular value {s[0]:.6g} exceeds 1; passive plates cannot amplify")
    s = np.minimum(s, 1.0)
    theta_v = math.degrees(math.asin(s[0])) / 2.0
    theta_h = math.degrees(math.asin(s[1])) / 2.0
    a2, res2 = _fit_rotation(u)
    a1, res1 = _fit_rotation(_SWAP2 @ v.conj().T)
    if max(res1, res2) > tol:
        raise FitFailureError(
            f"rotation fit residual {max(res1, res2):.3e} exceeds {tol:.1e}")
    fit = WavePlateFit(a1[0], a1[1], a1[2], theta_v, theta_h,
                       a2[0], a2[1], a2[2], 0.0)
    fit.residual = _phase_aligned_residual(fit.recompose(), m2)
    if fit.residual > tol:
        raise FitFailureError(
            f"recomposition residual {fit.residual:.3e} exceeds {tol:.1e}")
    return fit


# --- program emission ---------------------------------------------------------

@dataclass
class OpticalElement:
    kind: str
    rail: int            # 0 / 1 spatial rail; -1 spans both (BD)
    order: int           # position along the step, significant
    angles: tuple = ()

    def __post_init__(self):
        if self.kind not in ELEMENT_KINDS:
            raise ValueError(f"kind must be one of {ELEMENT_KINDS}, got {self.kind!r}")
        n_expected = {"QWP": 1, "HWP": 1, "BD": 0, "LOSS": 2}[self.kind]
        self.angles = tuple(float(a) for a in self.angles)
        if len(self.angles) != n_expected:
            raise ValueError(f"{self.kind} takes {n_expected} angle(s), got {len(self.angles)}")
        if any(not (-90.0 <= a <= 90.0) for a in self.angles):
            raise ValueError(f"angles must lie in [-90, 90], got {self.angles}")


@dataclass
class ProgramStep:
    index: int           # 1-based
    xi: tuple            # per-channel noise sample at the midpoint
    elements: list
    residual: float      # phase-aligned block residual of the recomposed step


@dataclass
class WavePlateProgram:
    spec: object
    tau: float
    n_steps: int
    seed: int
    v_mode: str          # "identity" or "loss"
    steps: list = field(default_factory=list)

    def residuals(self):
        return [s.residual for s in self.steps]

    def render(self) -> str:
        s = self.spec
        lines = [
            f"waveplate-program format_version={FORMAT_VERSION}",
            f"tau={self.tau:.12g} n_steps={self.n_steps} seed={self.seed} v_mode={self.v_mode}",
            "system n_qubits={} topology={} J={:.12g} Gamma={} gamma={}".format(
                s.n_qubits, s.topology, s.J,
                ",".join(f"{g:.12g}" for g in s.Gamma),
                ",".join(f"{g:.12g}" for g in s.gamma)),
        ]
        for st in self.steps:
            xi = ",".join(f"{x:.12g}" for x in st.xi)
            lines.append(f"step index={st.index} residual={st.residual:.6e} xi={xi}")
            for el in st.elements:
                ang = ",".join(f"{a:.12g}" for a in el.angles)
                lines.append(f"  {el.kind} rail={el.rail} order={el.order} angles={ang}")
        return "\n".join(lines) + "\n"

    def write(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.render())


def _step_elements(fit: WavePlateFit, v_loss_angle=None) -> list:
    """Physical element list for one step, in photon traversal order."""
    els = []

    def add(kind, rail, *angles):
        els.append(OpticalElement(kind, rail, len(els), tuple(angles)))

    # P: half-wave plates on both rails
    add("HWP", 0, -90.0)
    add("HWP", 1, 45.0)
    # T: rail swap via displacers around half-wave plates
    add("BD", -1)
    add("HWP", 0, 45.0)
    add("HWP", 1, 45.0)
    add("BD", -1)
    # single-excitation block on rail 0: R1, loss, R2
    add("QWP", 0, fit.alpha1)
    add("HWP", 0, fit.phi1)
    add("QWP", 0, fit.theta1)
    add("LOSS", 0, fit.theta_v, fit.theta_h)
    add("QWP", 0, fit.alpha2)
    add("HWP", 0, fit.phi2)
    add("QWP", 0, fit.theta2)
    if v_loss_angle is not None:
        add("LOSS", 1, 45.0, v_loss_angle)
    # T again
    add("BD", -1)
    add("HWP", 0, 45.0)
    add("HWP", 1, 45.0)
    add("BD", -1)
    # K
    add("HWP", 0, 45.0)
    add("HWP", 1, 0.0)
    return els


def emit_program(spec, tau: float, n_steps: int, seed: int = 0,
                 v_as_loss: bool = False, fit_tol: float = 1e-8,
                 step_tol: float = 1e-6) -> WavePlateProgram:
    """Fit one network per Trotter step of a seeded noise realization.

    The noise samples are the Wiener increments of trajectory 0 under `seed`,
    divided by the step length.  Any step whose plates cannot be fitted aborts
    with that step's index attached.
    """
    if spec.n_qubits != 2:
        raise ValueError("the photonic network encodes exactly two qubits")
    if not (tau > 0):
        raise ValueError(f"tau must be positive, got {tau}")
    if int(n_steps) != n_steps or n_steps < 1:
        raise ValueError(f"n_steps must be a positive integer, got {n_steps}")
    n_steps = int(n_steps)
    dt = tau / n_steps
    path = trajectory.wiener_path(seed, 0, spec.n_qubits, n_steps, dt)
    xi = path.increments / dt
    program = WavePlateProgram(spec, tau, n_steps, seed,
                               "loss" if v_as_loss else "identity")
    for k in range(n_steps):
        target = linalg.mat_exp(-1j * hxi_matrix(spec, xi[k]) * dt)
        # block-diagonal propagator: read the factors straight off the target
        ul = target[np.ix_((2, 1), (2, 1))]
        try:
            fit = waveplate_fit(ul, tol=fit_tol)
        except (NotPhysicalError, FitFailureError) as exc:
            raise FitFailureError(f"step {k + 1}: {exc}", step_index=k + 1) from exc
        if v_as_loss:
            s_v = target[3, 3].real  # exp(-(rate sum) dt)
            if s_v > 1 + 1e-9:
                raise FitFailureError(
                    f"step {k + 1}: V entry {s_v:.6g} exceeds 1", step_index=k + 1)
            v_loss_angle = math.degrees(math.asin(min(s_v, 1.0))) / 2.0
            v = loss_plate(45.0, v_loss_angle)
        else:
            v_loss_angle = None
            v = np.eye(2, dtype=np.complex128)
        m = np.zeros((4, 4), dtype=np.complex128)
        m[:2, :2] = fit.recompose()
        m[2:, 2:] = v
        network = _network(m)
        residual = _phase_aligned_residual(_block(network), _block(target))
        if residual > step_tol:
            raise FactorizationError(
                f"step {k + 1}: block residual {residual:.3e} exceeds {step_tol:.1e}",
                network=network, target=target, step_index=k + 1)
        program.steps.append(ProgramStep(k + 1, tuple(xi[k]), _step_elements(fit, v_loss_angle), residual))
    return program
