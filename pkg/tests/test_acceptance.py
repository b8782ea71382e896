"""Acceptance gate: ten numbered end-to-end checks with wall-clock budgets.

Each test prints one `criterion N: PASS/FAIL [...]` line (run with
`pytest tests/test_acceptance.py -s` to see them) and then asserts.  Ensembles
are cached across criteria, so a criterion's own budget covers every ensemble
it is the first to request.  Criterion 2 is expected to fail: the noiseless
concurrence |sin 2Jt| first peaks at t = pi/(4J), so pinning a unit peak to
pi/(8J) is unattainable; the companion test checks the quarter-period anchor.
"""

import math
import time

import numpy as np
import pytest
from scipy.optimize import brentq

from nhqubits import metrics, model, photonic, trajectory
from nhqubits.model import SystemSpec
from nhqubits.trajectory import TrajectoryConfig

G1_SET = (0.5, 0.7, 1.1, 2.0)
_C4_SPEC = SystemSpec(2, 0.1, (2.0, 0.5), (0.05, 0.05))

_CACHE = {}
_PEAKS = {}


def _pair_spec(g1, gamma):
    return SystemSpec(2, 0.1, (g1, 0.5), (gamma, gamma))


def _cfg(n_traj, scheme="sse", det=False, seed=0, stride=100):
    return TrajectoryConfig(dt=1e-3, t_max=20.0, n_traj=n_traj, master_seed=seed,
                            scheme=scheme, deterministic_channel=det,
                            sample_stride=stride)


def _ensemble(spec, cfg):
    key = (spec, cfg)
    if key not in _CACHE:
        _CACHE[key] = trajectory.run_ensemble(spec, cfg)
    return _CACHE[key]


def _peak(spec, cfg):
    key = (spec, cfg)
    if key not in _PEAKS:
        _PEAKS[key] = metrics.peak_concurrence_with_error(_ensemble(spec, cfg))
    return _PEAKS[key]


class _Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.wall = time.perf_counter() - self.t0
        return False


def _report(num, ok, wall, budget, detail) -> str:
    line = (f"criterion {num}: {'PASS' if ok else 'FAIL'} "
            f"[{wall:.1f}s / budget {budget:.0f}s] {detail}")
    print(line, flush=True)
    return line


@pytest.fixture(scope="module", autouse=True)
def _warm_kernels():
    # one-time kernel compilation happens here, outside the criterion budgets
    spec = _pair_spec(1.1, 0.1)
    for scheme in ("sse", "sme"):
        trajectory.run_ensemble(
            spec, TrajectoryConfig(dt=1e-3, t_max=0.05, n_traj=2, scheme=scheme,
                                   deterministic_channel=True, sample_stride=10))


def test_criterion_01_exceptional_points():
    budget = 1.0
    with _Timer() as tm:
        spec = SystemSpec(2, 0.1, (0.0, 0.5), (0.0, 0.0))

        def disc(g1):
            points, _ = model.spectrum_scan(spec, [g1])
            lp, lm = points[0].eigenvalues
            return float(((0.5 * (lp - lm)) ** 2).real)

        lo = brentq(disc, 0.0, 0.5, xtol=1e-13)
        hi = brentq(disc, 0.5, 1.2, xtol=1e-13)
        _, eps = model.spectrum_scan(spec, [0.0])
        ok = (abs(lo - 0.3) < 1e-10 and abs(hi - 0.7) < 1e-10
              and abs(eps[0] - lo) < 1e-10 and abs(eps[1] - hi) < 1e-10)
    ok = ok and tm.wall < budget
    detail = f"discriminant zeros at {lo:.12f}, {hi:.12f}"
    assert ok, _report(1, ok, tm.wall, budget, detail)
    _report(1, ok, tm.wall, budget, detail)


@pytest.mark.xfail(strict=True, reason=(
    "the noiseless concurrence |sin 2Jt| first peaks at pi/(4J); at pi/(8J) "
    "it is sin(pi/4) ~ 0.707, so a unit peak there cannot occur"))
def test_criterion_02_bell_peak_at_the_eighth_period():
    budget = 10.0
    with _Timer() as tm:
        ens = _ensemble(_pair_spec(0.5, 0.0), _cfg(1, stride=10))
        cs = metrics.concurrence_series(ens)
        t8 = math.pi / (8 * 0.1)
        t_peak, _ = metrics.peak_concurrence(cs)
        c_at = float(np.interp(t8, cs.times, cs.values))
        ok = abs(c_at - 1.0) <= 0.002 and abs(t_peak - t8) <= 0.01 * t8
    ok = ok and tm.wall < budget
    detail = f"C({t8:.3f}) = {c_at:.3f}, peak at t = {t_peak:.3f}"
    assert ok, _report(2, ok, tm.wall, budget, detail)
    _report(2, ok, tm.wall, budget, detail)


def test_criterion_02_companion_bell_peak_at_the_quarter_period():
    budget = 10.0
    with _Timer() as tm:
        ens = _ensemble(_pair_spec(0.5, 0.0), _cfg(1, stride=10))
        cs = metrics.concurrence_series(ens)
        t4 = math.pi / (4 * 0.1)
        t_peak, c_max = metrics.peak_concurrence(cs)
        c_half = float(np.interp(t4 / 2, cs.times, cs.values))
        ok = (abs(c_max - 1.0) <= 0.002
              and abs(t_peak - t4) <= 0.01 * t4
              and abs(c_half - math.sin(math.pi / 4)) <= 0.002)
    ok = ok and tm.wall < budget
    detail = (f"peak ({t_peak:.4f}, {c_max:.4f}) vs (pi/4J = {t4:.4f}, 1); "
              f"C(pi/8J) = {c_half:.4f}")
    assert ok, _report("2 (companion)", ok, tm.wall, budget, detail)
    _report("2 (companion)", ok, tm.wall, budget, detail)


def test_criterion_03_balance_time_ordering():
    budget = 300.0
    with _Timer() as tm:
        stats = []
        for g1 in G1_SET:
            ens = _ensemble(_pair_spec(g1, 0.5), _cfg(1000))
            t, se = metrics.balance_time_with_error(ens, (1, 2))
            stats.append((t, se))
        ok = all(t is not None for t, _ in stats)
        sigmas = []
        if ok:
            for (ta, ea), (tb, eb) in zip(stats, stats[1:]):
                gap = ta - tb
                sigmas.append(gap / math.hypot(ea, eb))
            ok = all(s > 3.0 for s in sigmas)
    ok = ok and tm.wall < budget
    detail = ("t* = " + ", ".join(f"{t:.2f}" for t, _ in stats)
              + "; drop significance " + ", ".join(f"{s:.1f}sigma" for s in sigmas))
    assert ok, _report(3, ok, tm.wall, budget, detail)
    _report(3, ok, tm.wall, budget, detail)


def test_criterion_04_point_values_at_strong_asymmetry():
    budget = 600.0
    with _Timer() as tm:
        ens = _ensemble(_C4_SPEC, _cfg(1500))
        (t_peak, _), (c_max, _) = _peak(_C4_SPEC, _cfg(1500))
        fs = metrics.fidelity_series(ens)
        f_at = float(np.interp(t_peak, fs.times, fs.values))
        ok = abs(c_max - 0.88) <= 0.05 and abs(f_at - 0.94) <= 0.05
    ok = ok and tm.wall < budget
    detail = f"peak C = {c_max:.3f} (want 0.88+-0.05), F(t_peak) = {f_at:.3f} (want 0.94+-0.05)"
    assert ok, _report(4, ok, tm.wall, budget, detail)
    _report(4, ok, tm.wall, budget, detail)


def test_criterion_05_fidelity_anchor_and_recovery():
    budget = 600.0
    with _Timer() as tm:
        # Anchor at the time the fidelity target (the no-jump reference) is
        # maximally entangled; the noisy ensemble's own concurrence plateau is
        # too flat for its argmax to define a stable time.
        ens = _ensemble(_pair_spec(0.5, 0.5), _cfg(1000))
        c_ref = np.array(
            [metrics.concurrence(metrics.no_jump_reference(ens.spec, t)) for t in ens.times]
        )
        t_me, _ = metrics.peak_concurrence(metrics.ObservableSeries(ens.times, c_ref, None))
        fs = metrics.fidelity_series(ens)
        f_at = float(np.interp(t_me, fs.times, fs.values))
        # Recovery is checked at weak noise, where the broken-phase fidelity
        # returns to ~0.99; under strong noise it saturates near the bound.
        late = []
        for g1 in (1.1, 2.0):
            fs_g = metrics.fidelity_series(_ensemble(_pair_spec(g1, 0.05), _cfg(1500)))
            late.append(float(fs_g.values[fs_g.times >= 15.0].min()))
        ok = abs(f_at - 0.73) <= 0.06 and all(v >= 0.95 for v in late)
    ok = ok and tm.wall < budget
    detail = (f"F(t_me = {t_me:.2f}) = {f_at:.3f} (want 0.73+-0.06); "
              f"late-time F >= {min(late):.3f} at gamma = 0.05 (want >= 0.95)")
    assert ok, _report(5, ok, tm.wall, budget, detail)
    _report(5, ok, tm.wall, budget, detail)


def _star_gap_minimum():
    """Gamma_1 minimizing the smallest eigenvalue gap of the n=3 block."""
    best_g, best_gap = None, math.inf
    for g1 in np.arange(0.70, 0.87, 1e-4):
        spec = SystemSpec(3, 0.1, (g1, 0.5, 0.5), (0.0, 0.0, 0.0))
        blk = model.build_hamiltonian(spec)[np.ix_((4, 2, 1), (4, 2, 1))]
        ev = np.linalg.eigvals(blk)
        gap = min(abs(ev[i] - ev[j]) for i in range(3) for j in range(i + 1, 3))
        if gap < best_gap:
            best_g, best_gap = float(g1), gap
    return best_g


def test_criterion_06_balance_time_is_qubit_number_independent():
    budget = 900.0
    with _Timer() as tm:
        times = []
        for n in (2, 3, 4):
            spec = SystemSpec(n, 0.1, (2.0,) + (0.5,) * (n - 1), (0.5,) * n)
            ens = _ensemble(spec, _cfg(1500))
            subset = tuple(1 << q for q in range(n))
            times.append(metrics.balance_time(metrics.population_series(ens), subset))
        ok = all(t is not None for t in times)
        spread = (max(times) - min(times)) / np.mean(times) if ok else math.inf
        ep_formula = 0.5 + 2.0 * math.sqrt(2.0) * 0.1
        ep_scan = _star_gap_minimum()
        ok = (ok and spread <= 0.15
              and abs(ep_scan - ep_formula) / ep_formula < 0.01
              and abs(0.78 - ep_formula) / ep_formula < 0.01)
    ok = ok and tm.wall < budget
    detail = ("t* = " + ", ".join(f"{t:.2f}" for t in times)
              + f" (spread {spread:.1%}); n=3 gap minimum at {ep_scan:.4f} "
              + f"vs {ep_formula:.4f}")
    assert ok, _report(6, ok, tm.wall, budget, detail)
    _report(6, ok, tm.wall, budget, detail)


def test_criterion_07_unravelings_agree_on_populations():
    budget = 600.0
    with _Timer() as tm:
        spec = _pair_spec(1.1, 0.1)
        a = _ensemble(spec, _cfg(2000, scheme="sse", det=True))
        b = _ensemble(spec, _cfg(2000, scheme="sme", det=True))
        diff = np.abs(a.pop_mean - b.pop_mean)
        bound = 3.0 * np.sqrt(a.pop_stderr**2 + b.pop_stderr**2) + 1e-12
        worst = float((diff / bound).max())
        ok = worst <= 1.0
    ok = ok and tm.wall < budget
    detail = f"max |SSE - SME| = {worst:.2f} x the 3-sigma bound over all times/states"
    assert ok, _report(7, ok, tm.wall, budget, detail)
    _report(7, ok, tm.wall, budget, detail)


def test_criterion_08_weak_dissipation_beats_the_strong_asymmetry_peak():
    budget = 600.0
    with _Timer() as tm:
        (t_ref, t_ref_se), (c_ref, c_ref_se) = _peak(_C4_SPEC, _cfg(1500))
        ok = True
        details = []
        for j in (0.4, 0.5):
            spec = SystemSpec(2, j, (0.1, 0.5), (0.2, 0.2))
            (tp, tse), (cp, cse) = _peak(spec, _cfg(1500, scheme="sme", det=True))
            c_sig = (cp - c_ref) / math.hypot(cse, c_ref_se)
            t_sig = (tp - t_ref) / math.hypot(tse, t_ref_se)
            ok = ok and c_sig > 3.0 and t_sig > 3.0
            details.append(f"J={j}: C {cp:.3f}>{c_ref:.3f} ({c_sig:.1f}sigma), "
                           f"t {tp:.2f}>{t_ref:.2f} ({t_sig:.1f}sigma)")
    ok = ok and tm.wall < budget
    detail = "; ".join(details)
    assert ok, _report(8, ok, tm.wall, budget, detail)
    _report(8, ok, tm.wall, budget, detail)


def test_criterion_09_photonic_factorization_residuals():
    budget = 60.0
    with _Timer() as tm:
        worst_block = 0.0
        for g1 in np.arange(0.1, 2.51, 0.2):
            for tau in np.arange(0.5, 10.01, 0.5):
                spec = SystemSpec(2, 0.1, (float(g1), 0.5), (0.0, 0.0))
                worst_block = max(worst_block, photonic.ksp_factor(spec, float(tau)).residual)
        rng = np.random.default_rng(2024)
        worst_fit = 0.0
        for _ in range(500):
            a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
            a *= rng.uniform(0.2, 0.99) / np.linalg.svd(a, compute_uv=False)[0]
            worst_fit = max(worst_fit, photonic.waveplate_fit(a).residual)
        ok = worst_block < 1e-6 and worst_fit < 1e-8
    ok = ok and tm.wall < budget
    detail = f"max block residual {worst_block:.2e}; max recomposition residual {worst_fit:.2e}"
    assert ok, _report(9, ok, tm.wall, budget, detail)
    _report(9, ok, tm.wall, budget, detail)


def test_criterion_10_metric_cross_checks():
    budget = 30.0
    with _Timer() as tm:
        rng = np.random.default_rng(7)
        worst_c = 0.0
        for k in range(1000):
            rank = 4 if k % 2 else int(rng.integers(1, 5))
            a = rng.normal(size=(4, rank)) + 1j * rng.normal(size=(4, rank))
            rho = a @ a.conj().T
            rho /= np.trace(rho).real
            tilde = metrics.SPIN_FLIP @ rho.conj() @ metrics.SPIN_FLIP
            ev = np.clip(np.linalg.eigvals(rho @ tilde).real, 0.0, None)
            # flush zero-mode rounding junk, same floor as the library sqrt
            ev[ev < 4096.0 * np.finfo(np.float64).eps * ev.max()] = 0.0
            taus = np.sort(np.sqrt(ev))[::-1]
            alt = max(0.0, taus[0] - taus[1] - taus[2] - taus[3])
            worst_c = max(worst_c, abs(metrics.concurrence(rho) - alt))
        worst_f = 0.0
        for _ in range(500):
            u = rng.normal(size=4) + 1j * rng.normal(size=4)
            v = rng.normal(size=4) + 1j * rng.normal(size=4)
            u, v = u / np.linalg.norm(u), v / np.linalg.norm(v)
            f = metrics.uhlmann_fidelity(np.outer(u, u.conj()), np.outer(v, v.conj()))
            worst_f = max(worst_f, abs(f - abs(np.vdot(u, v)) ** 2))
        ok = worst_c < 1e-8 and worst_f < 1e-9
    ok = ok and tm.wall < budget
    detail = f"concurrence route gap {worst_c:.2e}; fidelity vs overlap gap {worst_f:.2e}"
    assert ok, _report(10, ok, tm.wall, budget, detail)
    _report(10, ok, tm.wall, budget, detail)
