"""Recipe execution: run a parsed config end to end and emit CSV / program files.

Also hosts the bundled figure recipes (fixed parameter sets from the study
this package reproduces), keyed by short names for `simulate recipe`.
"""

import os
import time
from dataclasses import dataclass, replace

import numpy as np

from . import metrics, model, photonic, trajectory
from .config import ExperimentConfig
from .model import SystemSpec
from .trajectory import TrajectoryConfig


def _fmt(x) -> str:
    return f"{float(x):.12g}"


def _ensure_parent(path):
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)


def write_csv(path, header, rows):
    _ensure_parent(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def vary_spec(spec: SystemSpec, parameter: str, value: float) -> SystemSpec:
    if parameter == "Gamma1":
        return replace(spec, Gamma=(float(value),) + spec.Gamma[1:])
    if parameter == "J":
        return replace(spec, J=float(value))
    raise ValueError(f"unknown sweep parameter {parameter!r}")


def _sweep_items(cfg: ExperimentConfig):
    if cfg.sweep_parameter is None:
        return [(None, cfg.spec)]
    return [(v, vary_spec(cfg.spec, cfg.sweep_parameter, v)) for v in cfg.sweep_values]


@dataclass
class RunReport:
    recipe: str
    n_traj: int
    wall_time: float
    paths: list


def execute(cfg: ExperimentConfig, workers=None) -> RunReport:
    t0 = time.perf_counter()
    paths = []
    n_traj = 0

    if cfg.recipe == "spectrum":
        n = int(round((cfg.spectrum_stop - cfg.spectrum_start) / cfg.spectrum_step)) + 1
        grid = cfg.spectrum_start + cfg.spectrum_step * np.arange(n)
        points, _ = model.spectrum_scan(cfg.spec, grid)
        rows = [(p.gamma1,
                 p.eigenvalues[0].real, p.eigenvalues[0].imag,
                 p.eigenvalues[1].real, p.eigenvalues[1].imag) for p in points]
        path = f"{cfg.prefix}-spectrum.csv"
        write_csv(path, ("gamma1", "re_lambda_plus", "im_lambda_plus",
                         "re_lambda_minus", "im_lambda_minus"), rows)
        paths.append(path)

    elif cfg.recipe == "compile-photonic":
        program = photonic.emit_program(
            cfg.spec, cfg.photonic_tau, cfg.photonic_steps,
            seed=cfg.run.master_seed, v_as_loss=cfg.photonic_v_as_loss)
        path = f"{cfg.prefix}-program.txt"
        _ensure_parent(path)
        program.write(path)
        paths.append(path)

    else:
        header, rows = None, []
        sweep_col = [cfg.sweep_parameter] if cfg.sweep_parameter else []
        for value, spec in _sweep_items(cfg):
            ens = trajectory.run_ensemble(spec, cfg.run, workers=workers)
            n_traj += ens.n_ok + ens.n_failed
            lead = () if value is None else (value,)
            if cfg.recipe == "populations":
                labels = [model.basis_label(i, spec.n_qubits) for i in range(spec.dim)]
                header = (sweep_col + ["time"]
                          + [f"pop_{lb}" for lb in labels]
                          + [f"stderr_{lb}" for lb in labels])
                series = metrics.population_series(ens)
                for i, t in enumerate(series.times):
                    rows.append(lead + (t,) + tuple(series.values[i]) + tuple(series.stderr[i]))
            elif cfg.recipe == "concurrence":
                header = sweep_col + ["time", "concurrence", "stderr"]
                series = metrics.concurrence_series(ens)
                for t, v, e in zip(series.times, series.values, series.stderr):
                    rows.append(lead + (t, v, e))
            elif cfg.recipe == "concurrence-map":
                header = ["gamma1", "time", "concurrence"]
                series = metrics.concurrence_series(ens)
                for t, v in zip(series.times, series.values):
                    rows.append((value, t, v))
            elif cfg.recipe == "fidelity":
                header = sweep_col + ["time", "fidelity", "stderr"]
                series = metrics.fidelity_series(ens)
                for t, v, e in zip(series.times, series.values, series.stderr):
                    rows.append(lead + (t, v, e))
            else:
                raise ValueError(f"unknown recipe {cfg.recipe!r}")
        path = f"{cfg.prefix}-{cfg.recipe}.csv"
        write_csv(path, header, rows)
        paths.append(path)

    return RunReport(cfg.recipe, n_traj, time.perf_counter() - t0, paths)


# --- bundled figure recipes --------------------------------------------------

_SWEEP_G1 = (0.5, 0.7, 1.1, 2.0)
_SWEEP_G1_STAR = (0.5, 0.78, 1.1, 2.0)


def _pair(gamma1=0.5, gamma=0.5, J=0.1):
    return SystemSpec(2, J, (gamma1, 0.5), (gamma, gamma))


def _star(n, gamma=0.5):
    return SystemSpec(n, 0.1, (0.5,) * n, (gamma,) * n)


def _recipes():
    return {
        "spectrum": lambda: ExperimentConfig(
            spec=SystemSpec(2, 0.1, (0.0, 0.5), (0.0, 0.0)),
            run=TrajectoryConfig(), recipe="spectrum"),
        "fig2": lambda: ExperimentConfig(
            spec=_pair(), run=TrajectoryConfig(n_traj=1000), recipe="populations",
            sweep_parameter="Gamma1", sweep_values=_SWEEP_G1),
        "fig3": lambda: ExperimentConfig(
            spec=_pair(), run=TrajectoryConfig(n_traj=1500), recipe="concurrence",
            sweep_parameter="Gamma1", sweep_values=_SWEEP_G1),
        "fig4": lambda: ExperimentConfig(
            spec=_pair(gamma=0.05), run=TrajectoryConfig(n_traj=500),
            recipe="concurrence-map", sweep_parameter="Gamma1",
            sweep_values=tuple(round(0.1 * k, 10) for k in range(1, 26))),
        "fig5": lambda: ExperimentConfig(
            spec=_pair(), run=TrajectoryConfig(n_traj=1000), recipe="fidelity",
            sweep_parameter="Gamma1", sweep_values=_SWEEP_G1),
        "fig7": lambda: ExperimentConfig(
            spec=_star(3), run=TrajectoryConfig(n_traj=1500), recipe="populations",
            sweep_parameter="Gamma1", sweep_values=_SWEEP_G1_STAR),
        "fig8": lambda: ExperimentConfig(
            spec=_star(3), run=TrajectoryConfig(n_traj=1500), recipe="fidelity",
            sweep_parameter="Gamma1", sweep_values=(0.5, 0.78, 1.5, 2.5)),
        "fig9": lambda: ExperimentConfig(
            spec=_star(4), run=TrajectoryConfig(n_traj=1500), recipe="populations",
            sweep_parameter="Gamma1", sweep_values=_SWEEP_G1_STAR),
        "fig10": lambda: ExperimentConfig(
            spec=_pair(), recipe="concurrence",
            run=TrajectoryConfig(n_traj=1500, scheme="sme", deterministic_channel=True),
            sweep_parameter="Gamma1", sweep_values=_SWEEP_G1),
        "fig11": lambda: ExperimentConfig(
            spec=_pair(gamma1=0.1, gamma=0.2, J=0.4), recipe="concurrence",
            run=TrajectoryConfig(n_traj=1500, scheme="sme", deterministic_channel=True),
            sweep_parameter="J", sweep_values=(0.4, 0.5)),
        "compile-photonic": lambda: ExperimentConfig(
            spec=_pair(gamma1=1.1, gamma=0.01), run=TrajectoryConfig(),
            recipe="compile-photonic", photonic_tau=5.0, photonic_steps=10),
    }


RECIPE_NAMES = tuple(_recipes())


def figure_recipe(name: str) -> ExperimentConfig:
    """Fresh config for a bundled recipe; raises KeyError on unknown names."""
    try:
        factory = _recipes()[name]
    except KeyError:
        raise KeyError(
            f"unknown recipe {name!r}; available: {', '.join(RECIPE_NAMES)}") from None
    return factory()
