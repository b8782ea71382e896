"""INI experiment configs: strict parsing, defaults echo, unknown keys rejected."""

import configparser
from dataclasses import dataclass

from .model import SystemSpec, TOPOLOGIES
from .trajectory import TrajectoryConfig, SCHEMES

RECIPES = ("spectrum", "populations", "concurrence", "concurrence-map",
           "fidelity", "compile-photonic")

_SECTION_KEYS = {
    "system": {"n_qubits", "J", "Gamma", "gamma", "topology"},
    "run": {"dt", "t_max", "n_traj", "master_seed", "scheme",
            "deterministic_channel", "sample_stride"},
    "recipe": {"name"},
    "sweep": {"parameter", "values"},
    "output": {"prefix"},
    "photonic": {"tau", "n_steps", "v_as_loss"},
    "spectrum": {"start", "stop", "step"},
}

SWEEP_PARAMETERS = ("Gamma1", "J")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    spec: SystemSpec
    run: TrajectoryConfig
    recipe: str
    sweep_parameter: str = None
    sweep_values: tuple = ()
    prefix: str = "out"
    photonic_tau: float = 1.0
    photonic_steps: int = 10
    photonic_v_as_loss: bool = False
    spectrum_start: float = 0.0
    spectrum_stop: float = 1.2
    spectrum_step: float = 0.01


def _float(section, key, raw):
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected a number, got {raw!r}") from None


def _int(section, key, raw):
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected an integer, got {raw!r}") from None


def _bool(section, key, raw):
    low = raw.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"[{section}] {key}: expected a boolean, got {raw!r}")


def _float_list(section, key, raw):
    parts = [p for chunk in raw.split(",") for p in chunk.split()]
    if not parts:
        raise ConfigError(f"[{section}] {key}: empty value list")
    return tuple(_float(section, key, p) for p in parts)


def parse_config(text: str, origin: str = "<config>") -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # Gamma and gamma are distinct keys
    try:
        parser.read_string(text, source=origin)
    except configparser.Error as exc:
        raise ConfigError(f"{origin}: {exc}") from exc

    for section in parser.sections():
        if section not in _SECTION_KEYS:
            raise ConfigError(f"unknown section [{section}]")
        extra = set(parser[section]) - _SECTION_KEYS[section]
        if extra:
            raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(sorted(extra))}")

    if "system" not in parser:
        raise ConfigError("missing required section [system]")
    if "recipe" not in parser or "name" not in parser["recipe"]:
        raise ConfigError("missing required key: [recipe] name")

    recipe = parser["recipe"]["name"].strip()
    if recipe not in RECIPES:
        raise ConfigError(f"[recipe] name must be one of {RECIPES}, got {recipe!r}")

    sys_sec = parser["system"]
    for key in ("n_qubits", "J", "Gamma", "gamma"):
        if key not in sys_sec:
            raise ConfigError(f"missing required key: [system] {key}")
    try:
        spec = SystemSpec(
            n_qubits=_int("system", "n_qubits", sys_sec["n_qubits"]),
            J=_float("system", "J", sys_sec["J"]),
            Gamma=_float_list("system", "Gamma", sys_sec["Gamma"]),
            gamma=_float_list("system", "gamma", sys_sec["gamma"]),
            topology=sys_sec.get("topology", None),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"[system]: {exc}") from exc

    run_kwargs = {}
    if "run" in parser:
        run_sec = parser["run"]
        for key in ("dt", "t_max"):
            if key in run_sec:
                run_kwargs[key] = _float("run", key, run_sec[key])
        for key in ("n_traj", "master_seed", "sample_stride"):
            if key in run_sec:
                run_kwargs[key] = _int("run", key, run_sec[key])
        if "scheme" in run_sec:
            run_kwargs["scheme"] = run_sec["scheme"].strip()
        if "deterministic_channel" in run_sec:
            run_kwargs["deterministic_channel"] = _bool(
                "run", "deterministic_channel", run_sec["deterministic_channel"])
    try:
        run = TrajectoryConfig(**run_kwargs)
    except ValueError as exc:
        raise ConfigError(f"[run]: {exc}") from exc

    cfg = ExperimentConfig(spec=spec, run=run, recipe=recipe)

    if "sweep" in parser:
        sweep_sec = parser["sweep"]
        for key in ("parameter", "values"):
            if key not in sweep_sec:
                raise ConfigError(f"missing required key: [sweep] {key}")
        param = sweep_sec["parameter"].strip()
        if param not in SWEEP_PARAMETERS:
            raise ConfigError(
                f"[sweep] parameter must be one of {SWEEP_PARAMETERS}, got {param!r}")
        cfg.sweep_parameter = param
        cfg.sweep_values = _float_list("sweep", "values", sweep_sec["values"])

    if "output" in parser and "prefix" in parser["output"]:
        cfg.prefix = parser["output"]["prefix"].strip()

    if "photonic" in parser:
        ph = parser["photonic"]
        if "tau" in ph:
            cfg.photonic_tau = _float("photonic", "tau", ph["tau"])
        if "n_steps" in ph:
            cfg.photonic_steps = _int("photonic", "n_steps", ph["n_steps"])
        if "v_as_loss" in ph:
            cfg.photonic_v_as_loss = _bool("photonic", "v_as_loss", ph["v_as_loss"])
        if cfg.photonic_tau <= 0:
            raise ConfigError("[photonic] tau must be positive")
        if cfg.photonic_steps < 1:
            raise ConfigError("[photonic] n_steps must be >= 1")

    if "spectrum" in parser:
        sp = parser["spectrum"]
        if "start" in sp:
            cfg.spectrum_start = _float("spectrum", "start", sp["start"])
        if "stop" in sp:
            cfg.spectrum_stop = _float("spectrum", "stop", sp["stop"])
        if "step" in sp:
            cfg.spectrum_step = _float("spectrum", "step", sp["step"])
        if cfg.spectrum_step <= 0:
            raise ConfigError("[spectrum] step must be positive")
        if cfg.spectrum_stop < cfg.spectrum_start:
            raise ConfigError("[spectrum] stop must be >= start")
        if cfg.spectrum_start < 0:
            raise ConfigError("[spectrum] start must be >= 0")

    _validate_recipe(cfg)
    return cfg


def _validate_recipe(cfg: ExperimentConfig):
    # recipe-specific requirements, checked before any computation
    if cfg.recipe == "spectrum" and cfg.spec.n_qubits != 2:
        raise ConfigError("spectrum recipe requires n_qubits = 2")
    if cfg.recipe == "concurrence-map":
        if cfg.sweep_parameter != "Gamma1":
            raise ConfigError("concurrence-map requires a [sweep] block over Gamma1")
    if cfg.recipe in ("concurrence", "concurrence-map") and cfg.spec.n_qubits != 2:
        raise ConfigError(f"{cfg.recipe} recipe requires n_qubits = 2")
    if cfg.recipe == "compile-photonic" and cfg.spec.n_qubits != 2:
        raise ConfigError("compile-photonic recipe requires n_qubits = 2")


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, origin=str(path))


def resolved_parameters(cfg: ExperimentConfig) -> dict:
    """Every effective parameter, defaults included, for the validate echo."""
    out = {
        "recipe": cfg.recipe,
        "system.n_qubits": cfg.spec.n_qubits,
        "system.topology": cfg.spec.topology,
        "system.J": cfg.spec.J,
        "system.Gamma": ", ".join(f"{g:g}" for g in cfg.spec.Gamma),
        "system.gamma": ", ".join(f"{g:g}" for g in cfg.spec.gamma),
        "run.dt": cfg.run.dt,
        "run.t_max": cfg.run.t_max,
        "run.n_traj": cfg.run.n_traj,
        "run.master_seed": cfg.run.master_seed,
        "run.scheme": cfg.run.scheme,
        "run.deterministic_channel": cfg.run.deterministic_channel,
        "run.sample_stride": cfg.run.sample_stride,
        "output.prefix": cfg.prefix,
    }
    if cfg.sweep_parameter is not None:
        out["sweep.parameter"] = cfg.sweep_parameter
        out["sweep.values"] = ", ".join(f"{v:g}" for v in cfg.sweep_values)
    if cfg.recipe == "compile-photonic":
        out["photonic.tau"] = cfg.photonic_tau
        out["photonic.n_steps"] = cfg.photonic_steps
        out["photonic.v_as_loss"] = cfg.photonic_v_as_loss
    if cfg.recipe == "spectrum":
        out["spectrum.start"] = cfg.spectrum_start
        out["spectrum.stop"] = cfg.spectrum_stop
        out["spectrum.step"] = cfg.spectrum_step
    return out
