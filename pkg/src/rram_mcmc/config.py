"""Experiment configuration: YAML files, presets and validation.

Every section rejects unknown keys so that a typo never silently falls back
to a default.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

from .cartpole import CartpolePhysics
from .device import DeviceLaw, ProgrammingLut
from .mcmc import McmcConfig, VariabilityMode

COMMANDS = ("characterize", "train-supervised", "train-rl", "infer", "sweep")
TASK_KINDS = ("characterize", "csv", "two_gaussians", "cartpole", "infer")


class ConfigError(ValueError):
    pass


def _build(cls, data: Any, where: str):
    """Instantiate dataclass ``cls`` from a mapping, rejecting unknown keys."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(data).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


@dataclass
class DeviceSection:
    a: float = 0.093
    b: float = 0.48
    c: float = 0.78
    d: float = 0.19
    # device-to-device prefactor spread, 2.4 % of d (see README)
    e: float = 0.0046
    g_min: float | None = None
    g_max: float | None = None
    i_min: float | None = None
    i_max: float | None = None
    unit_convention: str = "micro"
    g_floor: float | None = None
    use_lut: bool = False
    lut_entries: int = 21
    sd_scale: float = 1.0

    def __post_init__(self):
        by_g = self.g_min is not None or self.g_max is not None
        by_i = self.i_min is not None or self.i_max is not None
        if by_g == by_i:
            raise ValueError("give exactly one of (g_min, g_max) or (i_min, i_max)")
        pair = (self.g_min, self.g_max) if by_g else (self.i_min, self.i_max)
        if None in pair:
            raise ValueError("range needs both bounds")
        if self.lut_entries < 2:
            raise ValueError("lut_entries must be >= 2")
        if self.sd_scale < 0:
            raise ValueError("sd_scale must be >= 0")
        self.law()

    def law(self) -> DeviceLaw:
        common = dict(
            a=self.a,
            b=self.b,
            c=self.c,
            d=self.d,
            e=self.e,
            unit_convention=self.unit_convention,
            g_floor=self.g_floor,
        )
        if self.g_min is not None:
            return DeviceLaw.from_conductance_range(self.g_min, self.g_max, **common)
        return DeviceLaw(i_min=self.i_min, i_max=self.i_max, **common)

    def lut(self) -> ProgrammingLut | None:
        return ProgrammingLut.uniform(self.law(), self.lut_entries) if self.use_lut else None


@dataclass
class McmcSection:
    rows: int = 256
    sigma_prior: float = 1.0
    scale_S: float = 1.0
    burn_in: int = 32
    mu_prior: float = 0.0
    reject_cap: int = 1000
    variability_mode: str = "cycle_and_d2d"

    def __post_init__(self):
        VariabilityMode(self.variability_mode)
        if self.rows < self.burn_in + 2:
            raise ValueError(f"rows ({self.rows}) must be >= burn_in + 2")
        self.mcmc(0)

    def mcmc(self, seed: int) -> McmcConfig:
        return McmcConfig(
            sigma_prior=self.sigma_prior,
            scale_S=self.scale_S,
            burn_in=self.burn_in,
            mu_prior=self.mu_prior,
            reject_cap=self.reject_cap,
            seed=seed,
            variability_mode=self.variability_mode,
        )


@dataclass
class CharacterizeTask:
    kind: str = "characterize"
    devices: int = 4096
    cycles: int = 100
    currents: int = 9
    single_device_cycles: int = 500
    population_cycles: int = 500
    population_devices: int = 4096


@dataclass
class CsvTask:
    kind: str = "csv"
    path: str = "data/wdbc.csv"
    label_column: str = "diagnosis"
    positive_label: str = "M"
    drop_columns: list = field(default_factory=lambda: ["id"])
    train_count: int = 369
    test_count: int = 200
    shuffle_seed: int = 0
    n_features: int | None = 16
    split_per_run: bool = False


@dataclass
class TwoGaussiansTask:
    kind: str = "two_gaussians"
    n: int = 50
    shift: float = 3.0
    grid_lo: float = -6.0
    grid_hi: float = 6.0
    grid_steps: int = 61

    def __post_init__(self):
        if self.n < 2 or self.n % 2:
            raise ValueError("n must be an even number >= 2")


@dataclass
class CartpoleTask:
    kind: str = "cartpole"
    kappa: float = 5.0
    test_episodes: int = 100
    physics: dict = field(default_factory=dict)
    trajectory: bool = False

    def __post_init__(self):
        self.physics_obj()
        if not self.kappa > 0:
            raise ValueError("kappa must be > 0")

    def physics_obj(self) -> CartpolePhysics:
        return _build(CartpolePhysics, self.physics, "task.physics")


@dataclass
class InferTask:
    kind: str = "infer"
    snapshot: str = ""
    inputs: str | None = None
    grid_lo: float = -6.0
    grid_hi: float = 6.0
    grid_steps: int = 61


_TASKS = {
    "characterize": CharacterizeTask,
    "csv": CsvTask,
    "two_gaussians": TwoGaussiansTask,
    "cartpole": CartpoleTask,
    "infer": InferTask,
}


@dataclass
class SweepSection:
    param: str = "mcmc.variability_mode"
    values: list = field(default_factory=list)

    def __post_init__(self):
        if "." not in self.param:
            raise ValueError("sweep.param must be 'section.key'")
        if not self.values:
            raise ValueError("sweep.values must not be empty")


@dataclass
class ExperimentConfig:
    command: str
    device: DeviceSection
    mcmc: McmcSection
    task: Any
    master_seed: int = 0
    runs: int = 1
    jobs: int = 1
    out: str = "results"
    sweep: SweepSection | None = None
    name: str = ""

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form, for provenance headers."""
        body = self.to_dict()
        body.pop("jobs")
        body.pop("out")
        text = json.dumps(body, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def law(self) -> DeviceLaw:
        return self.device.law()

    def mcmc_config(self, seed: int) -> McmcConfig:
        return self.mcmc.mcmc(seed)


_TOP_KEYS = {"command", "device", "mcmc", "task", "master_seed", "runs", "jobs", "out", "sweep", "name"}


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping")
    unknown = sorted(set(data) - _TOP_KEYS)
    if unknown:
        raise ConfigError(f"unknown top-level key(s) {', '.join(unknown)}")
    command = data.get("command")
    if command not in COMMANDS:
        raise ConfigError(f"command must be one of {', '.join(COMMANDS)}, got {command!r}")
    task_data = dict(data.get("task") or {})
    kind = task_data.get("kind")
    if kind not in _TASKS:
        raise ConfigError(f"task.kind must be one of {', '.join(_TASKS)}, got {kind!r}")
    cfg = ExperimentConfig(
        command=command,
        device=_build(DeviceSection, data.get("device"), "device"),
        mcmc=_build(McmcSection, data.get("mcmc"), "mcmc"),
        task=_build(_TASKS[kind], task_data, "task"),
        sweep=_build(SweepSection, data["sweep"], "sweep") if data.get("sweep") else None,
    )
    for key, typ in (("master_seed", int), ("runs", int), ("jobs", int), ("out", str), ("name", str)):
        if key in data:
            val = data[key]
            if not isinstance(val, typ) or isinstance(val, bool):
                raise ConfigError(f"{key} must be {typ.__name__}")
            setattr(cfg, key, val)
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    if cfg.runs < 1 or cfg.jobs < 1:
        raise ConfigError("runs and jobs must be >= 1")
    if not 0 <= cfg.master_seed < 2**64:
        raise ConfigError("master_seed must be an unsigned 64-bit integer")
    expected = {
        "characterize": ("characterize",),
        "train-supervised": ("csv", "two_gaussians"),
        "train-rl": ("cartpole",),
        "infer": ("infer",),
        "sweep": ("csv", "two_gaussians", "cartpole"),
    }[cfg.command]
    if cfg.task.kind not in expected:
        raise ConfigError(f"command {cfg.command} cannot run task kind {cfg.task.kind}")
    if cfg.command == "sweep" and cfg.sweep is None:
        raise ConfigError("sweep command needs a sweep section")


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    return config_from_dict(data)


def preset_names() -> list[str]:
    root = resources.files("rram_mcmc") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def preset_dict(name: str) -> dict:
    res = resources.files("rram_mcmc") / "presets" / f"{name}.yaml"
    if not res.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return yaml.safe_load(res.read_text())


def load_preset(name: str) -> ExperimentConfig:
    return config_from_dict(preset_dict(name))


def with_override(cfg: ExperimentConfig, dotted: str, value) -> ExperimentConfig:
    """Copy of ``cfg`` with ``section.key`` replaced and re-validated."""
    section, _, key = dotted.partition(".")
    data = cfg.to_dict()
    if section not in data or not isinstance(data[section], dict) or key not in data[section]:
        raise ConfigError(f"cannot override unknown parameter {dotted!r}")
    data[section][key] = value
    data.pop("sweep", None)
    if cfg.command == "sweep":
        data["command"] = "train-rl" if cfg.task.kind == "cartpole" else "train-supervised"
    # drop derived None entries so the range check sees only what was configured
    data["device"] = {k: v for k, v in data["device"].items() if v is not None}
    return config_from_dict(data)
