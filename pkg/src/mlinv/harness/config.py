"""Experiment configuration: strict JSON ingestion with field-path errors."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields

from ..errors import ConfigError

__all__ = [
    "ProblemConfig",
    "MethodConfig",
    "SweepConfig",
    "OutputConfig",
    "ExperimentConfig",
    "load_config",
    "config_from_dict",
]

_METHODS = ("teki", "ils", "gd")
_INTEGRATORS = ("perturbed", "inflated")
_INFLATION_KINDS = ("identity", "prior")
_ROUNDINGS = ("identity", "next_power_of_two")


@dataclass
class ProblemConfig:
    """Forward problem and data generation settings."""

    n_x: int = 100
    n_y: int = 15
    prior_exponent: float = 1.0  # C0 = diag(i ** (-2 * prior_exponent))
    regularization: float = 1.0
    noise_scale: float = 0.01  # observation noise std; 0 means noise-free, Gamma = I
    noise_free: bool = False
    truth_seed: int = 0
    reference_level: float = 4096.0

    def validate(self, path: str = "problem"):
        if self.n_x < 1:
            raise ConfigError("need at least one mode", f"{path}.n_x")
        if self.n_y < 1:
            raise ConfigError("need at least one observation", f"{path}.n_y")
        if self.noise_scale < 0.0:
            raise ConfigError("noise scale must be >= 0", f"{path}.noise_scale")
        if self.regularization < 0.0:
            raise ConfigError(
                "regularization weight must be >= 0", f"{path}.regularization"
            )
        if self.reference_level < 1.0:
            raise ConfigError("reference level must be >= 1", f"{path}.reference_level")


@dataclass
class MethodConfig:
    """Solver selection and the constants of its level schedule."""

    method: str = "teki"
    c: float = 0.5
    alpha: float = 1.0
    e0: float = 1.0
    bias_constant: float = 1.0
    rounding: str = "identity"
    ensemble_size: int = 50
    tau_interval: float = 0.1
    step_size: float = 0.1
    integrator: str = "perturbed"
    inflation: float = 0.0
    inflation_kind: str = "identity"

    def validate(self, path: str = "method"):
        if self.method not in _METHODS:
            raise ConfigError(
                f"must be one of {_METHODS}, got {self.method!r}", f"{path}.method"
            )
        if not 0.0 < self.c < 1.0:
            raise ConfigError("contraction factor must lie in (0, 1)", f"{path}.c")
        if self.alpha <= 0.0:
            raise ConfigError("accuracy exponent must be positive", f"{path}.alpha")
        if self.e0 <= 0.0:
            raise ConfigError("initial error must be positive", f"{path}.e0")
        if self.bias_constant < 1.0:
            raise ConfigError("bias constant must be >= 1", f"{path}.bias_constant")
        if self.rounding not in _ROUNDINGS:
            raise ConfigError(
                f"must be one of {_ROUNDINGS}, got {self.rounding!r}",
                f"{path}.rounding",
            )
        if self.ensemble_size < 1:
            raise ConfigError("ensemble size must be >= 1", f"{path}.ensemble_size")
        if self.tau_interval <= 0.0 or self.step_size <= 0.0:
            raise ConfigError(
                "time interval and step size must be positive",
                f"{path}.tau_interval",
            )
        ratio = self.tau_interval / self.step_size
        if abs(ratio - round(ratio)) > 1e-9:
            raise ConfigError(
                "tau_interval must be an integer multiple of step_size",
                f"{path}.step_size",
            )
        if self.integrator not in _INTEGRATORS:
            raise ConfigError(
                f"must be one of {_INTEGRATORS}, got {self.integrator!r}",
                f"{path}.integrator",
            )
        if self.inflation < 0.0:
            raise ConfigError("inflation must be >= 0", f"{path}.inflation")
        if self.inflation_kind not in _INFLATION_KINDS:
            raise ConfigError(
                f"must be one of {_INFLATION_KINDS}, got {self.inflation_kind!r}",
                f"{path}.inflation_kind",
            )
        if self.integrator == "perturbed" and self.inflation != 0.0:
            raise ConfigError(
                "the perturbed-observation integrator has no inflation term",
                f"{path}.inflation",
            )


@dataclass
class SweepConfig:
    """Tolerance grid and replication settings."""

    epsilons: list = field(default_factory=lambda: [2.0**-k for k in range(2, 7)])
    replicates: int = 20
    base_seed: int = 1234
    workers: int = 1

    def validate(self, path: str = "sweep"):
        if not self.epsilons:
            raise ConfigError("need at least one tolerance", f"{path}.epsilons")
        for eps in self.epsilons:
            if not (isinstance(eps, (int, float)) and math.isfinite(eps) and eps > 0):
                raise ConfigError(
                    f"tolerances must be positive reals, got {eps!r}",
                    f"{path}.epsilons",
                )
        if list(self.epsilons) != sorted(self.epsilons, reverse=True):
            raise ConfigError(
                "tolerances must be sorted in descending order", f"{path}.epsilons"
            )
        if self.replicates < 1:
            raise ConfigError("need at least one replicate", f"{path}.replicates")
        if self.workers < 1:
            raise ConfigError("need at least one worker", f"{path}.workers")


@dataclass
class OutputConfig:
    """Artifact paths, all relative to the output directory."""

    directory: str = "out"
    csv_name: str = "sweep.csv"
    plot_name: str = "sweep.svg"

    def validate(self, path: str = "output"):
        if not self.csv_name:
            raise ConfigError("csv name must be non-empty", f"{path}.csv_name")


@dataclass
class ExperimentConfig:
    problem: ProblemConfig = field(default_factory=ProblemConfig)
    method: MethodConfig = field(default_factory=MethodConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def validate(self):
        self.problem.validate()
        self.method.validate()
        self.sweep.validate()
        self.output.validate()
        return self


_TYPE_CHECKS = {
    "int": lambda v: isinstance(v, int) and not isinstance(v, bool),
    "float": lambda v: isinstance(v, (int, float)) and not isinstance(v, bool),
    "str": lambda v: isinstance(v, str),
    "bool": lambda v: isinstance(v, bool),
    "list": lambda v: isinstance(v, list),
}


def _fill_dataclass(cls, data, path):
    if not isinstance(data, dict):
        raise ConfigError(f"expected an object, got {type(data).__name__}", path)
    known = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        name = sorted(unknown)[0]
        raise ConfigError("unknown key", f"{path}.{name}")
    kwargs = {}
    for name, value in data.items():
        check = _TYPE_CHECKS.get(str(known[name].type))
        if check is not None and not check(value):
            raise ConfigError(
                f"expected {known[name].type}, got {type(value).__name__}",
                f"{path}.{name}",
            )
        kwargs[name] = value
    return cls(**kwargs)


def config_from_dict(data: dict) -> ExperimentConfig:
    """Build and validate an ExperimentConfig from a plain dictionary.

    Unknown keys at any nesting level are rejected with the offending
    dotted path in the error message.
    """
    if not isinstance(data, dict):
        raise ConfigError("the configuration root must be an object", "<root>")
    blocks = {"problem": ProblemConfig, "method": MethodConfig,
              "sweep": SweepConfig, "output": OutputConfig}
    unknown = set(data) - set(blocks)
    if unknown:
        raise ConfigError("unknown key", sorted(unknown)[0])
    parts = {}
    for name, cls in blocks.items():
        parts[name] = _fill_dataclass(cls, data.get(name, {}), name)
    return ExperimentConfig(**parts).validate()


def load_config(path) -> ExperimentConfig:
    """Read a JSON configuration file."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read configuration: {exc}", str(path)) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}", str(path)) from exc
    return config_from_dict(data)
