"""Experiment configuration and its flat ``key = value`` text form."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

from ..errors import ConfigurationError
from ..field_synth import KernelKind, KernelSpec


class Campaign(enum.Enum):
    CONNECTION = "Connection"
    CROSSING_SCALING = "CrossingScaling"
    CONCENTRATION = "Concentration"
    KAC_RICE_MOMENTS = "KacRiceMoments"
    SB_MOMENTS = "SBMoments"
    LEMMA_SWEEP = "LemmaSweep"

    @classmethod
    def parse(cls, text):
        if isinstance(text, cls):
            return text
        for c in cls:
            if c.value.lower() == str(text).strip().lower():
                return c
        raise ConfigurationError(f"unknown campaign {text!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    campaign: Campaign
    kernel: KernelSpec = field(default_factory=KernelSpec.bargmann_fock)
    level: float = 1.0
    delta: float = 0.5
    x_values: tuple = ()
    lambda_values: tuple = ()
    epsilon_values: tuple = ()
    k_max: int = 2
    n_trials: int = 100
    master_seed: int = 0
    pitch: float = 0.1
    output_path: str = "results.csv"
    # box half-widths R for the moment and lemma campaigns
    r_values: tuple = ()
    # thresholds s for the concentration tail table
    s_values: tuple = (0.5,)
    c1: float = 3.0
    aspect: float = 2.0
    diameter_cap: int = 20_000
    measure_s: bool = True
    memory_budget: int = 20_000_000

    def __post_init__(self):
        object.__setattr__(self, "campaign", Campaign.parse(self.campaign))
        for name in ("x_values", "lambda_values", "epsilon_values", "r_values", "s_values"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if self.k_max > self.kernel.regularity_m - 1:
            raise ConfigurationError(
                f"k_max={self.k_max} exceeds regularity_m - 1 = {self.kernel.regularity_m - 1}")
        if self.n_trials < 0:
            raise ConfigurationError("n_trials must be nonnegative")
        if not self.pitch > 0:
            raise ConfigurationError("pitch must be positive")
        for eps in self.epsilon_values:
            ratio = eps / self.pitch
            if round(ratio) < 1 or abs(ratio - round(ratio)) > 1e-6 * max(1.0, ratio):
                raise ConfigurationError(f"epsilon {eps} is not a multiple of pitch {self.pitch}")
        if self.campaign is Campaign.CONNECTION and any(x <= 3 for x in self.x_values):
            raise ConfigurationError("connection campaign needs every x > 3")

    def params(self) -> tuple:
        """Swept parameter values for the campaign."""
        c = self.campaign
        if c is Campaign.CONNECTION:
            return self.x_values
        if c is Campaign.CROSSING_SCALING:
            return self.lambda_values
        if c is Campaign.CONCENTRATION:
            return self.epsilon_values
        return self.r_values


# ------------------------------------------------------------ text format


def kernel_to_text(kernel: KernelSpec) -> str:
    if kernel.kind is not KernelKind.BARGMANN_FOCK:
        raise ConfigurationError("only the bargmann-fock kernel has a text form")
    return (f"bargmann-fock;m={kernel.regularity_m};beta={kernel.decay_beta!r};"
            f"truncation={kernel.truncation_radius!r}")


def kernel_from_text(text: str) -> KernelSpec:
    name, *opts = [p.strip() for p in text.split(";")]
    if name.lower() not in ("bargmann-fock", "bargmannfock", "bf"):
        raise ConfigurationError(f"unsupported kernel {name!r}")
    kw = {}
    for opt in opts:
        if not opt:
            continue
        key, _, val = opt.partition("=")
        key = key.strip()
        if key == "m":
            kw["regularity_m"] = int(val)
        elif key == "beta":
            kw["decay_beta"] = float(val)
        elif key == "truncation":
            kw["truncation_radius"] = float(val)
        else:
            raise ConfigurationError(f"unknown kernel option {key!r}")
    return KernelSpec.bargmann_fock(**kw)


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigurationError(f"not a boolean: {text!r}")


def _parse_list(text: str) -> tuple:
    text = text.strip().strip("[]")
    return tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())


_FIELD_TYPES = {f.name: f for f in fields(ExperimentConfig)}


def parse_config(text: str, **overrides) -> ExperimentConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not sep:
            raise ConfigurationError(f"line {lineno}: expected key = value")
        if key not in _FIELD_TYPES:
            raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
        values[key] = _convert(key, val)
    values.update(overrides)
    if "campaign" not in values:
        raise ConfigurationError("config needs a campaign")
    return ExperimentConfig(**values)


def _convert(key, val):
    if key == "campaign":
        return Campaign.parse(val)
    if key == "kernel":
        return kernel_from_text(val)
    if key in ("x_values", "lambda_values", "epsilon_values", "r_values", "s_values"):
        return _parse_list(val)
    if key in ("k_max", "n_trials", "master_seed", "diameter_cap", "memory_budget"):
        return int(val)
    if key == "measure_s":
        return _parse_bool(val)
    if key == "output_path":
        return val
    return float(val)


def load_config(path, **overrides) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, **overrides)


def config_to_text(config: ExperimentConfig) -> str:
    lines = []
    for f in fields(config):
        v = getattr(config, f.name)
        if f.name == "campaign":
            s = v.value
        elif f.name == "kernel":
            s = kernel_to_text(v)
        elif isinstance(v, tuple):
            s = ",".join(repr(x) for x in v)
        elif isinstance(v, bool):
            s = "true" if v else "false"
        else:
            s = repr(v) if isinstance(v, float) else str(v)
        lines.append(f"{f.name} = {s}")
    return "\n".join(lines) + "\n"
