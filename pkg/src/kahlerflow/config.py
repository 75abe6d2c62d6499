"""Run configuration: a YAML file with a versioned, documented schema.

Example (every key optional; shown values are the defaults)::

    schema_version: 1
    seed: 0
    grid:
      N: 256
    perturbation:
      coefficients: [0.0, 0.0, 1.0, 0.5]   # u0 = amplitude * sum c_j cos(xi)^j
      amplitude: 0.05
    time:
      t_end: 10.0
      cfl: 0.2                              # dt <= cfl * h^2 * min e^{2u}
      cadence: 0.05                         # record spacing
      stop_on_converge: false
    spectral:
      sector_cap: 8
    tolerances:
      converge: 1.0e-9                      # sup|g_dot| threshold
      h_flow_residual: 2.0e-3
      y_dot_residual: 5.0e-3
      delta_h_residual: 5.0e-2
      hamilton_slack: 1.0e-6
      key_inequality_slack: 1.0e-6
    output:
      snapshot_times: [0.0]
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError

SCHEMA_VERSION = 1

_SECTIONS = {
    "grid": {"N": "N"},
    "perturbation": {"coefficients": "coefficients", "amplitude": "amplitude"},
    "time": {
        "t_end": "t_end",
        "cfl": "cfl",
        "cadence": "cadence",
        "stop_on_converge": "stop_on_converge",
    },
    "spectral": {"sector_cap": "sector_cap"},
    "tolerances": {
        "converge": "converge_tol",
        "h_flow_residual": "h_flow_tol",
        "y_dot_residual": "y_dot_tol",
        "delta_h_residual": "delta_h_tol",
        "hamilton_slack": "hamilton_slack",
        "key_inequality_slack": "key_slack",
    },
    "output": {"snapshot_times": "snapshot_times"},
}


@dataclass(frozen=True)
class RunConfig:
    N: int = 256
    coefficients: tuple = (0.0, 0.0, 1.0, 0.5)
    amplitude: float = 0.05
    t_end: float = 10.0
    cfl: float = 0.2
    cadence: float = 0.05
    stop_on_converge: bool = False
    sector_cap: int = 8
    converge_tol: float = 1e-9
    h_flow_tol: float = 2e-3
    y_dot_tol: float = 5e-3
    delta_h_tol: float = 5e-2
    hamilton_slack: float = 1e-6
    key_slack: float = 1e-6
    snapshot_times: tuple = (0.0,)
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not isinstance(self.N, int) or self.N < 32 or self.N % 2:
            raise ConfigError(f"N must be an even integer >= 32, got {self.N!r}")
        if not 0.0 <= abs(self.amplitude) < 0.5:
            raise ConfigError(f"amplitude must be below 0.5 in magnitude, got {self.amplitude}")
        if self.cadence <= 0:
            raise ConfigError("cadence must be positive")
        if self.t_end < 0:
            raise ConfigError("t_end must be non-negative")
        if not 0 < self.cfl <= 0.5:
            raise ConfigError("cfl must lie in (0, 0.5]")
        if self.sector_cap < 3:
            raise ConfigError("sector_cap must be at least 3")
        if len(self.coefficients) == 0:
            raise ConfigError("perturbation needs at least one coefficient")

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)

    @property
    def n_records(self):
        return int(round(self.t_end / self.cadence)) + 1

    def to_dict(self):
        out = {"schema_version": SCHEMA_VERSION, "seed": self.seed}
        for sec, keys in _SECTIONS.items():
            out[sec] = {}
            for key, attr in keys.items():
                v = getattr(self, attr)
                out[sec][key] = list(v) if isinstance(v, tuple) else v
        return out


def from_dict(data) -> RunConfig:
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    data = dict(data)
    version = data.pop("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version!r}")
    kw = {}
    if "seed" in data:
        kw["seed"] = data.pop("seed")
    for sec, keys in _SECTIONS.items():
        body = data.pop(sec, None) or {}
        if not isinstance(body, dict):
            raise ConfigError(f"section {sec!r} must be a mapping")
        for key, value in body.items():
            if key not in keys:
                raise ConfigError(f"unknown key {sec}.{key}")
            kw[keys[key]] = value
    if data:
        raise ConfigError(f"unknown sections: {sorted(data)}")
    for name in ("coefficients", "snapshot_times"):
        if name in kw:
            kw[name] = tuple(float(v) for v in kw[name])
    try:
        for name in ("N", "sector_cap", "seed"):
            if name in kw:
                if isinstance(kw[name], bool) or int(kw[name]) != kw[name]:
                    raise ConfigError(f"{name} must be an integer")
                kw[name] = int(kw[name])
        for f in dataclasses.fields(RunConfig):
            if f.name in kw and f.type == "float":
                kw[f.name] = float(kw[f.name])
        if "stop_on_converge" in kw and not isinstance(kw["stop_on_converge"], bool):
            raise ConfigError("stop_on_converge must be true or false")
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(**kw)


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    return from_dict(data)


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)
