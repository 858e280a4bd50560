"""Run configuration: JSON file merged with command-line overrides."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from tcclock.spin import ClockParams
from tcclock.ticks import PRESETS

MODES = ("simulate", "sweep-threshold", "sweep-lambda", "sweep-spin", "ft-check", "turkur", "noise", "spectrum")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    mode: str
    spin2: int = 50
    lam: float = 2.0
    gamma0: float = 1e-3
    beta: float = 2.0
    observable: str = "emissions"
    threshold: int | None = None
    m_grid: list[int] | None = None
    trajectories: int = 100
    horizon_min_ticks: int = 20
    horizon: float | None = None
    seed: int = 0
    out: str = "out"
    workers: int = 1
    lambdas: list[float] | None = None
    spins: list[int] | None = None
    noise_sigma_rel: list[float] | None = None
    noise_dt: float | None = None
    omega_points: int = 400
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not isinstance(self.trajectories, int) or self.trajectories < 1:
            raise ConfigError("trajectories must be an integer >= 1")
        if self.observable not in PRESETS:
            raise ConfigError(f"observable must be one of {sorted(PRESETS)}")
        if self.threshold is not None and self.threshold < 1:
            raise ConfigError("threshold must be >= 1")
        if self.m_grid is not None and (not self.m_grid or min(self.m_grid) < 1):
            raise ConfigError("m_grid must be a non-empty list of positive integers")
        if self.horizon_min_ticks < 1:
            raise ConfigError("horizon_min_ticks must be >= 1")
        if self.horizon is not None and not self.horizon > 0:
            raise ConfigError("horizon must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.noise_sigma_rel is not None:
            s = list(self.noise_sigma_rel)
            if any(x < 0 for x in s) or s != sorted(s):
                raise ConfigError("noise_sigma_rel must be non-negative and ascending")
        if self.noise_dt is not None and not self.noise_dt > 0:
            raise ConfigError("noise_dt must be positive")
        if self.mode == "sweep-lambda" and not self.lambdas:
            raise ConfigError("sweep-lambda needs a list of lambdas")
        if self.mode == "sweep-spin" and not self.spins:
            raise ConfigError("sweep-spin needs a list of spins (as 2S)")
        if self.mode == "noise" and not self.noise_sigma_rel:
            raise ConfigError("noise mode needs noise_sigma_rel values")
        try:
            self.params()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def params(self, **overrides) -> ClockParams:
        kw = dict(spin2=self.spin2, lam=self.lam, gamma0=self.gamma0, beta=self.beta)
        kw.update(overrides)
        return ClockParams(**kw)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        if math.isinf(d["beta"]):
            d["beta"] = None
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        if "beta" in d and d["beta"] is None:
            d["beta"] = math.inf
        if "mode" not in d:
            raise ConfigError("config needs a mode")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path, overrides: dict | None = None) -> "RunConfig":
        """Read a JSON config; non-None ``overrides`` win over file values."""
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8")) if path else {}
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        data.update({k: v for k, v in (overrides or {}).items() if v is not None})
        return cls.from_dict(data)
