"""Experiment configuration: flat key = value text whose values are JSON literals.

Lines starting with '#' are comments. A file holding a single JSON object is also
accepted.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from ..errors import InvalidArgumentError
from ..scales import ScaleSchedule, make_schedule
from ..walker import RateSet

KINDS = ("speed", "smooth", "decay", "static", "pilot")


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str = "speed"
    alpha0: float = 0.5
    beta0: float = 0.5
    alpha1: float = 0.9
    beta1: float = 0.1
    rho: float = 0.5
    env: str = "ssep"
    N0: int = 2
    E: int = 3
    rho_minus: float = 0.9996
    r_max: int = 3
    T: float = 2000.0
    buffer: int | None = None
    replicas: int = 100
    master_seed: int = 42
    threads: int = 1
    out_dir: str = "out"
    # smooth-jump estimate
    r_star: int = 1
    # decay curves
    decay_r: tuple = (1, 2)
    decay_replicas: int = 1000
    decay_ls_replicas: int = 6
    # static demo
    pareto_index: float = 1.5
    static_T: tuple = (1000.0, 10000.0, 100000.0)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgumentError(f"unknown experiment kind {self.kind!r}")
        if self.replicas < 1:
            raise InvalidArgumentError("replica count must be at least 1")
        if self.threads < 1:
            raise InvalidArgumentError("thread count must be at least 1")
        if not self.T > 0:
            raise InvalidArgumentError("horizon must be positive")
        if self.env not in ("ssep", "ones", "zeros"):
            raise InvalidArgumentError(f"unknown environment {self.env!r}")
        if self.env == "ssep" and not 0 < self.rho < 1:
            raise InvalidArgumentError("rho must lie in (0, 1)")
        object.__setattr__(self, "decay_r", tuple(int(r) for r in self.decay_r))
        object.__setattr__(self, "static_T", tuple(float(t) for t in self.static_T))
        self.rates  # validates the rate invariants
        self.schedule

    @property
    def rates(self) -> RateSet:
        return RateSet(self.alpha0, self.beta0, self.alpha1, self.beta1)

    @property
    def schedule(self) -> ScaleSchedule:
        return make_schedule(self.N0, self.E, self.rho_minus, self.r_max)

    def as_dict(self) -> dict:
        """Everything that affects results; output location and thread count are left out
        so that reports do not depend on where or how a run happened."""
        d = dataclasses.asdict(self)
        d.pop("out_dir")
        d.pop("threads")
        d["decay_r"] = list(self.decay_r)
        d["static_T"] = list(self.static_T)
        return d

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.as_dict(), sort_keys=True).encode()).hexdigest()[:16]

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)


def parse_config_text(text: str) -> dict:
    stripped = text.strip()
    if stripped.startswith("{"):
        try:
            data = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise InvalidArgumentError(f"bad JSON config: {exc}") from None
        if not isinstance(data, dict):
            raise InvalidArgumentError("config must be a JSON object")
        return data
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InvalidArgumentError(f"line {n}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            raise InvalidArgumentError(f"line {n}: value for {key!r} is not a JSON literal") from None
    return out


def config_from_dict(data: dict, **overrides) -> ExperimentConfig:
    fields = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(data) - fields
    if unknown:
        raise InvalidArgumentError(f"unknown config keys: {sorted(unknown)}")
    merged = {**data, **{k: v for k, v in overrides.items() if v is not None}}
    return ExperimentConfig(**merged)


def load_config(path, **overrides) -> ExperimentConfig:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"config file not found: {p}")
    return config_from_dict(parse_config_text(p.read_text()), **overrides)
