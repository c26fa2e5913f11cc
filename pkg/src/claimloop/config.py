"""Service and engine configuration, loaded from a JSON config file."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .agents import ProbeBudget
from .arbitration import UtilityWeights
from .fusion import FusionConfig

DATA_DIR_ENV = "CLAIMLOOP_DATA_DIR"


@dataclass
class AdapterConfig:
    endpoint: str = ""
    timeout_s: float = 10.0
    retries: int = 1


@dataclass
class OracleNoise:
    flip_rate: float = 0.0
    abstain_rate: float = 0.0
    invalid_rate: float = 0.0
    clutter_abstain_scale: float = 0.0
    rng_seed: int = 0
    role_rates: dict = field(default_factory=dict)


@dataclass
class ServiceConfig:
    listen: str = "127.0.0.1:8721"
    data_dir: str = "./claimloop-data"
    backend: str = "oracle"  # oracle | external
    gate_direction: str = "ge"
    iou_threshold: float = 0.5
    fusion: FusionConfig = field(default_factory=FusionConfig)
    utility: UtilityWeights = field(default_factory=UtilityWeights)
    budget: ProbeBudget = field(default_factory=ProbeBudget)
    oracle: OracleNoise = field(default_factory=OracleNoise)
    adapter: AdapterConfig = field(default_factory=AdapterConfig)

    def validate(self) -> None:
        self.fusion.validate()
        self.utility.validate()
        self.budget.validate()
        if self.backend not in ("oracle", "external"):
            raise ValueError(f"backend must be oracle or external, got {self.backend!r}")
        if self.backend == "external" and not self.adapter.endpoint:
            raise ValueError("external backend requires adapter.endpoint")

    @property
    def host_port(self) -> tuple[str, int]:
        host, _, port = self.listen.partition(":")
        return host or "127.0.0.1", int(port or 8721)

    def resolved_data_dir(self) -> Path:
        return Path(os.environ.get(DATA_DIR_ENV, self.data_dir))

    def to_dict(self) -> dict:
        return {
            "listen": self.listen,
            "data_dir": self.data_dir,
            "backend": self.backend,
            "gate_direction": self.gate_direction,
            "iou_threshold": self.iou_threshold,
            "fusion": asdict(self.fusion),
            "utility": asdict(self.utility),
            "budget": asdict(self.budget),
            "oracle": asdict(self.oracle),
            "adapter": asdict(self.adapter),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ServiceConfig":
        cfg = cls()
        for key in ("listen", "data_dir", "backend", "gate_direction", "iou_threshold"):
            if key in d:
                setattr(cfg, key, d[key])
        if "fusion" in d:
            cfg.fusion = FusionConfig(**{**asdict(FusionConfig()), **d["fusion"]})
        if "utility" in d:
            cfg.utility = UtilityWeights(**{**asdict(UtilityWeights()), **d["utility"]})
        if "budget" in d:
            cfg.budget = ProbeBudget(**{**asdict(ProbeBudget()), **d["budget"]})
        if "oracle" in d:
            cfg.oracle = OracleNoise(**{**asdict(OracleNoise()), **d["oracle"]})
        if "adapter" in d:
            cfg.adapter = AdapterConfig(**{**asdict(AdapterConfig()), **d["adapter"]})
        cfg.utility.gate_direction = cfg.gate_direction
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path) -> "ServiceConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))
