"""Pipeline configuration: JSON file plus SPATIALQA_* environment overrides.

Config file keys (all optional):

  workers        int, parallel image workers (default 1)
  seed           int, corpus seed (default 0)
  band           "tight" | "wide", quantitative scoring band
  sampling       {"weights": {family: fraction}, "general_mix": [g, s]}
  synth          candidate caps; "guards" holds the guard-band overrides
  clients        {role: {"endpoint" | "fixture_dir", "cache_dir", ...}}
  tag_filter     {"include": [...], "exclude": [...]}
  cache_dir      default client cache directory

Environment overrides (take precedence over the file):
  SPATIALQA_WORKERS, SPATIALQA_SEED, SPATIALQA_BAND, SPATIALQA_CACHE_DIR
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .qa.items import SamplingConfig
from .qa.synth import SynthConfig
from .relations import GuardConfig

ENV_PREFIX = "SPATIALQA_"


class ConfigError(Exception):
    pass


@dataclass
class PipelineConfig:
    workers: int = 1
    seed: int = 0
    band: str = "tight"
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    clients: dict[str, dict] = field(default_factory=dict)
    tag_include: list[str] = field(default_factory=list)
    tag_exclude: list[str] = field(default_factory=list)
    cache_dir: str | None = None

    def to_dict(self) -> dict:
        synth = dataclasses.asdict(self.synth)
        synth["guards"] = dataclasses.asdict(self.synth.guards)
        synth["size_dimensions"] = list(self.synth.size_dimensions)
        return {
            "workers": self.workers, "seed": self.seed, "band": self.band,
            "sampling": self.sampling.to_dict(), "synth": synth,
            "clients": self.clients,
            "tag_filter": {"include": self.tag_include,
                           "exclude": self.tag_exclude},
            "cache_dir": self.cache_dir,
        }


def _guards_from_dict(d: dict) -> GuardConfig:
    fields = {f.name for f in dataclasses.fields(GuardConfig)}
    unknown = set(d) - fields
    if unknown:
        raise ConfigError(f"unknown guard keys: {sorted(unknown)}")
    return GuardConfig(**d)


def _synth_from_dict(d: dict) -> SynthConfig:
    d = dict(d)
    guards = _guards_from_dict(d.pop("guards", {}))
    if "size_dimensions" in d:
        d["size_dimensions"] = tuple(d["size_dimensions"])
    fields = {f.name for f in dataclasses.fields(SynthConfig)} - {"guards"}
    unknown = set(d) - fields
    if unknown:
        raise ConfigError(f"unknown synth keys: {sorted(unknown)}")
    return SynthConfig(guards=guards, **d)


def config_from_dict(raw: dict) -> PipelineConfig:
    try:
        sampling = SamplingConfig.from_dict(raw["sampling"]) \
            if "sampling" in raw else SamplingConfig()
        synth = _synth_from_dict(raw.get("synth", {}))
    except Exception as e:
        raise ConfigError(f"bad config: {e}") from e
    tag_filter = raw.get("tag_filter", {})
    band = raw.get("band", "tight")
    if band not in ("tight", "wide"):
        raise ConfigError(f"band must be tight or wide, got {band!r}")
    return PipelineConfig(
        workers=int(raw.get("workers", 1)),
        seed=int(raw.get("seed", 0)),
        band=band,
        sampling=sampling,
        synth=synth,
        clients=raw.get("clients", {}),
        tag_include=list(tag_filter.get("include", [])),
        tag_exclude=list(tag_filter.get("exclude", [])),
        cache_dir=raw.get("cache_dir"),
    )


def load_config(path: str | Path | None = None,
                env: dict | None = None) -> PipelineConfig:
    raw = {}
    if path is not None:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    config = config_from_dict(raw)
    env = os.environ if env is None else env
    if f"{ENV_PREFIX}WORKERS" in env:
        config.workers = int(env[f"{ENV_PREFIX}WORKERS"])
    if f"{ENV_PREFIX}SEED" in env:
        config.seed = int(env[f"{ENV_PREFIX}SEED"])
    if f"{ENV_PREFIX}BAND" in env:
        config.band = env[f"{ENV_PREFIX}BAND"]
        if config.band not in ("tight", "wide"):
            raise ConfigError(f"bad {ENV_PREFIX}BAND {config.band!r}")
    if f"{ENV_PREFIX}CACHE_DIR" in env:
        config.cache_dir = env[f"{ENV_PREFIX}CACHE_DIR"]
    return config
