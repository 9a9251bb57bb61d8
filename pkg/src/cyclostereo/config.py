"""Pipeline configuration: one record capturing everything a run needs, so
the run can be replayed bit-identically from the config it wrote."""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field

from .dp import DPParams


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    lam: float = 0.6
    eps: float = 0.05
    strict_gc1_runs: bool = True
    subpixel_refine: bool = False
    fm_norm: str = "line"  # line | global
    fill_mode: str = "poisson"  # poisson | affine
    tau: float = 2.0
    feature_source: str = "census"  # census | patch | b2ft
    census_radius: tuple = (1, 2)
    parallelism: int = 1
    out_dir: str = "out"
    inputs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.fm_norm not in ("line", "global"):
            raise ConfigError(f"fm_norm must be line|global, got {self.fm_norm!r}")
        if self.fill_mode not in ("poisson", "affine"):
            raise ConfigError(f"fill_mode must be poisson|affine, got {self.fill_mode!r}")
        if self.feature_source not in ("census", "patch", "b2ft"):
            raise ConfigError(
                f"feature_source must be census|patch|b2ft, got {self.feature_source!r}")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")
        self.census_radius = tuple(int(v) for v in self.census_radius)
        if len(self.census_radius) != 2:
            raise ConfigError("census_radius must be (row_radius, col_radius)")

    def dp_params(self):
        return DPParams(lam=self.lam, eps=self.eps,
                        strict_gc1_runs=self.strict_gc1_runs,
                        subpixel_refine=self.subpixel_refine)

    def to_json_dict(self):
        d = dataclasses.asdict(self)
        d["census_radius"] = list(self.census_radius)
        return d

    def write(self, path):
        with open(path, "w") as f:
            json.dump(self.to_json_dict(), f, indent=2, sort_keys=True)
            f.write("\n")

    @classmethod
    def from_json_dict(cls, d):
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config fields: {sorted(extra)}")
        return cls(**d)

    @classmethod
    def read(cls, path):
        with open(path) as f:
            return cls.from_json_dict(json.load(f))


def apply_env_overrides(cfg):
    """CYCLOSTEREO_PARALLELISM and CYCLOSTEREO_OUT take precedence over the
    config file but not over explicit command-line flags."""
    par = os.environ.get("CYCLOSTEREO_PARALLELISM")
    if par:
        cfg.parallelism = int(par)
    out = os.environ.get("CYCLOSTEREO_OUT")
    if out:
        cfg.out_dir = out
    return cfg
