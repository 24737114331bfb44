"""Pipeline configuration: dataset geometry, per-stage model settings, decode
schedule, and artifact paths, with cross-field validation and JSON round trip.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .errors import ContractError


@dataclass
class StageConfig:
    layers: int = 2
    heads: int = 2
    width: int = 64
    lr: float = 1e-3
    batch_size: int = 4
    steps: int = 800


@dataclass
class PipelineConfig:
    canvas_size: int = 32
    patch_size: int = 4
    codebook_size: int = 512
    num_keyframes: int = 4
    clip_len: int = 8
    max_objects: int = 8
    coord_bins: int = 32
    num_classes: int = 12
    decode_steps: int = 8
    decode_temperature: float = 1.0
    seed: int = 0
    dataset_dir: str = "data/sprites"
    codebook_path: str = "artifacts/codebook.ccbk"
    layout_ckpt: str = "artifacts/layout.clpf"
    keyframe_ckpt: str = "artifacts/keyframe.clpf"
    keyframe_single_ckpt: str = "artifacts/keyframe_single.clpf"
    interp_ckpt: str = "artifacts/interp.clpf"
    baseline_ckpt: str = "artifacts/baseline.clpf"
    baseline_cond_ckpt: str = "artifacts/baseline_cond.clpf"
    layout_model: StageConfig = field(default_factory=lambda: StageConfig(batch_size=8, steps=1500))
    keyframe_model: StageConfig = field(default_factory=StageConfig)
    keyframe_single_model: StageConfig = field(default_factory=StageConfig)
    interp_model: StageConfig = field(default_factory=StageConfig)
    baseline_model: StageConfig = field(default_factory=StageConfig)

    def __post_init__(self):
        self.validate()

    @property
    def frames_per_sequence(self) -> int:
        return self.num_keyframes * self.clip_len + 1

    @property
    def vocab_size(self) -> int:
        return 4 + self.num_classes + self.coord_bins + self.codebook_size

    def validate(self):
        def positive(name):
            if getattr(self, name) <= 0:
                raise ContractError(f"config.{name}: must be positive")

        for name in ("canvas_size", "patch_size", "codebook_size", "num_keyframes",
                     "clip_len", "max_objects", "coord_bins", "num_classes", "decode_steps"):
            positive(name)
        if self.canvas_size % self.patch_size != 0:
            raise ContractError("config.patch_size: canvas_size must be divisible by patch_size")
        if self.decode_temperature < 0:
            raise ContractError("config.decode_temperature: must be nonnegative")
        if self.vocab_size != 4 + self.num_classes + self.coord_bins + self.codebook_size:
            raise ContractError("config.vocab_size: inconsistent derived vocabulary")
        for stage_field in ("layout_model", "keyframe_model", "keyframe_single_model",
                            "interp_model", "baseline_model"):
            sc = getattr(self, stage_field)
            if sc.width % sc.heads != 0:
                raise ContractError(f"config.{stage_field}.width: not divisible by heads")
            if sc.steps < 0 or sc.batch_size <= 0 or sc.lr <= 0:
                raise ContractError(f"config.{stage_field}: steps/batch_size/lr out of range")
        return self

    # ------------------------------------------------------------- json io
    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ContractError(f"config.{sorted(unknown)[0]}: unknown field")
        kwargs = dict(data)
        for stage_field in ("layout_model", "keyframe_model", "keyframe_single_model",
                            "interp_model", "baseline_model"):
            if stage_field in kwargs and isinstance(kwargs[stage_field], dict):
                extra = set(kwargs[stage_field]) - {f.name for f in fields(StageConfig)}
                if extra:
                    raise ContractError(f"config.{stage_field}.{sorted(extra)[0]}: unknown field")
                kwargs[stage_field] = StageConfig(**kwargs[stage_field])
        return cls(**kwargs)

    def save(self, path):
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        with open(path) as f:
            return cls.from_dict(json.load(f))
