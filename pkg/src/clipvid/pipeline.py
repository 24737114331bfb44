"""End-to-end orchestration: three-stage generation, baseline modes,
corpus evaluation, and artifact persistence.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import shutil
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import data as D
from .baseline import SlidingWindowBaseline
from .config import PipelineConfig
from .errors import ContractError
from .imgio import save_gif, save_png
from .interp import FrameInterpolator, stitch_video
from .keyframes import KeyframeGenerator, SingleKeyframeGenerator
from .layouts import BoundingBox, Layout, LayoutGenerator, layout_to_json
from .metrics import (
    MetricsReport,
    consistency_score,
    extract_features,
    frechet_distance,
    per_frame_curve,
    psnr,
    ssim,
    video_features,
)
from .nn import DecodeSchedule
from .tokenizer import PatchCodebook

MODES = ("pipeline", "sliding-window", "class-conditional-window")

# stage tags for deriving per-stage decode seeds from one request seed
_STAGE_LAYOUT, _STAGE_KEYFRAME, _STAGE_INTERP, _STAGE_BASELINE = 1, 2, 3, 4


def stage_seed(seed: int, stage: int) -> int:
    return int(np.random.SeedSequence([int(seed), stage]).generate_state(1)[0])


def version_string() -> str:
    """git-describe when available, else the package version."""
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            capture_output=True, text=True, timeout=5,
            cwd=os.path.dirname(os.path.abspath(__file__)),
        )
        if out.returncode == 0 and out.stdout.strip():
            return f"clipvid-{__version__}+g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return f"clipvid-{__version__}"


@dataclass
class GenerationRequest:
    reference_frame: np.ndarray
    mode: str = "pipeline"
    seed: int = 0
    reference_layout: Layout | None = None
    label_sets: list[list[int]] | None = None
    layouts: list[Layout] | None = None          # timesteps 1..N
    keyframes: np.ndarray | None = None          # explicit [N, H, W, 3]

    def validate(self, config: PipelineConfig):
        if self.mode not in MODES:
            raise ContractError(f"request.mode: unknown mode {self.mode!r}")
        frame = np.asarray(self.reference_frame)
        if frame.shape != (config.canvas_size, config.canvas_size, 3):
            raise ContractError(
                f"request.reference_frame: expected {config.canvas_size}x{config.canvas_size}x3, got {frame.shape}"
            )
        n = config.num_keyframes
        if self.mode == "pipeline":
            if self.keyframes is not None:
                kf = np.asarray(self.keyframes)
                if kf.shape != (n, config.canvas_size, config.canvas_size, 3):
                    raise ContractError(f"request.keyframes: expected {n} frames, got {kf.shape}")
            else:
                has_labels = self.label_sets is not None
                has_layouts = self.layouts is not None
                if has_labels == has_layouts:
                    raise ContractError(
                        "request: pipeline mode needs exactly one of label_sets or layouts"
                    )
                if self.reference_layout is None:
                    raise ContractError("request.reference_layout: required unless keyframes are given")
                if has_labels and len(self.label_sets) != n:
                    raise ContractError(f"request.label_sets: expected {n} sets, got {len(self.label_sets)}")
                if has_layouts and len(self.layouts) != n:
                    raise ContractError(f"request.layouts: expected {n} layouts, got {len(self.layouts)}")
        elif self.mode == "class-conditional-window":
            if self.label_sets is None or len(self.label_sets) != n:
                raise ContractError(f"request.label_sets: class-conditional mode needs {n} label sets")
        return self


@dataclass
class GenerationResult:
    video: np.ndarray                           # [F, H, W, 3]
    keyframes: np.ndarray                       # [N, H, W, 3]
    keyframe_tokens: np.ndarray                 # [N, 64]
    keyframe_indices: list[int]
    request_id: str
    mode: str
    seed: int
    layouts: list[Layout] | None = None         # timesteps 0..N when available
    layouts_sampled: bool = False


class Pipeline:
    """Loads the codebook and per-stage checkpoints and runs generation."""

    _LOADERS = {
        "layout": ("layout_ckpt", LayoutGenerator),
        "keyframe": ("keyframe_ckpt", KeyframeGenerator),
        "keyframe-single": ("keyframe_single_ckpt", SingleKeyframeGenerator),
        "interp": ("interp_ckpt", FrameInterpolator),
        "baseline": ("baseline_ckpt", SlidingWindowBaseline),
        "baseline-cond": ("baseline_cond_ckpt", SlidingWindowBaseline),
    }

    def __init__(self, config: PipelineConfig):
        self.config = config
        cb_path = Path(config.codebook_path)
        if not cb_path.exists():
            raise ContractError(f"missing codebook file: {cb_path}")
        self.codebook = PatchCodebook.load(cb_path)
        self._models: dict[str, object] = {}

    def model(self, stage: str):
        if stage not in self._models:
            attr, cls = self._LOADERS[stage]
            path = Path(getattr(self.config, attr))
            if not path.exists():
                raise ContractError(f"missing checkpoint for stage '{stage}': {path}")
            est = cls.load(path)
            if hasattr(est, "attach_codebook"):
                est.attach_codebook(self.codebook)
            self._models[stage] = est
        return self._models[stage]

    def preload(self, stages):
        for s in stages:
            self.model(s)
        return self

    def _schedule(self, seed: int) -> DecodeSchedule:
        return DecodeSchedule(self.config.decode_steps, self.config.decode_temperature, seed)

    # ------------------------------------------------------------- generate
    def generate(self, request: GenerationRequest) -> GenerationResult:
        return self.generate_batch([request])[0]

    def generate_batch(self, requests: list[GenerationRequest]) -> list[GenerationResult]:
        """Run a homogeneous-mode batch; each row depends only on its own seed."""
        if not requests:
            return []
        modes = {r.mode for r in requests}
        if len(modes) > 1:
            raise ContractError("generate_batch requires a single mode per call")
        mode = modes.pop()
        for r in requests:
            r.validate(self.config)
        if mode == "pipeline":
            return self._generate_pipeline(requests)
        return self._generate_baseline(requests, class_conditional=(mode == "class-conditional-window"))

    def _generate_pipeline(self, requests) -> list[GenerationResult]:
        cfg = self.config
        n = cfg.num_keyframes
        ref_tokens = np.stack([self.codebook.encode(np.asarray(r.reference_frame)) for r in requests])

        all_layouts: list[list[Layout] | None] = [None] * len(requests)
        sampled_flags = [False] * len(requests)
        need_layouts = [i for i, r in enumerate(requests) if r.keyframes is None and r.layouts is None]
        if need_layouts:
            layout_model = self.model("layout")
            sched = self._schedule(0)
            seeds = [stage_seed(requests[i].seed, _STAGE_LAYOUT) for i in need_layouts]
            batch = [(requests[i].reference_layout, requests[i].label_sets) for i in need_layouts]
            for i, layouts in zip(need_layouts, layout_model.sample_batch(batch, sched, seeds)):
                all_layouts[i] = layouts
                sampled_flags[i] = True
        for i, r in enumerate(requests):
            if r.layouts is not None:
                all_layouts[i] = list(r.layouts)

        kf_tokens = np.empty((len(requests), n, 64), dtype=np.int64)
        need_keyframes = [i for i, r in enumerate(requests) if r.keyframes is None]
        for i, r in enumerate(requests):
            if r.keyframes is not None:
                kf_tokens[i] = self.codebook.transform(np.asarray(r.keyframes))
        if need_keyframes:
            kf_model = self.model("keyframe")
            sched = self._schedule(0)
            seeds = [stage_seed(requests[i].seed, _STAGE_KEYFRAME) for i in need_keyframes]
            batch = [
                (ref_tokens[i], [requests[i].reference_layout] + all_layouts[i])
                for i in need_keyframes
            ]
            codes = kf_model.generate_joint_batch(batch, sched, seeds)
            for j, i in enumerate(need_keyframes):
                kf_tokens[i] = codes[j]

        interp_model = self.model("interp")
        sched = self._schedule(0)
        pairs, pair_seeds = [], []
        for i, r in enumerate(requests):
            base = stage_seed(r.seed, _STAGE_INTERP)
            boundaries = np.concatenate([ref_tokens[i : i + 1], kf_tokens[i]])
            for k in range(n):
                pairs.append((boundaries[k], boundaries[k + 1]))
                pair_seeds.append(base + k)
        clips = interp_model.interpolate_batch(pairs, sched, pair_seeds)

        results = []
        for i, r in enumerate(requests):
            own = clips[i * n : (i + 1) * n]
            video = stitch_video(list(own), self.codebook)
            keyframes = self.codebook.inverse_transform(kf_tokens[i])
            layouts_full = None
            if all_layouts[i] is not None and r.reference_layout is not None:
                layouts_full = [r.reference_layout] + all_layouts[i]
            results.append(
                GenerationResult(
                    video=video,
                    keyframes=keyframes,
                    keyframe_tokens=kf_tokens[i],
                    keyframe_indices=list(range(0, cfg.frames_per_sequence, cfg.clip_len)),
                    request_id=_request_id(r),
                    mode=r.mode,
                    seed=r.seed,
                    layouts=layouts_full,
                    layouts_sampled=sampled_flags[i],
                )
            )
        return results

    def _generate_baseline(self, requests, class_conditional: bool) -> list[GenerationResult]:
        cfg = self.config
        model = self.model("baseline-cond" if class_conditional else "baseline")
        ref_tokens = np.stack([self.codebook.encode(np.asarray(r.reference_frame)) for r in requests])
        sched = self._schedule(0)
        seeds = [stage_seed(r.seed, _STAGE_BASELINE) for r in requests]
        batch = [
            (ref_tokens[i], requests[i].label_sets if class_conditional else None)
            for i in range(len(requests))
        ]
        codes = model.generate_video_tokens_batch(batch, cfg.num_keyframes, sched, seeds)
        results = []
        kf_idx = list(range(0, cfg.frames_per_sequence, cfg.clip_len))
        for i, r in enumerate(requests):
            video = self.codebook.inverse_transform(codes[i])
            results.append(
                GenerationResult(
                    video=video,
                    keyframes=video[kf_idx[1:]],
                    keyframe_tokens=codes[i][kf_idx[1:]],
                    keyframe_indices=kf_idx,
                    request_id=_request_id(r),
                    mode=r.mode,
                    seed=r.seed,
                )
            )
        return results


def _request_id(request: GenerationRequest) -> str:
    """Deterministic id: same request body + seed -> same id."""
    payload = {
        "mode": request.mode,
        "seed": request.seed,
        "frame": hashlib.sha256(np.ascontiguousarray(request.reference_frame).tobytes()).hexdigest(),
        "label_sets": request.label_sets,
        "layouts": None
        if request.layouts is None
        else [layout_to_json(l, i + 1) for i, l in enumerate(request.layouts)],
        "reference_layout": None
        if request.reference_layout is None
        else layout_to_json(request.reference_layout, 0),
        "keyframes": None
        if request.keyframes is None
        else hashlib.sha256(np.ascontiguousarray(request.keyframes).tobytes()).hexdigest(),
    }
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


# ----------------------------------------------------------------- artifacts


def write_generation_artifacts(result: GenerationResult, out_dir, write_gif: bool = False):
    """Write layouts/keyframes/frames for one generation; temp dir + rename."""
    out_dir = Path(out_dir)
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(dir=out_dir.parent, prefix=out_dir.name + "."))
    try:
        if result.layouts is not None:
            with open(tmp / "layouts.json", "w") as f:
                json.dump(
                    {
                        "sampled": result.layouts_sampled,
                        "layouts": [layout_to_json(l, n) for n, l in enumerate(result.layouts)],
                    },
                    f, indent=2, sort_keys=True,
                )
        tokens = {}
        for n, frame in enumerate(result.keyframes, start=1):
            save_png(tmp / f"keyframe_{n}.png", frame)
            tokens[str(n)] = result.keyframe_tokens[n - 1].tolist()
        with open(tmp / "keyframe_tokens.json", "w") as f:
            json.dump(tokens, f, sort_keys=True)
        for t, frame in enumerate(result.video):
            save_png(tmp / f"frame_{t:03d}.png", frame)
        D.write_frames(tmp / "frames.cfrm", result.video)
        if write_gif:
            save_gif(tmp / "video.gif", result.video)
        with open(tmp / "result.json", "w") as f:
            json.dump(
                {
                    "request_id": result.request_id,
                    "mode": result.mode,
                    "seed": result.seed,
                    "keyframe_indices": result.keyframe_indices,
                    "version": version_string(),
                },
                f, indent=2, sort_keys=True,
            )
        if out_dir.exists():
            shutil.rmtree(out_dir)
        os.replace(tmp, out_dir)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return out_dir


def request_from_record(record, mode: str = "pipeline", seed: int | None = None,
                        use_gt_layouts: bool = False) -> GenerationRequest:
    """Build a generation request from a dataset record's reference + guidance."""
    ref_layout = Layout(
        tuple(BoundingBox(b.class_id, b.x, b.y, b.w, b.h, object_id=b.object_id) for b in record.layouts[0])
    )
    layouts = None
    if use_gt_layouts:
        layouts = [
            Layout(tuple(BoundingBox(b.class_id, b.x, b.y, b.w, b.h, object_id=b.object_id) for b in kb))
            for kb in record.layouts[1:]
        ]
    return GenerationRequest(
        reference_frame=record.frames[0],
        mode=mode,
        seed=record.seq_id if seed is None else seed,
        reference_layout=ref_layout,
        label_sets=None if use_gt_layouts and mode == "pipeline" else record.label_sets[1:],
        layouts=layouts,
    )


def generate_for_split(pipeline: Pipeline, dataset_dir, split: str, out_dir,
                       mode: str = "pipeline", limit: int | None = None,
                       use_gt_layouts: bool = False, batch_size: int = 16,
                       write_gif: bool = False, progress=None):
    """Generate predictions for every sequence of a split into out_dir."""
    records = D.load_split(dataset_dir, split, limit=limit)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for start in range(0, len(records), batch_size):
        chunk = records[start : start + batch_size]
        reqs = [request_from_record(r, mode=mode, use_gt_layouts=use_gt_layouts) for r in chunk]
        results = pipeline.generate_batch(reqs)
        for rec, res in zip(chunk, results):
            write_generation_artifacts(res, out_dir / f"seq_{rec.seq_id:05d}", write_gif=write_gif)
        if progress:
            progress(f"{min(start + batch_size, len(records))}/{len(records)}")
    return out_dir


# ----------------------------------------------------------------- evaluate


def evaluate(pred_dir, dataset_dir, split: str = "test",
             config: PipelineConfig | None = None,
             report_path=None, curve_csv_path=None) -> MetricsReport:
    """Compare a directory of generated sequences against the ground truth."""
    pred_dir = Path(pred_dir)
    pred_ids = sorted(
        int(p.name.split("_")[1]) for p in pred_dir.iterdir()
        if p.is_dir() and p.name.startswith("seq_")
    )
    if not pred_ids:
        raise ContractError(f"no seq_* prediction directories under {pred_dir}")
    gt_records = {r.seq_id: r for r in D.load_split(dataset_dir, split)}
    missing = [i for i in pred_ids if i not in gt_records]
    if missing:
        raise ContractError(f"prediction ids missing from the {split} split: {missing}")

    per_sequence = {}
    curves = []
    pred_video_feats, gt_video_feats = [], []
    for seq_id in pred_ids:
        gt = gt_records[seq_id]
        pred_frames = D.read_frames(pred_dir / f"seq_{seq_id:05d}" / "frames.cfrm")
        gt_frames = gt.frames
        if pred_frames.shape != gt_frames.shape:
            raise ContractError(f"seq {seq_id}: prediction shape {pred_frames.shape} != gt {gt_frames.shape}")
        seq_psnr = float(np.mean([psnr(p, g) for p, g in zip(pred_frames, gt_frames)]))
        seq_ssim = float(np.mean([ssim(p, g) for p, g in zip(pred_frames, gt_frames)]))
        seq_fd = frechet_distance(extract_features(pred_frames), extract_features(gt_frames))
        kf_idx = gt.keyframe_indices[1:]
        cons = consistency_score(pred_frames[kf_idx], gt.layouts[1:])
        curve = per_frame_curve(pred_frames, gt_frames)
        curves.append(curve)
        pred_video_feats.append(video_features(pred_frames))
        gt_video_feats.append(video_features(gt_frames))
        per_sequence[seq_id] = {
            "psnr": seq_psnr,
            "ssim": seq_ssim,
            "frame_frechet": seq_fd,
            "consistency": cons.score,
            "consistency_recurring": cons.num_recurring,
        }

    corpus = {
        key: float(np.mean([m[key] for m in per_sequence.values()]))
        for key in ("psnr", "ssim", "frame_frechet", "consistency")
    }
    corpus["video_frechet"] = (
        frechet_distance(np.stack(pred_video_feats), np.stack(gt_video_feats))
        if len(pred_video_feats) >= 2
        else None
    )
    corpus["num_sequences"] = len(pred_ids)
    mean_curve = np.stack(curves).mean(axis=0)

    report = MetricsReport(
        per_sequence=per_sequence,
        corpus=corpus,
        per_frame=[float(v) for v in mean_curve],
        config=config.to_dict() if config else {},
        version=version_string(),
    )
    if report_path:
        Path(report_path).parent.mkdir(parents=True, exist_ok=True)
        with open(report_path, "w") as f:
            json.dump(report.to_json(), f, indent=2, sort_keys=True)
    if curve_csv_path:
        Path(curve_csv_path).parent.mkdir(parents=True, exist_ok=True)
        with open(curve_csv_path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["frame", "value"])
            for t, v in enumerate(report.per_frame):
                writer.writerow([t, repr(float(v))])
    return report
