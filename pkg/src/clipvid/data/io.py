"""Dataset directory layout and binary frames format.

Frames file: magic "CFRM", little-endian u16 frame count/height/width, then
raw RGB8 bytes. A dataset directory holds manifest.json plus one subdirectory
per split containing seq_*.cfrm files and an annotations.jsonl with one
record per sequence.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from ..errors import ParseError
from .generate import AnnotatedBox, SequenceRecord, generate_sequence
from .scenes import (
    CANVAS,
    CLASS_NAMES,
    CLIP_LEN,
    KEYFRAME_INDICES,
    MAX_OBJECTS,
    NUM_BACKGROUNDS,
    NUM_CLASSES,
    NUM_FRAMES,
    NUM_TRANSITIONS,
    NUM_VARIANTS,
    PALETTE,
    PATCH,
    VARIANT_NAMES,
)

FRAMES_MAGIC = b"CFRM"


def write_frames(path, frames: np.ndarray):
    frames = np.asarray(frames, dtype=np.uint8)
    if frames.ndim != 4 or frames.shape[-1] != 3:
        raise ParseError(f"frames must be [F, H, W, 3] uint8, got {frames.shape}")
    f_count, h, w, _ = frames.shape
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(FRAMES_MAGIC)
            f.write(struct.pack("<HHH", f_count, h, w))
            f.write(frames.tobytes())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_frames(path) -> np.ndarray:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != FRAMES_MAGIC:
            raise ParseError(f"{path}: bad frames magic {magic!r}")
        f_count, h, w = struct.unpack("<HHH", f.read(6))
        buf = f.read(f_count * h * w * 3)
    if len(buf) != f_count * h * w * 3:
        raise ParseError(f"{path}: truncated frames payload")
    return np.frombuffer(buf, dtype=np.uint8).reshape(f_count, h, w, 3).copy()


def record_to_annotation(rec: SequenceRecord) -> dict:
    return {
        "seq_id": rec.seq_id,
        "keyframe_indices": rec.keyframe_indices,
        "layouts": [
            {"timestep": n, "boxes": [b.to_json() for b in layout]}
            for n, layout in enumerate(rec.layouts)
        ],
        "label_sets": rec.label_sets,
        "events": rec.events,
        "background_ids": rec.background_ids,
    }


def annotation_to_record(ann: dict, frames_path=None) -> SequenceRecord:
    layouts = [[AnnotatedBox.from_json(b) for b in entry["boxes"]] for entry in ann["layouts"]]
    return SequenceRecord(
        seq_id=ann["seq_id"],
        keyframe_indices=list(ann["keyframe_indices"]),
        layouts=layouts,
        label_sets=[list(s) for s in ann["label_sets"]],
        events=ann["events"],
        background_ids=list(ann["background_ids"]),
        frames_path=str(frames_path) if frames_path else None,
    )


def build_manifest(num_train: int, num_test: int, seed: int) -> dict:
    return {
        "num_train": num_train,
        "num_test": num_test,
        "seed": seed,
        "canvas_size": CANVAS,
        "patch_size": PATCH,
        "frames_per_sequence": NUM_FRAMES,
        "clip_len": CLIP_LEN,
        "num_keyframes": NUM_TRANSITIONS,
        "keyframe_indices": list(KEYFRAME_INDICES),
        "max_objects": MAX_OBJECTS,
        "num_backgrounds": NUM_BACKGROUNDS,
        "classes": [{"id": i, "name": n} for i, n in enumerate(CLASS_NAMES)],
        "variants": [{"id": i, "name": n} for i, n in enumerate(VARIANT_NAMES)],
        "palette": PALETTE.tolist(),
    }


def seq_filename(seq_id: int) -> str:
    return f"seq_{seq_id:05d}.cfrm"


def generate_dataset(out_dir, num_train: int, num_test: int, seed: int = 0, progress=None):
    """Write a full train/test dataset under out_dir (temp dir + rename)."""
    out_dir = Path(out_dir)
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    tmp_dir = Path(tempfile.mkdtemp(dir=out_dir.parent, prefix=out_dir.name + "."))
    try:
        splits = {"train": (num_train, 0), "test": (num_test, 1_000_000)}
        for split, (count, id_base) in splits.items():
            split_dir = tmp_dir / split
            split_dir.mkdir(parents=True)
            with open(split_dir / "annotations.jsonl", "w") as ann_file:
                for i in range(count):
                    seq_id = id_base + i
                    rec = generate_sequence(seed=seed * 2_000_003 + seq_id, seq_id=seq_id)
                    write_frames(split_dir / seq_filename(seq_id), rec.frames)
                    ann_file.write(json.dumps(record_to_annotation(rec), sort_keys=True) + "\n")
                    if progress and (i + 1) % 500 == 0:
                        progress(f"{split}: {i + 1}/{count}")
        with open(tmp_dir / "manifest.json", "w") as f:
            json.dump(build_manifest(num_train, num_test, seed), f, indent=2, sort_keys=True)
        if out_dir.exists():
            raise FileExistsError(f"refusing to overwrite existing dataset at {out_dir}")
        os.replace(tmp_dir, out_dir)
    except BaseException:
        import shutil

        shutil.rmtree(tmp_dir, ignore_errors=True)
        raise
    return out_dir


def load_manifest(dataset_dir) -> dict:
    with open(Path(dataset_dir) / "manifest.json") as f:
        return json.load(f)


def load_split(dataset_dir, split: str, limit: int | None = None) -> list[SequenceRecord]:
    """Load a split's annotations; frames stay on disk and load on access."""
    split_dir = Path(dataset_dir) / split
    records = []
    with open(split_dir / "annotations.jsonl") as f:
        for line in f:
            if limit is not None and len(records) >= limit:
                break
            ann = json.loads(line)
            records.append(
                annotation_to_record(ann, frames_path=split_dir / seq_filename(ann["seq_id"]))
            )
    return records
