"""Layout guidance: bounding-box quantization, token sequence building, and
the stage-1 generator that predicts future layout geometry jointly.

A layout sequence is flattened as [BOS] then one fixed-width slot per
timestep 0..N: [SEP], up to `max_objects` groups of (class, x, y, w, h)
tokens, then trailing [PAD]s so every slot has length 4 + 5 * max_objects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from sklearn.base import BaseEstimator

from . import vocab as V
from .errors import ContractError, ParseError
from .nn import (
    DecodeSchedule,
    SequenceTransformer,
    TokenSequence,
    TransformerConfig,
    iterative_decode_batch,
)
from .training import MaskedStageMixin

COORD_BINS = 32
MAX_OBJECTS = 8
NUM_TIMESTEPS = 4  # predicted layouts beyond the reference
SLOT_LEN = 4 + 5 * MAX_OBJECTS


@dataclass(frozen=True)
class BoundingBox:
    """Labeled box; center/size are fractions of the canvas."""

    class_id: int
    x: float
    y: float
    w: float
    h: float
    object_id: int | None = None

    def clamped(self) -> "BoundingBox":
        w = min(max(self.w, 1.0 / COORD_BINS), 1.0)
        h = min(max(self.h, 1.0 / COORD_BINS), 1.0)
        x = min(max(self.x, w / 2), 1.0 - w / 2)
        y = min(max(self.y, h / 2), 1.0 - h / 2)
        return replace(self, x=x, y=y, w=w, h=h)

    def is_valid(self) -> bool:
        return (
            self.w > 0 and self.h > 0
            and 0.0 <= self.x - self.w / 2 and self.x + self.w / 2 <= 1.0 + 1e-9
            and 0.0 <= self.y - self.h / 2 and self.y + self.h / 2 <= 1.0 + 1e-9
        )


@dataclass(frozen=True)
class Layout:
    boxes: tuple[BoundingBox, ...] = ()

    def __len__(self):
        return len(self.boxes)

    def canonical(self) -> "Layout":
        return Layout(tuple(sorted(self.boxes, key=lambda b: (b.class_id, b.y, b.x))))

    def label_multiset(self) -> list[int]:
        return sorted(b.class_id for b in self.boxes)


def quantize_coord(v: float, bins: int = COORD_BINS) -> int:
    """Uniform quantization of a fraction to its bin id, top edge clamped."""
    if not 0.0 <= v <= 1.0:
        raise ContractError(f"coordinate {v} outside [0, 1]")
    return min(int(math.floor(v * bins)), bins - 1)


def dequantize_coord(bin_id: int, bins: int = COORD_BINS) -> float:
    """Bin center as a fraction."""
    if not 0 <= bin_id < bins:
        raise ContractError(f"bin {bin_id} outside 0..{bins - 1}")
    return (bin_id + 0.5) / bins


def slot_tokens(entries, vocab: V.Vocabulary, timestep: int, max_objects: int = MAX_OBJECTS):
    """One timestep slot: entries are (class_id, geometry-or-None)."""
    if len(entries) > max_objects:
        raise ContractError(f"timestep {timestep} has {len(entries)} boxes > max {max_objects}")
    ids = [V.SEP]
    segs = [V.SEG_SPECIAL]
    for class_id, geom in entries:
        ids.append(vocab.class_token(class_id))
        segs.append(V.SEG_CLASS)
        if geom is None:
            ids.extend([V.MASK] * 4)
        else:
            x, y, w, h = geom
            ids.extend(vocab.coord_token(quantize_coord(c)) for c in (x, y, w, h))
        segs.extend([V.SEG_COORD] * 4)
    pad = SLOT_LEN - len(ids)
    ids.extend([V.PAD] * pad)
    segs.extend([V.SEG_SPECIAL] * pad)
    frames = [timestep] * SLOT_LEN
    return ids, segs, frames


def layout_slot_entries(layout: Layout):
    """Known-geometry slot entries, in canonical order."""
    return [(b.class_id, (b.x, b.y, b.w, b.h)) for b in layout.canonical().boxes]


def guidance_slot_entries(label_set: list[int], pinned: Layout | None = None):
    """Slot entries for a guidance label multiset, with optional pinned boxes.

    Pinned boxes consume matching labels from the multiset and keep their
    geometry visible; the remaining labels get masked geometry. Entries stay
    class-sorted, pinned-first within a class.
    """
    remaining = sorted(label_set)
    pinned_boxes = list(pinned.canonical().boxes) if pinned else []
    for b in pinned_boxes:
        if b.class_id not in remaining:
            raise ContractError(f"pinned box class {b.class_id} not in the label set {label_set}")
        remaining.remove(b.class_id)
    entries = [(b.class_id, (b.x, b.y, b.w, b.h)) for b in pinned_boxes]
    entries.extend((c, None) for c in remaining)
    entries.sort(key=lambda e: (e[0], e[1] is None))
    return entries


def tokenize_layout_sequence(
    ref_layout: Layout,
    timestep_entries: list[list],
    vocab: V.Vocabulary | None = None,
    max_objects: int = MAX_OBJECTS,
) -> TokenSequence:
    """[BOS] + slots for timestep 0 (the reference) through N."""
    vocab = vocab or V.DEFAULT_VOCAB
    ids = [V.BOS]
    segs = [V.SEG_SPECIAL]
    frames = [0]
    slots = [layout_slot_entries(ref_layout)] + list(timestep_entries)
    for n, entries in enumerate(slots):
        i, s, f = slot_tokens(entries, vocab, n, max_objects)
        ids.extend(i)
        segs.extend(s)
        frames.extend(f)
    return TokenSequence(np.array(ids), np.array(segs), np.array(frames))


def layout_sequence_length(num_timesteps: int = NUM_TIMESTEPS) -> int:
    return 1 + (num_timesteps + 1) * SLOT_LEN


def parse_layout_sequence(
    seq: TokenSequence, vocab: V.Vocabulary | None = None
) -> list[Layout]:
    """Inverse of tokenization; raises ParseError naming the bad position."""
    vocab = vocab or V.DEFAULT_VOCAB
    ids = np.asarray(seq.ids).reshape(-1)
    if ids.size < 1 or ids[0] != V.BOS:
        raise ParseError("position 0: expected [BOS]")
    if (ids.size - 1) % SLOT_LEN != 0:
        raise ParseError(f"length {ids.size} does not divide into slots of {SLOT_LEN}")
    if (ids == V.MASK).any():
        pos = int(np.flatnonzero(ids == V.MASK)[0])
        raise ParseError(f"position {pos}: sequence still contains [MASK]")
    layouts = []
    n_slots = (ids.size - 1) // SLOT_LEN
    for n in range(n_slots):
        base = 1 + n * SLOT_LEN
        if ids[base] != V.SEP:
            raise ParseError(f"position {base}: expected [SEP] at slot {n}")
        boxes = []
        for g in range(MAX_OBJECTS):
            p = base + 1 + g * 5
            head = int(ids[p])
            if head == V.PAD:
                continue
            if not vocab.class_offset <= head < vocab.coord_offset:
                raise ParseError(f"position {p}: expected class token or [PAD], got id {head}")
            geom = []
            for k in range(1, 5):
                tok = int(ids[p + k])
                if not vocab.coord_offset <= tok < vocab.visual_offset:
                    raise ParseError(f"position {p + k}: expected coordinate token, got id {tok}")
                geom.append(dequantize_coord(vocab.coord_of(tok)))
            box = BoundingBox(vocab.class_of(head), *geom).clamped()
            boxes.append(box)
        tail = base + 1 + MAX_OBJECTS * 5
        for p in range(tail, base + SLOT_LEN):
            if ids[p] != V.PAD:
                raise ParseError(f"position {p}: expected [PAD] in slot tail")
        layouts.append(Layout(tuple(boxes)))
    return layouts


def detokenize_layouts(seq: TokenSequence, vocab: V.Vocabulary | None = None) -> list[Layout]:
    """Predicted layouts for timesteps 1..N (the reference slot is dropped)."""
    return parse_layout_sequence(seq, vocab)[1:]


# ------------------------------------------------------------- JSON schema


def layout_to_json(layout: Layout, timestep: int) -> dict:
    boxes = []
    for b in layout.boxes:
        d = {"class": b.class_id, "x": b.x, "y": b.y, "w": b.w, "h": b.h}
        if b.object_id is not None:
            d["object_id"] = b.object_id
        boxes.append(d)
    return {"timestep": timestep, "boxes": boxes}


def layout_from_json(obj: dict, num_classes: int = 12) -> tuple[int, Layout]:
    timestep, boxes = validate_layout_json(obj, num_classes)
    return timestep, Layout(tuple(boxes))


def validate_layout_json(obj, num_classes: int = 12, path: str = "layout"):
    """Validate one layout JSON object; error messages carry the field path."""
    if not isinstance(obj, dict):
        raise ContractError(f"{path}: expected an object")
    if "timestep" not in obj or not isinstance(obj["timestep"], int) or obj["timestep"] < 0:
        raise ContractError(f"{path}.timestep: expected a nonnegative integer")
    if "boxes" not in obj or not isinstance(obj["boxes"], list):
        raise ContractError(f"{path}.boxes: expected a list")
    if len(obj["boxes"]) > MAX_OBJECTS:
        raise ContractError(f"{path}.boxes: {len(obj['boxes'])} boxes exceed the maximum {MAX_OBJECTS}")
    boxes = []
    for i, b in enumerate(obj["boxes"]):
        bp = f"{path}.boxes[{i}]"
        if not isinstance(b, dict):
            raise ContractError(f"{bp}: expected an object")
        if not isinstance(b.get("class"), int) or not 0 <= b["class"] < num_classes:
            raise ContractError(f"{bp}.class: expected an integer in 0..{num_classes - 1}")
        vals = {}
        for key in ("x", "y", "w", "h"):
            v = b.get(key)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not np.isfinite(v):
                raise ContractError(f"{bp}.{key}: expected a finite number")
            vals[key] = float(v)
        if not 0.0 < vals["w"] <= 1.0 or not 0.0 < vals["h"] <= 1.0:
            raise ContractError(f"{bp}.w/h: sizes must be in (0, 1]")
        for key in ("x", "y"):
            if not 0.0 <= vals[key] <= 1.0:
                raise ContractError(f"{bp}.{key}: centers must be in [0, 1]")
        half_w, half_h = vals["w"] / 2, vals["h"] / 2
        eps = 1e-6
        if vals["x"] - half_w < -eps or vals["x"] + half_w > 1 + eps:
            raise ContractError(f"{bp}.x: box extends past the horizontal canvas edge")
        if vals["y"] - half_h < -eps or vals["y"] + half_h > 1 + eps:
            raise ContractError(f"{bp}.y: box extends past the vertical canvas edge")
        oid = b.get("object_id")
        if oid is not None and not isinstance(oid, int):
            raise ContractError(f"{bp}.object_id: expected an integer when present")
        boxes.append(BoundingBox(b["class"], vals["x"], vals["y"], vals["w"], vals["h"], object_id=oid))
    return obj["timestep"], boxes


# --------------------------------------------------------------- estimator


class LayoutGenerator(MaskedStageMixin, BaseEstimator):
    """Stage-1 model: jointly predicts the geometry of N future layouts.

    Follows the fit/sample estimator convention; hyperparameters live in the
    constructor, learned state in `model_`.
    """

    _stage_name = "layout"
    _seed_tag = 0x1A70

    def __init__(
        self,
        layers: int = 2,
        heads: int = 4,
        width: int = 64,
        lr: float = 1e-3,
        batch_size: int = 8,
        steps: int = 2000,
        num_timesteps: int = NUM_TIMESTEPS,
        seed: int = 0,
    ):
        self.layers = layers
        self.heads = heads
        self.width = width
        self.lr = lr
        self.batch_size = batch_size
        self.steps = steps
        self.num_timesteps = num_timesteps
        self.seed = seed

    # -- model plumbing ----------------------------------------------------
    def _build(self):
        self.vocab_ = V.DEFAULT_VOCAB
        cfg = TransformerConfig(
            vocab_size=self.vocab_.size,
            max_len=layout_sequence_length(self.num_timesteps),
            layers=self.layers,
            heads=self.heads,
            width=self.width,
            num_frames=self.num_timesteps + 1,
        )
        self.model_ = SequenceTransformer(cfg, seed=self.seed)
        return self

    def _record_sequence(self, record) -> TokenSequence:
        layouts = [
            Layout(tuple(BoundingBox(b.class_id, b.x, b.y, b.w, b.h, object_id=b.object_id) for b in kb))
            for kb in record.layouts
        ]
        entries = [layout_slot_entries(l) for l in layouts[1:]]
        return tokenize_layout_sequence(layouts[0], entries, self.vocab_)

    def _example(self, record, rng):
        seq = self._record_sequence(record)
        target_region = (seq.segments == V.SEG_COORD) & (seq.frame_ids >= 1) & (seq.ids != V.PAD)
        return seq, target_region

    # -- generation ----------------------------------------------------------
    def sample_batch(self, requests, schedule: DecodeSchedule | None = None, row_seeds=None) -> list[list[Layout]]:
        """Batched sampling; requests are (ref_layout, label_sets) pairs."""
        self._ensure_model()
        schedule = schedule or DecodeSchedule()
        seqs = []
        for ref_layout, label_sets in requests:
            if len(label_sets) != self.num_timesteps:
                raise ContractError(f"expected {self.num_timesteps} label sets, got {len(label_sets)}")
            entries = [guidance_slot_entries(ls) for ls in label_sets]
            seqs.append(tokenize_layout_sequence(ref_layout, entries, self.vocab_))
        ids = np.stack([s.ids for s in seqs])
        segs = np.stack([s.segments for s in seqs])
        frames = np.stack([s.frame_ids for s in seqs])
        out = iterative_decode_batch(ids, segs, frames, self.model_, schedule, self.vocab_, row_seeds)
        return [
            detokenize_layouts(TokenSequence(out[i], seqs[i].segments, seqs[i].frame_ids), self.vocab_)
            for i in range(len(requests))
        ]

    def sample(
        self,
        ref_layout: Layout,
        label_sets: list[list[int]],
        schedule: DecodeSchedule | None = None,
        pinned: dict[int, Layout] | None = None,
        row_seed=None,
    ) -> list[Layout]:
        """Predict layouts for timesteps 1..N from the reference and guidance."""
        self._ensure_model()
        if len(label_sets) != self.num_timesteps:
            raise ContractError(f"expected {self.num_timesteps} label sets, got {len(label_sets)}")
        schedule = schedule or DecodeSchedule()
        pinned = pinned or {}
        entries = [
            guidance_slot_entries(label_sets[n - 1], pinned.get(n))
            for n in range(1, self.num_timesteps + 1)
        ]
        seq = tokenize_layout_sequence(ref_layout, entries, self.vocab_)
        out = iterative_decode_batch(
            seq.ids, seq.segments, seq.frame_ids, self.model_, schedule, self.vocab_,
            None if row_seed is None else [row_seed],
        )
        decoded = detokenize_layouts(TokenSequence(out[0], seq.segments, seq.frame_ids), self.vocab_)
        # pinned boxes pass through verbatim instead of at bin resolution
        result = []
        for n, layout in enumerate(decoded, start=1):
            if n not in pinned or len(pinned[n]) == 0:
                result.append(layout)
                continue
            pin_list = list(pinned[n].canonical().boxes)
            kept, used = [], [False] * len(pin_list)
            for b in layout.boxes:
                hit = None
                for j, p in enumerate(pin_list):
                    if used[j] or p.class_id != b.class_id:
                        continue
                    if quantize_coord(p.x) == quantize_coord(b.x) and quantize_coord(p.y) == quantize_coord(b.y) \
                            and quantize_coord(p.w) == quantize_coord(b.w) and quantize_coord(p.h) == quantize_coord(b.h):
                        hit = j
                        break
                if hit is None:
                    kept.append(b)
                else:
                    used[hit] = True
                    kept.append(pin_list[hit])
            result.append(Layout(tuple(kept)))
        return result

