"""Full sequence synthesis: event script -> keyframe scenes -> 33 frames
with ground-truth layouts and label sets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .render import render_frame
from .scenes import (
    CANVAS,
    CLIP_LEN,
    EventScript,
    KEYFRAME_INDICES,
    NUM_FRAMES,
    NUM_TRANSITIONS,
    ObjectInstance,
    SceneSpec,
    keyframe_scenes,
    sample_event_script,
)


@dataclass(frozen=True)
class AnnotatedBox:
    """Ground-truth box: geometry plus object identity and appearance."""

    object_id: int
    class_id: int
    variant: int
    x: float
    y: float
    w: float
    h: float

    def to_json(self) -> dict:
        return {
            "object_id": self.object_id, "class": self.class_id, "variant": self.variant,
            "x": self.x, "y": self.y, "w": self.w, "h": self.h,
        }

    @classmethod
    def from_json(cls, d: dict) -> "AnnotatedBox":
        return cls(d["object_id"], d["class"], d["variant"], d["x"], d["y"], d["w"], d["h"])


def canonical_boxes(scene: SceneSpec) -> list[AnnotatedBox]:
    """Scene objects as boxes in canonical (class, cy, cx) order."""
    boxes = [
        AnnotatedBox(o.object_id, o.class_id, o.variant, o.cx, o.cy, o.w, o.h)
        for o in scene.objects
    ]
    boxes.sort(key=lambda b: (b.class_id, b.y, b.x))
    return boxes


def extract_label_sets(layouts: list[list[AnnotatedBox]]) -> list[list[int]]:
    """Per-layout class multiset, in ascending class order."""
    return [sorted(b.class_id for b in layout) for layout in layouts]


@dataclass
class SequenceRecord:
    seq_id: int
    keyframe_indices: list[int]
    layouts: list[list[AnnotatedBox]]          # one per keyframe, canonical order
    label_sets: list[list[int]]
    events: list[list[dict]]
    background_ids: list[int]
    _frames: np.ndarray | None = field(default=None, repr=False)
    frames_path: str | None = None

    @property
    def frames(self) -> np.ndarray:
        if self._frames is not None:
            return self._frames
        from .io import read_frames  # local import to avoid a cycle

        if self.frames_path is None:
            raise ValueError("record has neither in-memory frames nor a frames_path")
        return read_frames(self.frames_path)

    def keyframes(self) -> np.ndarray:
        f = self.frames
        return f[list(self.keyframe_indices)]


def _interpolated_scene(prev: SceneSpec, nxt: SceneSpec, alpha: float) -> SceneSpec:
    """Objects present at both boundary keyframes, geometry linearly mixed.

    Inserts/removes take effect exactly at keyframes, so mid-transition the
    scene holds only persisting objects; the background switches at the
    arriving keyframe.
    """
    nxt_by_id = {o.object_id: o for o in nxt.objects}
    mixed = []
    for o in prev.objects:
        if o.object_id not in nxt_by_id:
            continue
        q = nxt_by_id[o.object_id]
        mixed.append(
            ObjectInstance(
                o.object_id, o.class_id, o.variant,
                o.cx + (q.cx - o.cx) * alpha,
                o.cy + (q.cy - o.cy) * alpha,
                o.w + (q.w - o.w) * alpha,
                o.h + (q.h - o.h) * alpha,
            )
        )
    return SceneSpec(prev.background, tuple(mixed))


def frames_from_script(script: EventScript) -> tuple[np.ndarray, list[SceneSpec]]:
    scenes = keyframe_scenes(script)
    frames = np.empty((NUM_FRAMES, CANVAS, CANVAS, 3), dtype=np.uint8)
    for n in range(NUM_TRANSITIONS + 1):
        frames[n * CLIP_LEN] = render_frame(scenes[n])
    for n in range(1, NUM_TRANSITIONS + 1):
        for t in range(1, CLIP_LEN):
            alpha = t / CLIP_LEN
            frames[(n - 1) * CLIP_LEN + t] = render_frame(
                _interpolated_scene(scenes[n - 1], scenes[n], alpha)
            )
    return frames, scenes


def generate_sequence(seed: int, seq_id: int | None = None) -> SequenceRecord:
    """Deterministically synthesize one 33-frame annotated sequence."""
    script = sample_event_script(seed)
    frames, scenes = frames_from_script(script)
    layouts = [canonical_boxes(s) for s in scenes]
    return SequenceRecord(
        seq_id=seed if seq_id is None else seq_id,
        keyframe_indices=list(KEYFRAME_INDICES),
        layouts=layouts,
        label_sets=extract_label_sets(layouts),
        events=script.transitions,
        background_ids=[s.background for s in scenes],
        _frames=frames,
    )
