"""Scene model and event-script sampling for the procedural sprite corpus.

All keyframe geometry lives on a 4-pixel grid with sprite sizes in multiples
of 8 pixels. Together with the flat quadrant sprite pattern this keeps every
4x4 patch of every rendered frame a single palette color, so the patch
vocabulary stays small and the tokenizer can be exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

CANVAS = 32
PATCH = 4
GRID = 4                 # placement grid, pixels
SIZE_UNIT = 8            # sprite w/h are multiples of this
SIZES_PX = (8, 16, 24)
NUM_CLASSES = 12
NUM_VARIANTS = 6
NUM_BACKGROUNDS = 4
MAX_OBJECTS = 8
NUM_TRANSITIONS = 4      # transitions between the 5 keyframes
CLIP_LEN = 8             # frames per transition
NUM_FRAMES = NUM_TRANSITIONS * CLIP_LEN + 1
KEYFRAME_INDICES = tuple(range(0, NUM_FRAMES, CLIP_LEN))

CLASS_NAMES = (
    "ball", "block", "tree", "star", "cup", "fish",
    "car", "hat", "book", "drum", "kite", "lamp",
)
VARIANT_NAMES = ("rose", "mint", "sky", "sand", "lilac", "lemon")

# 24-color palette: 4 backgrounds, 12 class bodies, 6 variant accents, 2 spare
PALETTE = np.array(
    [
        (30, 32, 44), (38, 46, 38), (46, 38, 32), (40, 34, 48),
        (224, 64, 64), (240, 144, 48), (232, 208, 48), (96, 200, 72),
        (48, 180, 160), (56, 136, 232), (120, 88, 232), (216, 80, 200),
        (160, 208, 64), (64, 224, 216), (232, 112, 136), (144, 96, 56),
        (252, 228, 232), (216, 248, 224), (208, 232, 252), (248, 236, 200),
        (232, 216, 248), (252, 248, 176),
        (0, 0, 0), (255, 255, 255),
    ],
    dtype=np.uint8,
)

BACKGROUND_COLORS = PALETTE[0:4]
CLASS_COLORS = PALETTE[4:16]
VARIANT_COLORS = PALETTE[16:22]


@dataclass(frozen=True)
class ObjectInstance:
    """One sprite: identity, appearance, and fractional box geometry."""

    object_id: int
    class_id: int
    variant: int
    cx: float
    cy: float
    w: float
    h: float

    def box_px(self) -> tuple[int, int, int, int]:
        """(left, top, right, bottom) snapped to the placement grid."""
        return snap_box(self.cx, self.cy, self.w, self.h)


@dataclass(frozen=True)
class SceneSpec:
    background: int
    objects: tuple[ObjectInstance, ...] = ()


def _snap(px: float, unit: int) -> int:
    return unit * int(np.floor(px / unit + 0.5))


def snap_box(cx: float, cy: float, w: float, h: float) -> tuple[int, int, int, int]:
    wpx = min(max(_snap(w * CANVAS, SIZE_UNIT), SIZE_UNIT), CANVAS)
    hpx = min(max(_snap(h * CANVAS, SIZE_UNIT), SIZE_UNIT), CANVAS)
    cxpx = min(max(_snap(cx * CANVAS, GRID), wpx // 2), CANVAS - wpx // 2)
    cypx = min(max(_snap(cy * CANVAS, GRID), hpx // 2), CANVAS - hpx // 2)
    return cxpx - wpx // 2, cypx - hpx // 2, cxpx + wpx // 2, cypx + hpx // 2


def _boxes_overlap(a: tuple[int, int, int, int], b: tuple[int, int, int, int]) -> bool:
    return a[0] < b[2] and b[0] < a[2] and a[1] < b[3] and b[1] < a[3]


def _placement_ok(scene: SceneSpec, candidate: ObjectInstance, ignore_id: int | None = None) -> bool:
    cand = candidate.box_px()
    for obj in scene.objects:
        if obj.object_id == ignore_id or obj.object_id == candidate.object_id:
            continue
        if _boxes_overlap(cand, obj.box_px()):
            return False
    return True


def _random_geometry(rng: np.random.Generator, size=None) -> tuple[float, float, float, float]:
    if size is None:
        wpx = int(rng.choice(SIZES_PX, p=(0.55, 0.35, 0.10)))
        hpx = int(rng.choice(SIZES_PX, p=(0.55, 0.35, 0.10)))
    else:
        wpx = int(round(size[0] * CANVAS))
        hpx = int(round(size[1] * CANVAS))
    cx = int(rng.choice(np.arange(wpx // 2, CANVAS - wpx // 2 + 1, GRID)))
    cy = int(rng.choice(np.arange(hpx // 2, CANVAS - hpx // 2 + 1, GRID)))
    return cx / CANVAS, cy / CANVAS, wpx / CANVAS, hpx / CANVAS


def _place_new(scene, rng, object_id, class_id, variant, keep_size=None, tries=40):
    for _ in range(tries):
        cx, cy, w, h = _random_geometry(rng, size=keep_size)
        cand = ObjectInstance(object_id, class_id, variant, cx, cy, w, h)
        if _placement_ok(scene, cand):
            return cand
    return None


@dataclass
class EventScript:
    """Initial scene plus per-transition event lists (JSON-friendly dicts)."""

    initial: SceneSpec
    transitions: list[list[dict]] = field(default_factory=list)


def script_has_reentry(script: EventScript) -> bool:
    seen = {o.object_id for o in script.initial.objects}
    removed: set[int] = set()
    for events in script.transitions:
        for ev in events:
            if ev["type"] == "remove":
                removed.add(ev["object_id"])
            elif ev["type"] == "insert" and ev["object_id"] in removed:
                return True
    return False


def apply_events(scene: SceneSpec, events: list[dict]) -> SceneSpec:
    """Evolve a scene by one transition's events."""
    background = scene.background
    objects = list(scene.objects)
    by_id = {o.object_id: i for i, o in enumerate(objects)}
    for ev in events:
        kind = ev["type"]
        if kind == "background":
            background = ev["to"]
        elif kind == "remove":
            idx = by_id.pop(ev["object_id"])
            objects.pop(idx)
            by_id = {o.object_id: i for i, o in enumerate(objects)}
        elif kind == "insert":
            obj = ObjectInstance(
                ev["object_id"], ev["class"], ev["variant"],
                ev["cx"], ev["cy"], ev["w"], ev["h"],
            )
            objects.append(obj)
            by_id[obj.object_id] = len(objects) - 1
        elif kind == "move":
            idx = by_id[ev["object_id"]]
            objects[idx] = replace(objects[idx], cx=ev["cx"], cy=ev["cy"])
        elif kind == "resize":
            idx = by_id[ev["object_id"]]
            objects[idx] = replace(
                objects[idx], cx=ev["cx"], cy=ev["cy"], w=ev["w"], h=ev["h"]
            )
        else:
            raise ValueError(f"unknown event type {kind!r}")
    return SceneSpec(background, tuple(objects))


def sample_event_script(seed: int) -> EventScript:
    """Sample the initial scene and 0-2 events for each of the 4 transitions.

    Removed objects may later re-enter under the same id with their original
    class/variant/size; event draws that cannot be placed without overlap are
    dropped rather than retried forever.
    """
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([0x5CEE, seed])))
    background = int(rng.integers(0, NUM_BACKGROUNDS))
    scene = SceneSpec(background)
    next_id = 0
    n_initial = int(rng.integers(2, 5))
    for _ in range(n_initial):
        cls = int(rng.integers(0, NUM_CLASSES))
        var = int(rng.integers(0, NUM_VARIANTS))
        obj = _place_new(scene, rng, next_id, cls, var)
        if obj is not None:
            scene = SceneSpec(scene.background, scene.objects + (obj,))
            next_id += 1
    if not scene.objects:  # extremely unlikely, but the invariant demands >= 1
        obj = ObjectInstance(next_id, 0, 0, 0.25, 0.25, 0.25, 0.25)
        scene = SceneSpec(scene.background, (obj,))
        next_id += 1

    script = EventScript(initial=scene, transitions=[])
    removed: dict[int, ObjectInstance] = {}
    # transition -> re-entry candidates scheduled after a removal
    scheduled: dict[int, list[int]] = {n: [] for n in range(1, NUM_TRANSITIONS + 1)}

    for n in range(1, NUM_TRANSITIONS + 1):
        events: list[dict] = []
        budget = int(rng.choice([0, 1, 2], p=(0.15, 0.5, 0.35)))
        for oid in scheduled[n]:
            if budget <= 0 or len(scene.objects) >= MAX_OBJECTS or oid not in removed:
                continue
            old = removed[oid]
            obj = _place_new(scene, rng, oid, old.class_id, old.variant, keep_size=(old.w, old.h))
            if obj is None:
                continue
            events.append({
                "type": "insert", "object_id": oid, "class": obj.class_id,
                "variant": obj.variant, "cx": obj.cx, "cy": obj.cy, "w": obj.w, "h": obj.h,
                "reentry": True,
            })
            scene = SceneSpec(scene.background, scene.objects + (obj,))
            del removed[oid]
            budget -= 1
        while budget > 0:
            budget -= 1
            kind = rng.choice(
                ["move", "resize", "insert", "remove", "background"],
                p=(0.34, 0.16, 0.20, 0.20, 0.10),
            )
            if kind == "background":
                choices = [b for b in range(NUM_BACKGROUNDS) if b != scene.background]
                to = int(rng.choice(choices))
                events.append({"type": "background", "to": to})
                scene = SceneSpec(to, scene.objects)
            elif kind == "remove":
                if len(scene.objects) <= 1:
                    continue
                obj = scene.objects[int(rng.integers(0, len(scene.objects)))]
                events.append({"type": "remove", "object_id": obj.object_id})
                scene = SceneSpec(scene.background, tuple(o for o in scene.objects if o.object_id != obj.object_id))
                removed[obj.object_id] = obj
                if n < NUM_TRANSITIONS and rng.random() < 0.75:
                    later = int(rng.integers(n + 1, NUM_TRANSITIONS + 1))
                    scheduled[later].append(obj.object_id)
            elif kind == "insert":
                if len(scene.objects) >= MAX_OBJECTS:
                    continue
                cls = int(rng.integers(0, NUM_CLASSES))
                var = int(rng.integers(0, NUM_VARIANTS))
                obj = _place_new(scene, rng, next_id, cls, var)
                if obj is None:
                    continue
                events.append({
                    "type": "insert", "object_id": obj.object_id, "class": cls,
                    "variant": var, "cx": obj.cx, "cy": obj.cy, "w": obj.w, "h": obj.h,
                    "reentry": False,
                })
                scene = SceneSpec(scene.background, scene.objects + (obj,))
                next_id += 1
            elif kind == "move":
                if not scene.objects:
                    continue
                obj = scene.objects[int(rng.integers(0, len(scene.objects)))]
                placed = False
                for _ in range(20):
                    step = GRID * int(rng.integers(1, 3))
                    dx, dy = rng.choice([(-1, 0), (1, 0), (0, -1), (0, 1), (-1, -1), (1, 1), (-1, 1), (1, -1)])
                    ncx = obj.cx + dx * step / CANVAS
                    ncy = obj.cy + dy * step / CANVAS
                    cand = replace(obj, cx=ncx, cy=ncy)
                    l, t, r, b = cand.box_px()
                    snapped_cx = (l + r) / 2 / CANVAS
                    snapped_cy = (t + b) / 2 / CANVAS
                    cand = replace(cand, cx=snapped_cx, cy=snapped_cy)
                    if (cand.cx, cand.cy) != (obj.cx, obj.cy) and _placement_ok(scene, cand, ignore_id=obj.object_id):
                        events.append({"type": "move", "object_id": obj.object_id, "cx": cand.cx, "cy": cand.cy})
                        scene = SceneSpec(scene.background, tuple(cand if o.object_id == obj.object_id else o for o in scene.objects))
                        placed = True
                        break
                if not placed:
                    continue
            elif kind == "resize":
                if not scene.objects:
                    continue
                obj = scene.objects[int(rng.integers(0, len(scene.objects)))]
                wpx = int(rng.choice(SIZES_PX))
                hpx = int(rng.choice(SIZES_PX))
                if (wpx, hpx) == (int(obj.w * CANVAS), int(obj.h * CANVAS)):
                    continue
                cand = replace(obj, w=wpx / CANVAS, h=hpx / CANVAS)
                l, t, r, b = cand.box_px()
                cand = replace(cand, cx=(l + r) / 2 / CANVAS, cy=(t + b) / 2 / CANVAS)
                if _placement_ok(scene, cand, ignore_id=obj.object_id):
                    events.append({
                        "type": "resize", "object_id": obj.object_id,
                        "cx": cand.cx, "cy": cand.cy, "w": cand.w, "h": cand.h,
                    })
                    scene = SceneSpec(scene.background, tuple(cand if o.object_id == obj.object_id else o for o in scene.objects))
        script.transitions.append(events)
    return script


def keyframe_scenes(script: EventScript) -> list[SceneSpec]:
    scenes = [script.initial]
    for events in script.transitions:
        scenes.append(apply_events(scenes[-1], events))
    return scenes
