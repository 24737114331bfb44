from .scenes import (
    CANVAS, PATCH, GRID, SIZE_UNIT, SIZES_PX, NUM_CLASSES, NUM_VARIANTS,
    NUM_BACKGROUNDS, MAX_OBJECTS, NUM_TRANSITIONS, CLIP_LEN, NUM_FRAMES,
    KEYFRAME_INDICES, CLASS_NAMES, VARIANT_NAMES, PALETTE, BACKGROUND_COLORS,
    CLASS_COLORS, VARIANT_COLORS, ObjectInstance, SceneSpec, EventScript,
    sample_event_script, apply_events, keyframe_scenes, script_has_reentry,
    snap_box,
)
from .render import render_frame, sprite_patch
from .generate import (
    AnnotatedBox, SequenceRecord, canonical_boxes, extract_label_sets,
    generate_sequence, frames_from_script,
)
from .io import (
    FRAMES_MAGIC, write_frames, read_frames, generate_dataset, load_manifest,
    load_split, record_to_annotation, annotation_to_record, seq_filename,
    build_manifest,
)
