"""Flat-color sprite rasterization.

A sprite is a rectangle of its class body color with the variant accent color
filling the top-left quadrant. No anti-aliasing; every drawn edge lands on
the 4px patch grid, so rendered frames tile into flat single-color patches.
"""

from __future__ import annotations

import numpy as np

from .scenes import (
    BACKGROUND_COLORS,
    CANVAS,
    CLASS_COLORS,
    SceneSpec,
    VARIANT_COLORS,
)


def render_frame(scene: SceneSpec) -> np.ndarray:
    """Rasterize a scene to a CANVAS x CANVAS x 3 uint8 frame.

    Later-listed objects occlude earlier ones.
    """
    frame = np.empty((CANVAS, CANVAS, 3), dtype=np.uint8)
    frame[:, :] = BACKGROUND_COLORS[scene.background]
    for obj in scene.objects:
        left, top, right, bottom = obj.box_px()
        frame[top:bottom, left:right] = CLASS_COLORS[obj.class_id]
        midx = left + (right - left) // 2
        midy = top + (bottom - top) // 2
        frame[top:midy, left:midx] = VARIANT_COLORS[obj.variant]
    return frame


def sprite_patch(class_id: int, variant: int, size: int = 8) -> np.ndarray:
    """Reference rendering of one sprite at a given square size."""
    img = np.empty((size, size, 3), dtype=np.uint8)
    img[:, :] = CLASS_COLORS[class_id]
    img[: size // 2, : size // 2] = VARIANT_COLORS[variant]
    return img
