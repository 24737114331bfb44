"""PNG/GIF helpers and base64 wire encoding for frames."""

from __future__ import annotations

import base64
import io
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ContractError


def save_png(path, frame: np.ndarray):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.asarray(frame, dtype=np.uint8)).save(path, format="PNG")


def load_png(path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def frame_to_base64(frame: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(np.asarray(frame, dtype=np.uint8)).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def frame_from_base64(data: str, expect_size: int | None = None) -> np.ndarray:
    try:
        raw = base64.b64decode(data, validate=True)
        with Image.open(io.BytesIO(raw)) as img:
            frame = np.asarray(img.convert("RGB"), dtype=np.uint8)
    except Exception as e:
        raise ContractError(f"reference_frame: not a decodable base64 PNG ({e})") from e
    if expect_size is not None and frame.shape[:2] != (expect_size, expect_size):
        raise ContractError(
            f"reference_frame: expected {expect_size}x{expect_size}, got {frame.shape[1]}x{frame.shape[0]}"
        )
    return frame


def save_gif(path, frames: np.ndarray, duration_ms: int = 120, scale: int = 4):
    frames = np.asarray(frames, dtype=np.uint8)
    images = [
        Image.fromarray(f).resize((f.shape[1] * scale, f.shape[0] * scale), Image.NEAREST)
        for f in frames
    ]
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    images[0].save(path, save_all=True, append_images=images[1:], duration=duration_ms, loop=0)
