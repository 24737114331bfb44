"""clipvid: guided long-video generation on procedural sprite scenes.

Three stages — layout generation, joint keyframe generation, and
keyframe-pair interpolation — over a shared discrete token vocabulary,
with a self-contained numpy transformer core.
"""

__version__ = "0.1.0"

from .config import PipelineConfig, StageConfig
from .layouts import BoundingBox, Layout, LayoutGenerator
from .tokenizer import PatchCodebook
from .keyframes import KeyframeGenerator, SingleKeyframeGenerator
from .interp import FrameInterpolator, stitch_video
from .baseline import SlidingWindowBaseline

__all__ = [
    "PipelineConfig", "StageConfig", "BoundingBox", "Layout", "LayoutGenerator",
    "PatchCodebook", "KeyframeGenerator", "SingleKeyframeGenerator",
    "FrameInterpolator", "stitch_video", "SlidingWindowBaseline",
]
