"""Shared fixtures: a small dataset on disk plus briefly trained tiny
checkpoints wired into a PipelineConfig, reused by pipeline/service tests.
"""

import numpy as np
import pytest

import clipvid.data as D
from clipvid.baseline import SlidingWindowBaseline
from clipvid.config import PipelineConfig, StageConfig
from clipvid.interp import FrameInterpolator
from clipvid.keyframes import KeyframeGenerator, SingleKeyframeGenerator
from clipvid.layouts import LayoutGenerator
from clipvid.tokenizer import PatchCodebook

TINY = dict(width=32, layers=1, heads=2, batch_size=2, steps=8, seed=0)


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("dataset")
    return D.generate_dataset(root / "sprites", num_train=8, num_test=4, seed=11)


@pytest.fixture(scope="session")
def tiny_config(tmp_path_factory, small_dataset):
    """Dataset + codebook + minimally trained checkpoints for every stage."""
    art = tmp_path_factory.mktemp("artifacts")
    records = D.load_split(small_dataset, "train")
    frames = np.concatenate([r.frames for r in records])
    codebook = PatchCodebook(seed=0).fit(frames)
    codebook.save(art / "codebook.ccbk")

    LayoutGenerator(**TINY).fit(records).save(art / "layout.clpf")
    KeyframeGenerator(**TINY).attach_codebook(codebook).fit(records).save(art / "keyframe.clpf")
    SingleKeyframeGenerator(**TINY).attach_codebook(codebook).fit(records).save(art / "keyframe_single.clpf")
    FrameInterpolator(**TINY).attach_codebook(codebook).fit(records).save(art / "interp.clpf")
    SlidingWindowBaseline(**TINY).attach_codebook(codebook).fit(records).save(art / "baseline.clpf")
    SlidingWindowBaseline(class_conditional=True, **TINY).attach_codebook(codebook).fit(records).save(
        art / "baseline_cond.clpf"
    )

    stage = StageConfig(width=32, layers=1, heads=2, batch_size=2, steps=8)
    return PipelineConfig(
        decode_steps=3,
        dataset_dir=str(small_dataset),
        codebook_path=str(art / "codebook.ccbk"),
        layout_ckpt=str(art / "layout.clpf"),
        keyframe_ckpt=str(art / "keyframe.clpf"),
        keyframe_single_ckpt=str(art / "keyframe_single.clpf"),
        interp_ckpt=str(art / "interp.clpf"),
        baseline_ckpt=str(art / "baseline.clpf"),
        baseline_cond_ckpt=str(art / "baseline_cond.clpf"),
        layout_model=stage,
        keyframe_model=stage,
        keyframe_single_model=stage,
        interp_model=stage,
        baseline_model=stage,
    )
