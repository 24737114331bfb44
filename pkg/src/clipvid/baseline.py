"""Sliding-window baselines: predict the next clip from its first frame,
optionally conditioned on the window's object-label set, and roll forward.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from . import vocab as V
from .errors import ContractError
from .interp import build_clip_sequence
from .keyframes import TOKENS_PER_FRAME
from .layouts import MAX_OBJECTS
from .nn import (
    DecodeSchedule,
    SequenceTransformer,
    TokenSequence,
    TransformerConfig,
    iterative_decode_batch,
)
from .training import MaskedStageMixin


def build_window_sequence(
    frame_tokens: list[np.ndarray | None],
    label_set: list[int] | None,
    vocab: V.Vocabulary | None = None,
) -> TokenSequence:
    """Clip sequence with an optional leading label block of MAX_OBJECTS
    class-or-[PAD] tokens describing the window's content."""
    vocab = vocab or V.DEFAULT_VOCAB
    clip = build_clip_sequence(frame_tokens, vocab)
    if label_set is None:
        return clip
    if len(label_set) > MAX_OBJECTS:
        raise ContractError(f"label set of {len(label_set)} exceeds {MAX_OBJECTS}")
    labels = sorted(label_set)
    lab_ids = [vocab.class_token(c) for c in labels] + [V.PAD] * (MAX_OBJECTS - len(labels))
    lab_segs = [V.SEG_CLASS] * len(labels) + [V.SEG_SPECIAL] * (MAX_OBJECTS - len(labels))
    lab_frames = [len(frame_tokens) - 1] * MAX_OBJECTS  # labels describe the window end
    return TokenSequence(
        np.concatenate([clip.ids[:1], lab_ids, clip.ids[1:]]),
        np.concatenate([clip.segments[:1], lab_segs, clip.segments[1:]]),
        np.concatenate([clip.frame_ids[:1], lab_frames, clip.frame_ids[1:]]),
    )


def window_sequence_length(clip_len: int = 8, class_conditional: bool = False) -> int:
    return 1 + (MAX_OBJECTS if class_conditional else 0) + (clip_len + 1) * TOKENS_PER_FRAME


class SlidingWindowBaseline(MaskedStageMixin, BaseEstimator):
    """Next-clip predictor rolled forward window by window."""

    _stage_name = "baseline"
    _seed_tag = 0x4D33

    def __init__(
        self,
        class_conditional: bool = False,
        layers: int = 2,
        heads: int = 2,
        width: int = 64,
        lr: float = 1e-3,
        batch_size: int = 4,
        steps: int = 800,
        clip_len: int = 8,
        seed: int = 0,
    ):
        self.class_conditional = class_conditional
        self.layers = layers
        self.heads = heads
        self.width = width
        self.lr = lr
        self.batch_size = batch_size
        self.steps = steps
        self.clip_len = clip_len
        self.seed = seed

    def _build(self):
        self.vocab_ = V.DEFAULT_VOCAB
        cfg = TransformerConfig(
            vocab_size=self.vocab_.size,
            max_len=window_sequence_length(self.clip_len, self.class_conditional),
            layers=self.layers,
            heads=self.heads,
            width=self.width,
            num_frames=self.clip_len + 1,
        )
        self.model_ = SequenceTransformer(cfg, seed=self.seed)
        self._token_cache = {}
        return self

    def attach_codebook(self, codebook):
        self.codebook_ = codebook
        return self

    def _frame_tokens(self, record) -> np.ndarray:
        if not hasattr(self, "codebook_"):
            raise ContractError("attach_codebook() before training on pixel records")
        cached = self._token_cache.get(record.seq_id)
        if cached is None:
            cached = self.codebook_.transform(record.frames)
            self._token_cache[record.seq_id] = cached
        return cached

    def _prepare(self, records):
        for r in records:
            self._frame_tokens(r)

    def _example(self, record, rng):
        tokens = self._frame_tokens(record)
        n_windows = (len(tokens) - 1) // self.clip_len
        n = int(rng.integers(1, n_windows + 1))
        window = tokens[(n - 1) * self.clip_len : n * self.clip_len + 1]
        labels = record.label_sets[n] if self.class_conditional else None
        seq = build_window_sequence(list(window), labels, self.vocab_)
        target_region = (seq.segments == V.SEG_VISUAL) & (seq.frame_ids >= 1)
        return seq, target_region

    # -- generation ----------------------------------------------------------
    def generate_video_tokens(
        self,
        ref_tokens: np.ndarray,
        label_sets: list[list[int]] | None,
        num_windows: int,
        schedule: DecodeSchedule | None = None,
    ) -> np.ndarray:
        return self.generate_video_tokens_batch(
            [(ref_tokens, label_sets)], num_windows, schedule
        )[0]

    def generate_video_tokens_batch(
        self, requests, num_windows: int, schedule: DecodeSchedule | None = None, row_seeds=None
    ) -> np.ndarray:
        """Roll the window forward num_windows times -> [B, N*T+1, 64] codes."""
        self._ensure_model()
        schedule = schedule or DecodeSchedule()
        if self.class_conditional and any(r[1] is None for r in requests):
            raise ContractError("class-conditional baseline requires label sets")
        B = len(requests)
        if row_seeds is None:
            row_seeds = [schedule.seed + r for r in range(B)]
        total = num_windows * self.clip_len + 1
        out = np.empty((B, total, TOKENS_PER_FRAME), dtype=np.int64)
        prev = np.stack([np.asarray(r[0], dtype=np.int64).reshape(-1) for r in requests])
        out[:, 0] = prev
        for n in range(1, num_windows + 1):
            seqs = []
            for b in range(B):
                blocks = [prev[b]] + [None] * self.clip_len
                labels = requests[b][1][n - 1] if self.class_conditional else None
                seqs.append(build_window_sequence(blocks, labels, self.vocab_))
            ids = np.stack([s.ids for s in seqs])
            segs = np.stack([s.segments for s in seqs])
            frames = np.stack([s.frame_ids for s in seqs])
            step_seeds = [s + 7919 * (n - 1) for s in row_seeds]
            decoded = iterative_decode_batch(ids, segs, frames, self.model_, schedule, self.vocab_, step_seeds)
            tail = decoded[:, -self.clip_len * TOKENS_PER_FRAME :]
            codes = (tail - self.vocab_.visual_offset).reshape(B, self.clip_len, TOKENS_PER_FRAME)
            out[:, (n - 1) * self.clip_len + 1 : n * self.clip_len + 1] = codes
            prev = codes[:, -1]
        return out
