"""Stage 3: predict the intermediate frames of each keyframe pair and stitch
the clips into the full video.

Clip sequences are [BOS] followed by T+1 frames of visual tokens (frame ids
0..T); the two boundary frames stay visible and are copied verbatim into the
output, so stitched videos anchor exactly on their keyframes.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from . import vocab as V
from .errors import ContractError
from .keyframes import TOKENS_PER_FRAME
from .nn import (
    DecodeSchedule,
    SequenceTransformer,
    TokenSequence,
    TransformerConfig,
    iterative_decode_batch,
)
from .training import MaskedStageMixin


def build_clip_sequence(
    frame_tokens: list[np.ndarray | None], vocab: V.Vocabulary | None = None
) -> TokenSequence:
    """[BOS] + one visual block per frame; None blocks become [MASK]."""
    vocab = vocab or V.DEFAULT_VOCAB
    ids = [V.BOS]
    segs = [V.SEG_SPECIAL]
    frames = [0]
    for t, tokens in enumerate(frame_tokens):
        if tokens is None:
            ids.extend([V.MASK] * TOKENS_PER_FRAME)
        else:
            tokens = np.asarray(tokens, dtype=np.int64).reshape(-1)
            if tokens.size != TOKENS_PER_FRAME:
                raise ContractError(f"frame {t} must carry {TOKENS_PER_FRAME} tokens, got {tokens.size}")
            ids.extend(vocab.visual_token(int(tok)) for tok in tokens)
        segs.extend([V.SEG_VISUAL] * TOKENS_PER_FRAME)
        frames.extend([t] * TOKENS_PER_FRAME)
    return TokenSequence(np.array(ids), np.array(segs), np.array(frames))


def clip_sequence_length(clip_len: int = 8) -> int:
    return 1 + (clip_len + 1) * TOKENS_PER_FRAME


class FrameInterpolator(MaskedStageMixin, BaseEstimator):
    """Keyframe-pair interpolation model over per-frame visual tokens."""

    _stage_name = "interp"
    _seed_tag = 0x3C42

    def __init__(
        self,
        layers: int = 2,
        heads: int = 2,
        width: int = 64,
        lr: float = 1e-3,
        batch_size: int = 4,
        steps: int = 800,
        clip_len: int = 8,
        seed: int = 0,
    ):
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
            max_len=clip_sequence_length(self.clip_len),
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
        n_clips = (len(tokens) - 1) // self.clip_len
        n = int(rng.integers(1, n_clips + 1))
        clip = tokens[(n - 1) * self.clip_len : n * self.clip_len + 1]
        seq = build_clip_sequence(list(clip), self.vocab_)
        target_region = (seq.segments == V.SEG_VISUAL) & (seq.frame_ids >= 1) & (seq.frame_ids < self.clip_len)
        return seq, target_region

    # -- generation ----------------------------------------------------------
    def interpolate(
        self,
        start_tokens: np.ndarray,
        end_tokens: np.ndarray,
        schedule: DecodeSchedule | None = None,
    ) -> np.ndarray:
        """Clip token grid [(T+1), 64]; boundary rows equal the inputs."""
        return self.interpolate_batch([(start_tokens, end_tokens)], schedule)[0]

    def interpolate_batch(self, pairs, schedule: DecodeSchedule | None = None, row_seeds=None) -> np.ndarray:
        self._ensure_model()
        schedule = schedule or DecodeSchedule()
        seqs = []
        for start_tokens, end_tokens in pairs:
            blocks = [np.asarray(start_tokens)] + [None] * (self.clip_len - 1) + [np.asarray(end_tokens)]
            seqs.append(build_clip_sequence(blocks, self.vocab_))
        ids = np.stack([s.ids for s in seqs])
        segs = np.stack([s.segments for s in seqs])
        frames = np.stack([s.frame_ids for s in seqs])
        out = iterative_decode_batch(ids, segs, frames, self.model_, schedule, self.vocab_, row_seeds)
        cond = ids != V.MASK
        assert np.array_equal(out[cond], ids[cond])
        codes = out[:, 1:] - self.vocab_.visual_offset
        return codes.reshape(len(pairs), self.clip_len + 1, TOKENS_PER_FRAME)


def stitch_video(clips: list[np.ndarray], codebook) -> np.ndarray:
    """Concatenate clip token grids (dropping duplicated boundary frames) and
    decode every row to pixels -> [N*T+1, H, W, 3]."""
    if not clips:
        raise ContractError("stitch_video needs at least one clip")
    rows = [np.asarray(clips[0], dtype=np.int64)]
    for i, clip in enumerate(clips[1:], start=2):
        clip = np.asarray(clip, dtype=np.int64)
        if not np.array_equal(rows[-1][-1], clip[0]):
            raise ContractError(f"clip {i} does not share its boundary keyframe with the previous clip")
        rows.append(clip[1:])
    grid = np.concatenate(rows)
    return codebook.inverse_transform(grid)
