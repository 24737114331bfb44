"""Stage 2: joint keyframe generation from the reference frame tokens and the
layout sequence, plus the iterative single-frame baseline.

The joint training/decoding sequence concatenates, in order: [BOS], the
reference frame's visual tokens, one layout slot per timestep 0..N, then the
visual tokens of keyframes 1..N.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from . import vocab as V
from .errors import ContractError
from .layouts import BoundingBox, Layout, SLOT_LEN, layout_slot_entries, slot_tokens
from .nn import (
    DecodeSchedule,
    SequenceTransformer,
    TokenSequence,
    TransformerConfig,
    iterative_decode_batch,
)
from .training import MaskedStageMixin

TOKENS_PER_FRAME = 64  # 8x8 patch grid


def build_joint_sequence(
    ref_tokens: np.ndarray,
    layouts: list[Layout],
    known_keyframes: list[np.ndarray | None],
    vocab: V.Vocabulary | None = None,
) -> TokenSequence:
    """Assemble {e0, L0..LN, e1..eN} with [MASK] for unknown keyframes.

    `ref_tokens` and entries of `known_keyframes` are codebook code ids
    (0..K-1); layout list covers timesteps 0..N.
    """
    vocab = vocab or V.DEFAULT_VOCAB
    num_keyframes = len(layouts) - 1
    if len(known_keyframes) != num_keyframes:
        raise ContractError(
            f"expected {num_keyframes} keyframe slots for {len(layouts)} layouts, got {len(known_keyframes)}"
        )
    ref_tokens = np.asarray(ref_tokens, dtype=np.int64).reshape(-1)
    if ref_tokens.size != TOKENS_PER_FRAME:
        raise ContractError(f"reference frame must carry {TOKENS_PER_FRAME} tokens, got {ref_tokens.size}")

    ids = [V.BOS]
    segs = [V.SEG_SPECIAL]
    frames = [0]
    ids.extend(vocab.visual_token(int(t)) for t in ref_tokens)
    segs.extend([V.SEG_VISUAL] * TOKENS_PER_FRAME)
    frames.extend([0] * TOKENS_PER_FRAME)
    for n, layout in enumerate(layouts):
        i, s, f = slot_tokens(layout_slot_entries(layout), vocab, n)
        ids.extend(i)
        segs.extend(s)
        frames.extend(f)
    for n, tokens in enumerate(known_keyframes, start=1):
        if tokens is None:
            ids.extend([V.MASK] * TOKENS_PER_FRAME)
        else:
            tokens = np.asarray(tokens, dtype=np.int64).reshape(-1)
            if tokens.size != TOKENS_PER_FRAME:
                raise ContractError(f"keyframe {n} must carry {TOKENS_PER_FRAME} tokens, got {tokens.size}")
            ids.extend(vocab.visual_token(int(t)) for t in tokens)
        segs.extend([V.SEG_VISUAL] * TOKENS_PER_FRAME)
        frames.extend([n] * TOKENS_PER_FRAME)
    return TokenSequence(np.array(ids), np.array(segs), np.array(frames))


def joint_sequence_length(num_keyframes: int = 4) -> int:
    return 1 + TOKENS_PER_FRAME + (num_keyframes + 1) * SLOT_LEN + num_keyframes * TOKENS_PER_FRAME


def _record_layouts(record) -> list[Layout]:
    return [
        Layout(tuple(BoundingBox(b.class_id, b.x, b.y, b.w, b.h) for b in kb))
        for kb in record.layouts
    ]


class KeyframeGenerator(MaskedStageMixin, BaseEstimator):
    """Joint keyframe model: one decode fills every target keyframe at once."""

    _stage_name = "keyframe"
    _seed_tag = 0x2B51

    def __init__(
        self,
        layers: int = 2,
        heads: int = 2,
        width: int = 64,
        lr: float = 1e-3,
        batch_size: int = 4,
        steps: int = 800,
        num_keyframes: int = 4,
        seed: int = 0,
    ):
        self.layers = layers
        self.heads = heads
        self.width = width
        self.lr = lr
        self.batch_size = batch_size
        self.steps = steps
        self.num_keyframes = num_keyframes
        self.seed = seed

    def _build(self):
        self.vocab_ = V.DEFAULT_VOCAB
        cfg = TransformerConfig(
            vocab_size=self.vocab_.size,
            max_len=joint_sequence_length(self.num_keyframes),
            layers=self.layers,
            heads=self.heads,
            width=self.width,
            num_frames=self.num_keyframes + 1,
        )
        self.model_ = SequenceTransformer(cfg, seed=self.seed)
        self._token_cache = {}
        return self

    # -- data --------------------------------------------------------------
    def attach_codebook(self, codebook):
        self.codebook_ = codebook
        return self

    def _keyframe_tokens(self, record) -> np.ndarray:
        if not hasattr(self, "codebook_"):
            raise ContractError("attach_codebook() before training on pixel records")
        cached = self._token_cache.get(record.seq_id)
        if cached is None:
            cached = self.codebook_.transform(record.keyframes())
            self._token_cache[record.seq_id] = cached
        return cached

    def _prepare(self, records):
        for r in records:
            self._keyframe_tokens(r)

    def _example(self, record, rng):
        tokens = self._keyframe_tokens(record)
        seq = build_joint_sequence(
            tokens[0], _record_layouts(record), list(tokens[1:]), self.vocab_
        )
        target_region = (seq.segments == V.SEG_VISUAL) & (seq.frame_ids >= 1)
        return seq, target_region

    # -- generation ----------------------------------------------------------
    def generate_joint(
        self,
        ref_tokens: np.ndarray,
        layouts: list[Layout],
        schedule: DecodeSchedule | None = None,
    ) -> np.ndarray:
        """Decode all target keyframes simultaneously -> [N, 64] code grid."""
        grids = self.generate_joint_batch([(ref_tokens, layouts)], schedule)
        return grids[0]

    def generate_joint_batch(self, requests, schedule: DecodeSchedule | None = None, row_seeds=None) -> np.ndarray:
        """Batched variant: requests are (ref_tokens, layouts) pairs."""
        self._ensure_model()
        schedule = schedule or DecodeSchedule()
        seqs = []
        for ref_tokens, layouts in requests:
            if len(layouts) != self.num_keyframes + 1:
                raise ContractError(
                    f"expected {self.num_keyframes + 1} layouts (reference included), got {len(layouts)}"
                )
            seqs.append(
                build_joint_sequence(ref_tokens, layouts, [None] * self.num_keyframes, self.vocab_)
            )
        ids = np.stack([s.ids for s in seqs])
        segs = np.stack([s.segments for s in seqs])
        frames = np.stack([s.frame_ids for s in seqs])
        out = iterative_decode_batch(ids, segs, frames, self.model_, schedule, self.vocab_, row_seeds)
        # condition region must be untouched by decoding
        cond = ids != V.MASK
        assert np.array_equal(out[cond], ids[cond])
        tail = out[:, -self.num_keyframes * TOKENS_PER_FRAME :]
        codes = tail - self.vocab_.visual_offset
        return codes.reshape(len(seqs), self.num_keyframes, TOKENS_PER_FRAME)


class SingleKeyframeGenerator(KeyframeGenerator):
    """Ablation baseline: a one-step model applied iteratively, conditioning
    each keyframe only on its predecessor and the two adjacent layouts."""

    _stage_name = "keyframe-single"
    _seed_tag = 0x2B52

    def __init__(
        self,
        layers: int = 2,
        heads: int = 2,
        width: int = 64,
        lr: float = 1e-3,
        batch_size: int = 4,
        steps: int = 800,
        seed: int = 0,
    ):
        super().__init__(
            layers=layers, heads=heads, width=width, lr=lr,
            batch_size=batch_size, steps=steps, num_keyframes=1, seed=seed,
        )

    def get_params(self, deep=True):
        params = super().get_params(deep=deep)
        params.pop("num_keyframes", None)
        return params

    def _example(self, record, rng):
        tokens = self._keyframe_tokens(record)
        layouts = _record_layouts(record)
        n = int(rng.integers(1, len(layouts)))  # random transition
        seq = build_joint_sequence(
            tokens[n - 1], [layouts[n - 1], layouts[n]], [tokens[n]], self.vocab_
        )
        target_region = (seq.segments == V.SEG_VISUAL) & (seq.frame_ids >= 1)
        return seq, target_region

    def generate_sequential(
        self,
        ref_tokens: np.ndarray,
        layouts: list[Layout],
        schedule: DecodeSchedule | None = None,
    ) -> np.ndarray:
        return self.generate_sequential_batch([(ref_tokens, layouts)], schedule)[0]

    def generate_sequential_batch(self, requests, schedule: DecodeSchedule | None = None, row_seeds=None) -> np.ndarray:
        """N sequential single-keyframe decodes, each fed forward."""
        self._ensure_model()
        schedule = schedule or DecodeSchedule()
        if row_seeds is None:
            row_seeds = [schedule.seed + r for r in range(len(requests))]
        num_targets = len(requests[0][1]) - 1
        prev = np.stack([np.asarray(r[0], dtype=np.int64).reshape(-1) for r in requests])
        outputs = np.empty((len(requests), num_targets, TOKENS_PER_FRAME), dtype=np.int64)
        for n in range(1, num_targets + 1):
            step_requests = [
                (prev[i], [requests[i][1][n - 1], requests[i][1][n]]) for i in range(len(requests))
            ]
            # distinct seed per transition keeps draws independent but reproducible
            step_seeds = [s + 7919 * (n - 1) for s in row_seeds]
            codes = KeyframeGenerator.generate_joint_batch(self, step_requests, schedule, step_seeds)
            outputs[:, n - 1] = codes[:, 0]
            prev = codes[:, 0]
        return outputs
