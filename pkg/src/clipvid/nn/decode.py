"""Iterative parallel decoding of [MASK] positions under a cosine schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import vocab as V
from ..errors import ContractError
from . import tensor as T
from .model import SequenceTransformer, TokenSequence


@dataclass(frozen=True)
class DecodeSchedule:
    steps: int = 8
    temperature: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.steps < 1:
            raise ContractError("decode schedule needs at least one step")
        if self.temperature < 0:
            raise ContractError("temperature must be nonnegative")


def cosine_mask_ratio(u: float) -> float:
    """cos(pi*u/2) for u in [0, 1], exact 1 and 0 at the endpoints."""
    if not 0.0 <= u <= 1.0:
        raise ContractError(f"mask-ratio argument {u} outside [0, 1]")
    # sin form hits 0.0 exactly at u=1 where cos(pi/2) would leave ~6e-17
    return math.sin(0.5 * math.pi * (1.0 - u))


def remaining_mask_counts(initial_masked: int, steps: int) -> list[int]:
    """Masked-position count remaining after each step 1..steps."""
    return [math.ceil(cosine_mask_ratio(s / steps) * initial_masked) for s in range(1, steps + 1)]


def _legal_logits(logits: np.ndarray, segments: np.ndarray, vocabulary: V.Vocabulary) -> np.ndarray:
    """Mask ids outside each position's segment range to -inf."""
    out = logits.astype(np.float64, copy=True)
    for seg in np.unique(segments):
        lo, hi = vocabulary.segment_range(int(seg))
        sel = segments == seg
        out[sel, :lo] = -np.inf
        out[sel, hi:] = -np.inf
    return out


def iterative_decode_batch(
    ids: np.ndarray,
    segments: np.ndarray,
    frame_ids: np.ndarray,
    model: SequenceTransformer,
    schedule: DecodeSchedule,
    vocabulary: V.Vocabulary | None = None,
    row_seeds=None,
) -> np.ndarray:
    """Fill every [MASK] in a [B, L] batch over `schedule.steps` rounds.

    Each round commits the highest-confidence sampled tokens so that the
    remaining-mask count follows the cosine schedule; committed positions are
    never re-masked. Every row draws from its own seeded RNG (row r defaults
    to schedule.seed + r), so a row's output is a pure function of its own
    content and seed, independent of what else shares the batch.
    """
    vocabulary = vocabulary or V.DEFAULT_VOCAB
    ids = np.atleast_2d(np.asarray(ids, dtype=np.int64)).copy()
    segments = np.atleast_2d(np.asarray(segments, dtype=np.int64))
    frame_ids = np.atleast_2d(np.asarray(frame_ids, dtype=np.int64))
    B, L = ids.shape
    masked0 = ids == V.MASK
    m0_counts = masked0.sum(axis=1)
    if int(m0_counts.sum()) == 0:
        return ids

    if row_seeds is None:
        row_seeds = [schedule.seed + r for r in range(B)]
    if len(row_seeds) != B:
        raise ContractError(f"{len(row_seeds)} row seeds for a batch of {B}")
    rngs = [np.random.Generator(np.random.PCG64(int(s))) for s in row_seeds]
    S = schedule.steps
    for s in range(1, S + 1):
        still = ids == V.MASK
        if not still.any():
            break
        with T.no_grad():
            logits = model.forward(ids, segments, frame_ids).data
        # temperature annealed linearly to zero; final step is always greedy
        tau = schedule.temperature * (S - s) / S
        for b in range(B):
            pos = np.flatnonzero(still[b])
            if pos.size == 0:
                continue
            target_remaining = math.ceil(cosine_mask_ratio(s / S) * int(m0_counts[b]))
            commit = pos.size - target_remaining
            if commit <= 0:
                continue
            row_logits = _legal_logits(logits[b, pos], segments[b, pos], vocabulary)
            if tau > 0.0:
                z = row_logits / tau
                z -= z.max(axis=-1, keepdims=True)
                probs = np.exp(z)
                probs /= probs.sum(axis=-1, keepdims=True)
                cum = probs.cumsum(axis=-1)
                draws = rngs[b].random((pos.size, 1))
                choice = (cum < draws).sum(axis=-1)
                conf = probs[np.arange(pos.size), choice]
            else:
                choice = row_logits.argmax(axis=-1)
                # degenerate tau: rank by the untempered probability of the pick
                z = row_logits - row_logits.max(axis=-1, keepdims=True)
                probs = np.exp(z)
                probs /= probs.sum(axis=-1, keepdims=True)
                conf = probs[np.arange(pos.size), choice]
            # stable sort keeps the lowest position index on confidence ties
            order = np.argsort(-conf, kind="stable")[:commit]
            ids[b, pos[order]] = choice[order]
    assert not (ids == V.MASK).any(), "decode left masked positions"
    return ids


def iterative_decode(
    seq: TokenSequence,
    model: SequenceTransformer,
    schedule: DecodeSchedule,
    vocabulary: V.Vocabulary | None = None,
) -> TokenSequence:
    """Single-sequence wrapper around iterative_decode_batch."""
    out = iterative_decode_batch(seq.ids, seq.segments, seq.frame_ids, model, schedule, vocabulary)
    return TokenSequence(out[0], seq.segments.copy(), seq.frame_ids.copy())
