import math

import numpy as np
import pytest

import clipvid.vocab as V
from clipvid.errors import ContractError
from clipvid.nn import (
    DecodeSchedule,
    SequenceTransformer,
    TokenSequence,
    TransformerConfig,
    cosine_mask_ratio,
    iterative_decode,
    iterative_decode_batch,
    remaining_mask_counts,
)


def schedule_oracle(initial_masked, steps):
    """Expected remaining counts: ceil(cos(pi*s/2S) * M0); cos(pi/2) is exactly 0."""
    out = []
    for s in range(1, steps + 1):
        gamma = 0.0 if s == steps else math.cos(math.pi * s / (2 * steps))
        out.append(math.ceil(gamma * initial_masked))
    return out


def test_cosine_mask_ratio_endpoints_and_midpoint():
    assert cosine_mask_ratio(0.0) == 1.0
    assert cosine_mask_ratio(1.0) == 0.0
    assert cosine_mask_ratio(0.5) == pytest.approx(math.sqrt(2) / 2, abs=1e-12)


def test_cosine_mask_ratio_domain():
    with pytest.raises(ContractError):
        cosine_mask_ratio(-0.01)
    with pytest.raises(ContractError):
        cosine_mask_ratio(1.01)


@pytest.mark.parametrize("m0", [1, 64, 256])
@pytest.mark.parametrize("steps", [1, 4, 8])
def test_remaining_counts_match_formula(m0, steps):
    assert remaining_mask_counts(m0, steps) == schedule_oracle(m0, steps)


class RecordingModel:
    """Wraps a transformer and records remaining-mask counts per forward."""

    def __init__(self, model):
        self.model = model
        self.mask_counts = []

    @property
    def config(self):
        return self.model.config

    def forward(self, ids, segments, frame_ids):
        self.mask_counts.append(int((np.asarray(ids) == V.MASK).sum()))
        return self.model.forward(ids, segments, frame_ids)


def make_model(max_len=300, seed=0):
    cfg = TransformerConfig(vocab_size=V.DEFAULT_VOCAB.size, max_len=max_len, layers=1, heads=2, width=16, num_frames=4)
    return SequenceTransformer(cfg, seed=seed)


def masked_seq(m0, length=None, seed=0):
    length = length or m0 + 4
    rng = np.random.default_rng(seed)
    v = V.DEFAULT_VOCAB
    ids = rng.integers(v.visual_offset, v.size, size=length)
    segs = np.full(length, V.SEG_VISUAL)
    masked_at = rng.choice(length, size=m0, replace=False)
    ids[masked_at] = V.MASK
    return TokenSequence(ids, segs, np.zeros(length, int))


def test_zero_masks_returns_input_unchanged():
    m = make_model()
    seq = masked_seq(0, length=10)
    out = iterative_decode(seq, m, DecodeSchedule(steps=4, seed=1))
    assert np.array_equal(out.ids, seq.ids)


@pytest.mark.parametrize("m0,steps", [(1, 1), (1, 8), (64, 4), (64, 8), (256, 8)])
def test_decode_follows_schedule_counts(m0, steps):
    m = RecordingModel(make_model())
    seq = masked_seq(m0, length=max(m0 + 8, 32))
    out = iterative_decode(seq, m.model if steps == 0 else m, DecodeSchedule(steps=steps, temperature=1.0, seed=5))
    # counts observed at the start of each step: M0 then the remaining sequence
    expected = [m0] + schedule_oracle(m0, steps)[:-1]
    observed = m.mask_counts
    # steps that commit nothing still run a forward pass
    assert observed == [c for c in expected]
    assert not (out.ids == V.MASK).any()


def test_unmasked_positions_grow_monotonically_and_never_change():
    m = make_model()
    seq = masked_seq(40, length=64, seed=3)
    known_before = seq.ids != V.MASK
    out = iterative_decode(seq, m, DecodeSchedule(steps=6, temperature=1.0, seed=9))
    assert np.array_equal(out.ids[known_before], seq.ids[known_before])
    v = V.DEFAULT_VOCAB
    filled = out.ids[~known_before]
    assert ((filled >= v.visual_offset) & (filled < v.size)).all()


def test_single_step_equals_greedy_argmax_fill():
    m = make_model()
    seq = masked_seq(30, length=50, seed=2)
    out = iterative_decode(seq, m, DecodeSchedule(steps=1, temperature=0.0, seed=77))
    # oracle: one forward pass, argmax over the legal range at every mask
    logits = m.forward_sequence(seq)
    v = V.DEFAULT_VOCAB
    expected = seq.ids.copy()
    for pos in np.flatnonzero(seq.ids == V.MASK):
        lo, hi = v.segment_range(int(seq.segments[pos]))
        expected[pos] = lo + int(logits[pos, lo:hi].argmax())
    assert np.array_equal(out.ids, expected)
    # any temperature setting collapses to the same greedy fill when S=1
    out_t = iterative_decode(seq, m, DecodeSchedule(steps=1, temperature=1.0, seed=77))
    assert np.array_equal(out_t.ids, expected)


def test_decode_deterministic_given_seed():
    m = make_model()
    seq = masked_seq(25, length=40, seed=4)
    a = iterative_decode(seq, m, DecodeSchedule(steps=5, temperature=1.0, seed=123))
    b = iterative_decode(seq, m, DecodeSchedule(steps=5, temperature=1.0, seed=123))
    c = iterative_decode(seq, m, DecodeSchedule(steps=5, temperature=1.0, seed=124))
    assert np.array_equal(a.ids, b.ids)
    assert not np.array_equal(a.ids, c.ids)  # different seed explores differently


def test_segment_constrained_sampling_respects_ranges():
    m = make_model()
    v = V.DEFAULT_VOCAB
    rng = np.random.default_rng(8)
    length = 60
    ids = np.full(length, V.MASK)
    segs = np.empty(length, int)
    segs[:20] = V.SEG_CLASS
    segs[20:40] = V.SEG_COORD
    segs[40:] = V.SEG_VISUAL
    seq = TokenSequence(ids, segs, np.zeros(length, int))
    out = iterative_decode(seq, m, DecodeSchedule(steps=4, temperature=1.0, seed=6))
    for seg, sl in ((V.SEG_CLASS, slice(0, 20)), (V.SEG_COORD, slice(20, 40)), (V.SEG_VISUAL, slice(40, None))):
        lo, hi = v.segment_range(seg)
        chunk = out.ids[sl]
        assert ((chunk >= lo) & (chunk < hi)).all()


def test_batch_rows_decode_independently():
    m = make_model()
    seq = masked_seq(16, length=32, seed=10)
    single = iterative_decode(seq, m, DecodeSchedule(steps=4, temperature=0.0, seed=0))
    stacked = iterative_decode_batch(
        np.stack([seq.ids, seq.ids]),
        np.stack([seq.segments, seq.segments]),
        np.stack([seq.frame_ids, seq.frame_ids]),
        m,
        DecodeSchedule(steps=4, temperature=0.0, seed=0),
    )
    assert np.array_equal(stacked[0], single.ids)
    assert np.array_equal(stacked[1], single.ids)


def test_invalid_schedule_rejected():
    with pytest.raises(ContractError):
        DecodeSchedule(steps=0)
    with pytest.raises(ContractError):
        DecodeSchedule(steps=4, temperature=-1.0)
