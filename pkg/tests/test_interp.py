import numpy as np
import pytest

import clipvid.data as D
import clipvid.vocab as V
from clipvid.errors import ContractError
from clipvid.baseline import SlidingWindowBaseline, build_window_sequence, window_sequence_length
from clipvid.interp import FrameInterpolator, build_clip_sequence, clip_sequence_length, stitch_video
from clipvid.nn import DecodeSchedule
from clipvid.tokenizer import PatchCodebook


@pytest.fixture(scope="module")
def setup():
    records = [D.generate_sequence(s) for s in range(5)]
    frames = np.concatenate([r.frames for r in records])
    codebook = PatchCodebook(seed=0).fit(frames)
    return records, codebook


def test_clip_sequence_length():
    assert clip_sequence_length(8) == 1 + 9 * 64 == 577


def test_interpolation_copies_boundaries(setup):
    records, codebook = setup
    tokens = codebook.transform(records[0].frames)
    interp = FrameInterpolator(seed=0).attach_codebook(codebook)
    interp._build()
    clip = interp.interpolate(tokens[0], tokens[8], DecodeSchedule(steps=2, seed=4))
    assert clip.shape == (9, 64)
    assert np.array_equal(clip[0], tokens[0])
    assert np.array_equal(clip[-1], tokens[8])


def test_interpolation_deterministic(setup):
    records, codebook = setup
    tokens = codebook.transform(records[1].frames)
    interp = FrameInterpolator(seed=0).attach_codebook(codebook)
    interp._build()
    sched = DecodeSchedule(steps=3, seed=11)
    a = interp.interpolate(tokens[8], tokens[16], sched)
    b = interp.interpolate(tokens[8], tokens[16], sched)
    assert np.array_equal(a, b)


def test_stitch_single_clip(setup):
    records, codebook = setup
    tokens = codebook.transform(records[0].frames[:9])
    video = stitch_video([tokens], codebook)
    assert video.shape == (9, 32, 32, 3)
    assert np.array_equal(video, records[0].frames[:9])


def test_stitch_four_clips_gives_33_frames(setup):
    records, codebook = setup
    rec = records[2]
    tokens = codebook.transform(rec.frames)
    clips = [tokens[n * 8 : (n + 1) * 8 + 1] for n in range(4)]
    video = stitch_video(clips, codebook)
    assert video.shape[0] == 33
    assert np.array_equal(video, rec.frames)
    # keyframe positions decode exactly to the keyframe tokens
    for n, idx in enumerate(rec.keyframe_indices):
        assert np.array_equal(video[idx], codebook.decode(tokens[idx]))


def test_stitch_rejects_boundary_disagreement(setup):
    records, codebook = setup
    tokens = codebook.transform(records[0].frames)
    a = tokens[0:9].copy()
    b = tokens[8:17].copy()
    b[0, 0] = (b[0, 0] + 1) % codebook.n_active_
    with pytest.raises(ContractError, match="boundary"):
        stitch_video([a, b], codebook)


def test_interp_training_masks_only_intermediate_frames(setup):
    records, codebook = setup
    interp = FrameInterpolator(seed=0).attach_codebook(codebook)
    interp._build()
    rng = np.random.default_rng(1)
    ids, segs, frames, targets, mask = interp._masked_batch(records[:3], rng)
    assert mask.any()
    assert (segs[mask] == V.SEG_VISUAL).all()
    assert (frames[mask] >= 1).all() and (frames[mask] <= 7).all()


def test_interp_fit_and_roundtrip(setup, tmp_path):
    records, codebook = setup
    interp = FrameInterpolator(steps=20, batch_size=2, width=32, layers=1, heads=2, seed=0)
    interp.attach_codebook(codebook)
    interp.fit(records[:2])
    assert min(interp.history_[-5:]) < interp.history_[0]
    interp.save(tmp_path / "interp.clpf")
    again = FrameInterpolator.load(tmp_path / "interp.clpf")
    tokens = codebook.transform(records[0].frames)
    sched = DecodeSchedule(steps=2, seed=5)
    assert np.array_equal(
        interp.interpolate(tokens[0], tokens[8], sched),
        again.interpolate(tokens[0], tokens[8], sched),
    )


class TestBaseline:
    def test_window_sequence_lengths(self):
        assert window_sequence_length(8, False) == 577
        assert window_sequence_length(8, True) == 585

    def test_label_block_tokens(self, setup):
        records, codebook = setup
        tokens = codebook.transform(records[0].frames[:9])
        seq = build_window_sequence(list(tokens), [3, 3, 7], V.DEFAULT_VOCAB)
        v = V.DEFAULT_VOCAB
        assert list(seq.ids[1:9]) == [v.class_token(3), v.class_token(3), v.class_token(7)] + [V.PAD] * 5

    def test_single_window_generation(self, setup):
        records, codebook = setup
        tokens = codebook.transform(records[0].frames)
        model = SlidingWindowBaseline(seed=0).attach_codebook(codebook)
        model._build()
        out = model.generate_video_tokens(tokens[0], None, num_windows=1, schedule=DecodeSchedule(steps=2, seed=3))
        assert out.shape == (9, 64)
        assert np.array_equal(out[0], tokens[0])

    def test_rollout_deterministic_under_seed(self, setup):
        records, codebook = setup
        rec = records[3]
        tokens = codebook.transform(rec.frames)
        model = SlidingWindowBaseline(class_conditional=True, seed=0).attach_codebook(codebook)
        model._build()
        sched = DecodeSchedule(steps=2, seed=8)
        a = model.generate_video_tokens(tokens[0], rec.label_sets[1:], num_windows=4, schedule=sched)
        b = model.generate_video_tokens(tokens[0], rec.label_sets[1:], num_windows=4, schedule=sched)
        assert a.shape == (33, 64)
        assert np.array_equal(a, b)

    def test_class_conditional_requires_labels(self, setup):
        records, codebook = setup
        tokens = codebook.transform(records[0].frames)
        model = SlidingWindowBaseline(class_conditional=True, seed=0).attach_codebook(codebook)
        model._build()
        with pytest.raises(ContractError):
            model.generate_video_tokens(tokens[0], None, num_windows=2)

    def test_fit_and_eval_nll(self, setup):
        records, codebook = setup
        model = SlidingWindowBaseline(steps=15, batch_size=2, width=32, layers=1, heads=2, seed=0)
        model.attach_codebook(codebook)
        model.fit(records[:2])
        nll = model.eval_nll(records[2:4], seed=5)
        assert np.isfinite(nll) and nll > 0
