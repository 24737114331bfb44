import numpy as np
import pytest
from sklearn.exceptions import NotFittedError

import clipvid.data as D
from clipvid.errors import ContractError
from clipvid.tokenizer import PatchCodebook


@pytest.fixture(scope="module")
def corpus():
    return np.concatenate([D.generate_sequence(s).frames for s in range(20)])


@pytest.fixture(scope="module")
def codebook(corpus):
    return PatchCodebook(seed=0).fit(corpus)


def test_uniform_color_corpus_gives_one_codeword_per_color():
    frames = np.stack([np.full((32, 32, 3), c, dtype=np.uint8) for c in D.PALETTE])
    cb = PatchCodebook().fit(frames)
    assert cb.exact_
    assert cb.n_active_ == 24
    for frame in frames:
        tokens = cb.encode(frame)
        assert np.array_equal(cb.decode(tokens), frame)


def test_exact_mode_on_sprite_corpus(codebook, corpus):
    assert codebook.exact_
    assert codebook.n_active_ <= 512


def test_roundtrip_pixel_identical_on_corpus(codebook, corpus):
    for frame in corpus[::7]:
        assert np.array_equal(codebook.decode(codebook.encode(frame)), frame)


def test_roundtrip_on_heldout_sequences(codebook):
    for seed in (1000, 1001):
        rec = D.generate_sequence(seed)
        for frame in rec.frames:
            assert np.array_equal(codebook.decode(codebook.encode(frame)), frame)


def test_build_deterministic(corpus):
    a = PatchCodebook(seed=3).fit(corpus)
    b = PatchCodebook(seed=3).fit(corpus)
    assert np.array_equal(a.codewords_, b.codewords_)


def test_frame_assembled_from_codewords_recovers_ids(codebook):
    rng = np.random.default_rng(0)
    ids = rng.integers(0, codebook.n_active_, size=64)
    frame = codebook.decode(ids)
    assert np.array_equal(codebook.encode(frame), ids)


def test_uniform_frame_encodes_to_one_repeated_id(codebook):
    color = D.PALETTE[5]
    frame = np.full((32, 32, 3), color, dtype=np.uint8)
    tokens = codebook.encode(frame)
    assert len(set(tokens.tolist())) == 1


def test_all_zero_tokens_tile_codeword_zero(codebook):
    frame = codebook.decode(np.zeros(64, dtype=int))
    patch = codebook.codewords_[0].reshape(4, 4, 3)
    assert np.array_equal(frame, np.tile(patch, (8, 8, 1)))


def test_single_token_substitution_changes_at_most_patch_pixels(codebook):
    rng = np.random.default_rng(2)
    for _ in range(20):
        ids = rng.integers(0, codebook.n_active_, size=64)
        pos = int(rng.integers(0, 64))
        sub = ids.copy()
        sub[pos] = (sub[pos] + 1 + rng.integers(0, codebook.n_active_ - 1)) % codebook.n_active_
        a = codebook.decode(ids)
        b = codebook.decode(sub)
        changed = int((a != b).any(axis=-1).sum())
        assert changed <= 16


def test_empty_corpus_rejected():
    with pytest.raises(ContractError):
        PatchCodebook().fit(np.empty((0, 32, 32, 3), dtype=np.uint8))


def test_unfitted_use_rejected():
    with pytest.raises(NotFittedError):
        PatchCodebook().encode(np.zeros((32, 32, 3), dtype=np.uint8))


def test_out_of_range_token_rejected(codebook):
    with pytest.raises(ContractError):
        codebook.decode(np.full(64, 512))


def test_save_load_bytes_roundtrip(codebook, tmp_path, corpus):
    path = tmp_path / "cb.ccbk"
    codebook.save(path)
    with open(path, "rb") as f:
        assert f.read(4) == b"CCBK"
    again = PatchCodebook.load(path)
    assert np.array_equal(again.codewords_, codebook.codewords_)
    assert again.n_active_ == codebook.n_active_
    frame = corpus[3]
    assert np.array_equal(again.encode(frame), codebook.encode(frame))


def test_transform_inverse_transform_batch(codebook, corpus):
    frames = corpus[:5]
    tokens = codebook.transform(frames)
    assert tokens.shape == (5, 64)
    back = codebook.inverse_transform(tokens)
    assert np.array_equal(back, frames)


def test_kmeans_fallback_on_rich_corpus():
    # gradient frames defeat the exact mode; k-means must still quantize
    rng = np.random.default_rng(1)
    frames = rng.integers(0, 256, size=(30, 32, 32, 3)).astype(np.uint8)
    cb = PatchCodebook(num_codes=32, iters=4, seed=0).fit(frames)
    assert not cb.exact_
    tokens = cb.encode(frames[0])
    assert tokens.shape == (64,)
    assert tokens.max() < 32
    # quantization error bounded by the k-means objective on the sample
    recon = cb.decode(tokens)
    assert recon.shape == (32, 32, 3)
