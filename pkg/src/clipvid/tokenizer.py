"""Patch-codebook visual tokenizer.

Frames are cut into non-overlapping square patches; each patch maps to the
nearest codeword by L2. On the sprite corpus the distinct-patch count is far
below the codebook capacity, so the codebook stores the patches themselves
and the round trip is exact. When the corpus is richer than the capacity the
build falls back to k-means with k-means++ seeding.
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .errors import ContractError, ParseError

CODEBOOK_MAGIC = b"CCBK"


def _as_frames(frames) -> np.ndarray:
    arr = np.asarray(frames, dtype=np.uint8)
    if arr.ndim == 3:
        arr = arr[None]
    if arr.ndim != 4 or arr.shape[-1] != 3:
        raise ContractError(f"expected frames shaped [..., H, W, 3], got {arr.shape}")
    return arr


def frame_to_patches(frame: np.ndarray, patch_size: int) -> np.ndarray:
    """[H/p * W/p, p*p*3] patch matrix in row-major grid order."""
    h, w, c = frame.shape
    if h % patch_size or w % patch_size:
        raise ContractError(f"frame {h}x{w} not divisible by patch size {patch_size}")
    gh, gw = h // patch_size, w // patch_size
    view = frame.reshape(gh, patch_size, gw, patch_size, c)
    return view.transpose(0, 2, 1, 3, 4).reshape(gh * gw, patch_size * patch_size * c)


def patches_to_frame(patches: np.ndarray, patch_size: int, height: int, width: int) -> np.ndarray:
    gh, gw = height // patch_size, width // patch_size
    view = patches.reshape(gh, gw, patch_size, patch_size, 3)
    return view.transpose(0, 2, 1, 3, 4).reshape(height, width, 3)


class PatchCodebook(BaseEstimator, TransformerMixin):
    """sklearn-style tokenizer: fit builds the codebook, transform encodes.

    Attributes after fit: `codewords_` [K, p*p*3] uint8, `n_active_` (count of
    distinct codewords; the padding duplicates beyond it are never selected
    because ties resolve to the lowest id), `exact_` (True when the corpus
    patch set fit inside the capacity).
    """

    def __init__(self, num_codes: int = 512, patch_size: int = 4, iters: int = 20, seed: int = 0):
        self.num_codes = num_codes
        self.patch_size = patch_size
        self.iters = iters
        self.seed = seed

    # ------------------------------------------------------------------ fit
    def fit(self, frames, y=None):
        frames = _as_frames(frames)
        if frames.size == 0:
            raise ContractError("cannot build a codebook from an empty corpus")
        dim = self.patch_size * self.patch_size * 3
        distinct = np.empty((0, dim), dtype=np.uint8)
        reservoir = []
        rng = np.random.Generator(np.random.PCG64(self.seed))
        chunk = 256
        for start in range(0, len(frames), chunk):
            patches = np.concatenate(
                [frame_to_patches(f, self.patch_size) for f in frames[start : start + chunk]]
            )
            if distinct.shape[0] <= 8 * self.num_codes:
                distinct = np.unique(np.concatenate([distinct, patches]), axis=0)
            # bounded sample kept around for the k-means fallback
            if len(reservoir) < 64:
                reservoir.append(patches[rng.integers(0, len(patches), size=min(4096, len(patches)))])
        if distinct.shape[0] <= self.num_codes:
            pad = np.repeat(distinct[:1], self.num_codes - distinct.shape[0], axis=0)
            self.codewords_ = np.concatenate([distinct, pad]).astype(np.uint8)
            self.n_active_ = int(distinct.shape[0])
            self.exact_ = True
        else:
            sample = np.concatenate(reservoir).astype(np.float64)
            centers = self._kmeans(sample, distinct.astype(np.float64), rng)
            self.codewords_ = np.clip(np.rint(centers), 0, 255).astype(np.uint8)
            self.n_active_ = self.num_codes
            self.exact_ = False
        return self

    def _kmeans(self, data: np.ndarray, distinct: np.ndarray, rng) -> np.ndarray:
        k = self.num_codes
        # k-means++ seeding over the distinct patch set
        centers = np.empty((k, data.shape[1]))
        centers[0] = distinct[rng.integers(len(distinct))]
        d2 = ((distinct - centers[0]) ** 2).sum(axis=1)
        for i in range(1, k):
            probs = d2 / d2.sum() if d2.sum() > 0 else np.full(len(distinct), 1 / len(distinct))
            centers[i] = distinct[rng.choice(len(distinct), p=probs)]
            d2 = np.minimum(d2, ((distinct - centers[i]) ** 2).sum(axis=1))
        for _ in range(self.iters):
            assign = self._nearest(data, centers)
            for i in range(k):
                members = data[assign == i]
                if len(members):
                    centers[i] = members.mean(axis=0)
        self.inertia_ = float(((data - centers[self._nearest(data, centers)]) ** 2).sum())
        return centers

    @staticmethod
    def _nearest(patches: np.ndarray, codewords: np.ndarray) -> np.ndarray:
        # argmin over ||p - c||^2 = ||p||^2 - 2 p.c + ||c||^2; ties -> lowest id
        p = patches.astype(np.float64)
        c = codewords.astype(np.float64)
        out = np.empty(len(p), dtype=np.int64)
        for start in range(0, len(p), 65536):
            blk = p[start : start + 65536]
            d = (blk * blk).sum(axis=1, keepdims=True) - 2.0 * (blk @ c.T) + (c * c).sum(axis=1)
            out[start : start + 65536] = d.argmin(axis=1)
        return out

    def _check_fitted(self):
        if not hasattr(self, "codewords_"):
            raise NotFittedError("PatchCodebook must be fit (or loaded) before use")

    # ----------------------------------------------------------- encode side
    def encode(self, frame: np.ndarray) -> np.ndarray:
        """Token grid (flattened row-major) for one frame."""
        self._check_fitted()
        frame = np.asarray(frame, dtype=np.uint8)
        patches = frame_to_patches(frame, self.patch_size)
        return self._nearest(patches, self.codewords_).astype(np.int64)

    def decode(self, tokens: np.ndarray, height: int = 32, width: int = 32) -> np.ndarray:
        self._check_fitted()
        tokens = np.asarray(tokens, dtype=np.int64).reshape(-1)
        if tokens.min(initial=0) < 0 or tokens.max(initial=0) >= self.num_codes:
            raise ContractError(f"token id outside 0..{self.num_codes - 1}")
        expected = (height // self.patch_size) * (width // self.patch_size)
        if tokens.size != expected:
            raise ContractError(f"expected {expected} tokens for {height}x{width}, got {tokens.size}")
        return patches_to_frame(self.codewords_[tokens], self.patch_size, height, width)

    def transform(self, frames) -> np.ndarray:
        """Encode a batch: [F, H, W, 3] -> [F, tokens]."""
        frames = _as_frames(frames)
        return np.stack([self.encode(f) for f in frames])

    def inverse_transform(self, token_grids, height: int = 32, width: int = 32) -> np.ndarray:
        token_grids = np.atleast_2d(np.asarray(token_grids, dtype=np.int64))
        return np.stack([self.decode(t, height, width) for t in token_grids])

    # ------------------------------------------------------------ persistence
    def save(self, path):
        self._check_fitted()
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as f:
                f.write(CODEBOOK_MAGIC)
                f.write(struct.pack("<HHH", self.num_codes, self.patch_size, 3))
                f.write(self.codewords_.tobytes())
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    @classmethod
    def load(cls, path) -> "PatchCodebook":
        with open(path, "rb") as f:
            magic = f.read(4)
            if magic != CODEBOOK_MAGIC:
                raise ParseError(f"{path}: bad codebook magic {magic!r}")
            k, patch, channels = struct.unpack("<HHH", f.read(6))
            buf = f.read(k * patch * patch * channels)
        if len(buf) != k * patch * patch * channels:
            raise ParseError(f"{path}: truncated codebook payload")
        cb = cls(num_codes=k, patch_size=patch)
        cb.codewords_ = np.frombuffer(buf, dtype=np.uint8).reshape(k, patch * patch * channels).copy()
        # padding duplicates the first codeword; the first repeat marks the active count
        active = k
        first = cb.codewords_[0]
        for i in range(1, k):
            if np.array_equal(cb.codewords_[i], first):
                active = i
                break
        cb.n_active_ = active
        cb.exact_ = active < k or k == 1
        return cb
