"""Bidirectional transformer over tagged token sequences.

One architecture serves all stages: token + learned absolute position +
segment + frame-index embeddings, pre-norm full-attention blocks, and a
linear head back onto the shared vocabulary.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from ..errors import ContractError, ShapeError
from . import tensor as T
from .tensor import Tensor


@dataclass(frozen=True)
class TokenSequence:
    """One tagged sequence: ids plus per-position segment and frame tags."""

    ids: np.ndarray
    segments: np.ndarray
    frame_ids: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "ids", np.asarray(self.ids, dtype=np.int64))
        object.__setattr__(self, "segments", np.asarray(self.segments, dtype=np.int64))
        object.__setattr__(self, "frame_ids", np.asarray(self.frame_ids, dtype=np.int64))
        if not (self.ids.shape == self.segments.shape == self.frame_ids.shape):
            raise ShapeError("ids/segments/frame_ids must share one shape")

    def __len__(self) -> int:
        return int(self.ids.shape[-1])

    def copy(self) -> "TokenSequence":
        return TokenSequence(self.ids.copy(), self.segments.copy(), self.frame_ids.copy())


@dataclass(frozen=True)
class TransformerConfig:
    vocab_size: int
    max_len: int
    layers: int = 4
    heads: int = 4
    width: int = 128
    num_segments: int = 4
    num_frames: int = 16
    mlp_ratio: int = 4
    dropout: float = 0.0
    grid_size: int = 8  # visual blocks are grid_size^2 cells; 0 disables grid embeddings
    dtype: str = "float32"

    def __post_init__(self):
        if self.width % self.heads != 0:
            raise ContractError(f"width {self.width} not divisible by heads {self.heads}")

    def to_dict(self) -> dict:
        return asdict(self)


class SequenceTransformer:
    """Full (non-causal) self-attention encoder with a vocabulary head."""

    def __init__(self, config: TransformerConfig, seed: int = 0):
        self.config = config
        self.params: dict[str, Tensor] = {}
        self._init_params(np.random.Generator(np.random.PCG64(seed)))

    def _add_param(self, name: str, value: np.ndarray):
        p = Tensor(value.astype(self.config.dtype), requires_grad=True, name=name)
        self.params[name] = p
        return p

    def _init_params(self, rng: np.random.Generator):
        cfg = self.config
        d = cfg.width
        std = 0.02
        self._add_param("tok_emb", rng.normal(0, std, (cfg.vocab_size, d)))
        self._add_param("pos_emb", rng.normal(0, std, (cfg.max_len, d)))
        self._add_param("seg_emb", rng.normal(0, std, (cfg.num_segments, d)))
        self._add_param("frame_emb", rng.normal(0, std, (cfg.num_frames, d)))
        if cfg.grid_size > 0:
            self._add_param("row_emb", rng.normal(0, std, (cfg.grid_size, d)))
            self._add_param("col_emb", rng.normal(0, std, (cfg.grid_size, d)))
        for i in range(cfg.layers):
            pre = f"layer{i}."
            self._add_param(pre + "ln1_g", np.ones(d))
            self._add_param(pre + "ln1_b", np.zeros(d))
            self._add_param(pre + "wq", rng.normal(0, std, (d, d)))
            self._add_param(pre + "wk", rng.normal(0, std, (d, d)))
            self._add_param(pre + "wv", rng.normal(0, std, (d, d)))
            self._add_param(pre + "wo", rng.normal(0, std, (d, d)))
            self._add_param(pre + "bq", np.zeros(d))
            self._add_param(pre + "bk", np.zeros(d))
            self._add_param(pre + "bv", np.zeros(d))
            self._add_param(pre + "bo", np.zeros(d))
            self._add_param(pre + "ln2_g", np.ones(d))
            self._add_param(pre + "ln2_b", np.zeros(d))
            h = d * cfg.mlp_ratio
            self._add_param(pre + "w1", rng.normal(0, std, (d, h)))
            self._add_param(pre + "b1", np.zeros(h))
            self._add_param(pre + "w2", rng.normal(0, std, (h, d)))
            self._add_param(pre + "b2", np.zeros(d))
        self._add_param("lnf_g", np.ones(d))
        self._add_param("lnf_b", np.zeros(d))
        self._add_param("head_w", rng.normal(0, std, (d, cfg.vocab_size)))
        self._add_param("head_b", np.zeros(cfg.vocab_size))

    # ------------------------------------------------------------- forward
    def forward(self, ids, segments, frame_ids, train_rng: np.random.Generator | None = None) -> Tensor:
        """Logits over the vocabulary for a [B, L] (or [L]) id batch."""
        cfg = self.config
        p = self.params
        ids = np.atleast_2d(np.asarray(ids, dtype=np.int64))
        segments = np.atleast_2d(np.asarray(segments, dtype=np.int64))
        frame_ids = np.atleast_2d(np.asarray(frame_ids, dtype=np.int64))
        B, L = ids.shape
        if L > cfg.max_len:
            raise ContractError(f"sequence length {L} exceeds max_len {cfg.max_len}")
        if ids.max(initial=0) >= cfg.vocab_size or ids.min(initial=0) < 0:
            raise ContractError("token id outside vocabulary")
        if frame_ids.max(initial=0) >= cfg.num_frames:
            raise ContractError("frame index outside embedding table")

        x = T.embedding(p["tok_emb"], ids)
        x = x + T.embedding(p["pos_emb"], np.broadcast_to(np.arange(L), (B, L)))
        x = x + T.embedding(p["seg_emb"], segments)
        x = x + T.embedding(p["frame_emb"], frame_ids)
        if cfg.grid_size > 0:
            # factored in-frame coordinates for visual cells: every visual
            # block holds exactly grid_size^2 tokens in row-major order, so
            # the cell index is the per-row running count of visual positions
            from .. import vocab as _vocab

            vis = segments == _vocab.SEG_VISUAL
            if vis.any():
                cells = (np.cumsum(vis, axis=1) - 1) % (cfg.grid_size**2)
                rows = np.where(vis, cells // cfg.grid_size, 0)
                cols = np.where(vis, cells % cfg.grid_size, 0)
                vis_f = vis[..., None].astype(x.data.dtype)
                x = x + T.embedding(p["row_emb"], rows) * Tensor(vis_f)
                x = x + T.embedding(p["col_emb"], cols) * Tensor(vis_f)

        nh = cfg.heads
        dh = cfg.width // nh
        scale = float(1.0 / np.sqrt(dh))  # plain float: keeps scores at the model dtype
        drop = cfg.dropout if train_rng is not None else 0.0

        for i in range(cfg.layers):
            pre = f"layer{i}."
            h = T.layer_norm(x, p[pre + "ln1_g"], p[pre + "ln1_b"])
            q = (h @ p[pre + "wq"] + p[pre + "bq"]).reshape(B, L, nh, dh).transpose(0, 2, 1, 3)
            k = (h @ p[pre + "wk"] + p[pre + "bk"]).reshape(B, L, nh, dh).transpose(0, 2, 1, 3)
            v = (h @ p[pre + "wv"] + p[pre + "bv"]).reshape(B, L, nh, dh).transpose(0, 2, 1, 3)
            scores = (q @ k.transpose(0, 1, 3, 2)) * scale
            attn = T.softmax(scores, axis=-1)
            ctx = (attn @ v).transpose(0, 2, 1, 3).reshape(B, L, cfg.width)
            ctx = ctx @ p[pre + "wo"] + p[pre + "bo"]
            if drop > 0.0:
                ctx = T.dropout(ctx, drop, train_rng)
            x = x + ctx
            h = T.layer_norm(x, p[pre + "ln2_g"], p[pre + "ln2_b"])
            h = T.gelu(h @ p[pre + "w1"] + p[pre + "b1"])
            h = h @ p[pre + "w2"] + p[pre + "b2"]
            if drop > 0.0:
                h = T.dropout(h, drop, train_rng)
            x = x + h

        x = T.layer_norm(x, p["lnf_g"], p["lnf_b"])
        return x @ p["head_w"] + p["head_b"]

    def forward_sequence(self, seq: TokenSequence) -> np.ndarray:
        """Inference-only logits [L, V] for a single tagged sequence."""
        with T.no_grad():
            out = self.forward(seq.ids, seq.segments, seq.frame_ids)
        return out.data[0]

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def param_arrays(self) -> dict[str, np.ndarray]:
        return {k: v.data for k, v in self.params.items()}

    def load_param_arrays(self, arrays: dict[str, np.ndarray]):
        for k, p in self.params.items():
            if k not in arrays:
                raise ContractError(f"missing parameter '{k}' in checkpoint")
            if arrays[k].shape != p.data.shape:
                raise ShapeError(f"parameter '{k}' shape {arrays[k].shape} != expected {p.data.shape}")
            p.data = arrays[k].astype(p.data.dtype)


def transformer_forward(seq: TokenSequence, model: SequenceTransformer) -> np.ndarray:
    """Logits matrix [len x vocab] for one sequence."""
    return model.forward_sequence(seq)


def masked_nll(logits, targets, mask) -> Tensor:
    """Mean NLL of target ids at masked positions (see masked_cross_entropy)."""
    if not isinstance(logits, Tensor):
        logits = Tensor(np.asarray(logits, dtype=np.float32))
    return T.masked_cross_entropy(logits, targets, mask)
