"""Shared masked-token training loop for the stage estimators.

Each estimator supplies `_example(record) -> (TokenSequence, target_region)`;
the mixin handles cosine-ratio mask sampling, the optimizer loop, held-out
NLL evaluation, and checkpoint round trips.
"""

from __future__ import annotations

import math

import numpy as np

from . import vocab as V
from .errors import ContractError
from .nn import Adam, cosine_mask_ratio, load_checkpoint, masked_nll, save_checkpoint
from .nn import tensor as T


class MaskedStageMixin:
    """fit/train_step/eval_nll over records with per-example masked targets."""

    _seed_tag = 0x57A6E

    def _example(self, record, rng):
        raise NotImplementedError

    def _build(self):
        raise NotImplementedError

    def _ensure_model(self):
        if not hasattr(self, "model_"):
            self._build()

    def _prepare(self, records):
        """Hook for one-time per-corpus work (e.g. token caches)."""

    def _masked_batch(self, records, rng):
        seqs, regions = zip(*(self._example(r, rng) for r in records))
        ids = np.stack([s.ids for s in seqs])
        segs = np.stack([s.segments for s in seqs])
        frames = np.stack([s.frame_ids for s in seqs])
        targets = ids.copy()
        mask = np.zeros_like(ids, dtype=bool)
        for b, region in enumerate(regions):
            pos = np.flatnonzero(region)
            if pos.size == 0:
                continue
            ratio = cosine_mask_ratio(float(rng.random()))
            k = max(1, int(math.ceil(ratio * pos.size)))
            chosen = rng.choice(pos, size=k, replace=False)
            mask[b, chosen] = True
            ids[b, chosen] = V.MASK
        return ids, segs, frames, targets, mask

    def fit(self, records, y=None, callback=None):
        if not records:
            raise ContractError("fit requires a nonempty record list")
        self._build()
        self._prepare(records)
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([self._seed_tag, self.seed])))
        opt = Adam(self.model_.params, lr=self.lr)
        self.history_ = []
        for step in range(self.steps):
            batch = [records[i] for i in rng.integers(0, len(records), size=self.batch_size)]
            loss = self.train_step(batch, opt, rng)
            self.history_.append(loss)
            if callback and callback(step, loss):
                break
        return self

    def train_step(self, records, opt: Adam, rng) -> float:
        ids, segs, frames, targets, mask = self._masked_batch(records, rng)
        if not mask.any():
            raise ContractError("batch produced no masked positions")
        logits = self.model_.forward(ids, segs, frames)
        loss = masked_nll(logits, targets, mask)
        self.model_.zero_grad()
        loss.backward()
        opt.step()
        return loss.item()

    def eval_nll(self, records, seed: int = 0, batch_size: int = 16) -> float:
        """Masked NLL on held-out records; the mask draw is seeded so two
        models with identically shaped target regions see the same masks."""
        self._ensure_model()
        self._prepare(records)
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([0xE7A1, seed])))
        total, count = 0.0, 0
        for start in range(0, len(records), batch_size):
            chunk = records[start : start + batch_size]
            ids, segs, frames, targets, mask = self._masked_batch(chunk, rng)
            with T.no_grad():
                logits = self.model_.forward(ids, segs, frames)
            total += masked_nll(logits, targets, mask).item() * len(chunk)
            count += len(chunk)
        return total / max(count, 1)

    # ------------------------------------------------------------ checkpoints
    _stage_name = "stage"

    def save(self, path):
        self._ensure_model()
        hp = {
            "stage": self._stage_name,
            "estimator": self.get_params(),
            "model": self.model_.config.to_dict(),
        }
        save_checkpoint(path, hp, self.model_.param_arrays())

    @classmethod
    def load(cls, path):
        hp, arrays = load_checkpoint(path)
        if hp.get("stage") != cls._stage_name:
            raise ContractError(
                f"{path} holds a '{hp.get('stage')}' checkpoint, expected '{cls._stage_name}'"
            )
        est = cls(**hp["estimator"])
        est._build()
        est.model_.load_param_arrays(arrays)
        return est
