"""Minimal positional-copy task, run on both the in-repo transformer and an
identically shaped torch reference, to isolate where learning stalls.

Task: 64 visible tokens (random codes) then 64 masked slots; target is a
positional copy of the first block. Loss should approach zero quickly.
"""

import sys
import time

import numpy as np

import clipvid.vocab as V
from clipvid.nn import Adam, SequenceTransformer, TransformerConfig, masked_nll

VOCAB = 560
L = 129  # [BOS] + 64 + 64
CODES = 24


def make_batch(rng, batch=4):
    codes = rng.integers(0, CODES, size=(batch, 64))
    ids = np.full((batch, L), V.BOS, dtype=np.int64)
    ids[:, 1:65] = V.DEFAULT_VOCAB.visual_offset + codes
    ids[:, 65:] = V.MASK
    targets = ids.copy()
    targets[:, 65:] = V.DEFAULT_VOCAB.visual_offset + codes
    segs = np.zeros((batch, L), dtype=np.int64)
    segs[:, 1:] = V.SEG_VISUAL
    frames = np.zeros((batch, L), dtype=np.int64)
    frames[:, 65:] = 1
    mask = np.zeros((batch, L), dtype=bool)
    mask[:, 65:] = True
    return ids, segs, frames, targets, mask


def run_ours(steps, lr=2e-3, width=64, layers=2, heads=2):
    cfg = TransformerConfig(vocab_size=VOCAB, max_len=L, layers=layers, heads=heads, width=width, num_frames=2)
    model = SequenceTransformer(cfg, seed=0)
    opt = Adam(model.params, lr=lr)
    rng = np.random.default_rng(0)
    t = time.time()
    for step in range(steps):
        ids, segs, frames, targets, mask = make_batch(rng)
        logits = model.forward(ids, segs, frames)
        loss = masked_nll(logits, targets, mask)
        model.zero_grad()
        loss.backward()
        opt.step()
        if step % 100 == 99:
            print(f"  ours step {step + 1}: {loss.item():.4f} ({time.time() - t:.0f}s)", flush=True)


def run_torch(steps, lr=2e-3, width=64, layers=2, heads=2):
    import torch
    import torch.nn as nn

    torch.manual_seed(0)

    class Block(nn.Module):
        def __init__(self):
            super().__init__()
            self.ln1 = nn.LayerNorm(width)
            self.attn = nn.MultiheadAttention(width, heads, batch_first=True)
            self.ln2 = nn.LayerNorm(width)
            self.mlp = nn.Sequential(nn.Linear(width, 4 * width), nn.GELU(), nn.Linear(4 * width, width))

        def forward(self, x):
            h = self.ln1(x)
            a, _ = self.attn(h, h, h, need_weights=False)
            x = x + a
            return x + self.mlp(self.ln2(x))

    class Model(nn.Module):
        def __init__(self):
            super().__init__()
            self.tok = nn.Embedding(VOCAB, width)
            self.pos = nn.Embedding(L, width)
            self.seg = nn.Embedding(4, width)
            self.frm = nn.Embedding(4, width)
            self.blocks = nn.ModuleList(Block() for _ in range(layers))
            self.lnf = nn.LayerNorm(width)
            self.head = nn.Linear(width, VOCAB)
            for p in self.parameters():
                if p.dim() > 1:
                    nn.init.normal_(p, std=0.02)

        def forward(self, ids, segs, frames):
            pos = torch.arange(ids.shape[1])
            x = self.tok(ids) + self.pos(pos)[None] + self.seg(segs) + self.frm(frames)
            for b in self.blocks:
                x = b(x)
            return self.head(self.lnf(x))

    model = Model()
    opt = torch.optim.Adam(model.parameters(), lr=lr)
    ce = nn.CrossEntropyLoss()
    rng = np.random.default_rng(0)
    t = time.time()
    for step in range(steps):
        ids, segs, frames, targets, mask = make_batch(rng)
        logits = model(torch.from_numpy(ids), torch.from_numpy(segs), torch.from_numpy(frames))
        loss = ce(logits[torch.from_numpy(mask)], torch.from_numpy(targets)[torch.from_numpy(mask)])
        opt.zero_grad()
        loss.backward()
        opt.step()
        if step % 100 == 99:
            print(f"  torch step {step + 1}: {loss.item():.4f} ({time.time() - t:.0f}s)", flush=True)


if __name__ == "__main__":
    steps = int(sys.argv[2]) if len(sys.argv) > 2 else 600
    if sys.argv[1] == "ours":
        run_ours(steps)
    else:
        run_torch(steps)
