"""Train one keyframe model (with grid embeddings) and log the loss curve."""

import sys
import time

import numpy as np

import clipvid.data as D
from clipvid.keyframes import KeyframeGenerator
from clipvid.tokenizer import PatchCodebook

steps = int(sys.argv[1]) if len(sys.argv) > 1 else 1200
cb = PatchCodebook.load("/tmp/clipvid_calib/codebook.ccbk")
train = D.load_split("/tmp/clipvid_calib/dataset", "train")

est = KeyframeGenerator(seed=0, width=64, layers=2, heads=2, lr=2e-3, batch_size=4).attach_codebook(cb)
est.steps = steps
t = time.time()


def progress(step, loss):
    if step % 100 == 99:
        print(f"  step {step + 1}: recent loss {np.mean(est.history_[-100:]):.4f} ({time.time() - t:.0f}s)", flush=True)


est.fit(train, callback=progress)
est.save("/tmp/clipvid_calib/kf_grid.clpf")
print("saved /tmp/clipvid_calib/kf_grid.clpf", flush=True)
