"""Pure-copy probe: train on static sequences only; the optimal policy is
'copy the reference frame tokens', so the loss should collapse quickly if the
conditioning path works."""

import sys
import time

import numpy as np

import clipvid.data as D
from clipvid.data.generate import SequenceRecord, canonical_boxes, extract_label_sets
from clipvid.keyframes import KeyframeGenerator
from clipvid.tokenizer import PatchCodebook


def static_record(seed, seq_id):
    script = D.sample_event_script(seed)
    script.transitions = [[] for _ in range(D.NUM_TRANSITIONS)]
    frames, scenes = D.frames_from_script(script)
    layouts = [canonical_boxes(s) for s in scenes]
    return SequenceRecord(
        seq_id=seq_id, keyframe_indices=list(D.KEYFRAME_INDICES), layouts=layouts,
        label_sets=extract_label_sets(layouts), events=script.transitions,
        background_ids=[s.background for s in scenes], _frames=frames,
    )


steps = int(sys.argv[1]) if len(sys.argv) > 1 else 800
records = [static_record(10_000 + s, s) for s in range(400)]
cb = PatchCodebook(seed=0).fit(np.concatenate([r.frames for r in records[:50]]))
est = KeyframeGenerator(seed=0, width=64, layers=2, heads=2, lr=2e-3, batch_size=4).attach_codebook(cb)
est.steps = steps
t = time.time()


def progress(step, loss):
    if step % 100 == 99:
        print(f"  step {step + 1}: recent loss {np.mean(est.history_[-100:]):.4f} ({time.time() - t:.0f}s)", flush=True)


est.fit(records, callback=progress)
