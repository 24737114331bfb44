"""Resume-train the calibration models and re-measure the joint-vs-single
consistency direction at increasing training budgets."""

import sys
import time

import numpy as np

import clipvid.data as D
from clipvid.keyframes import KeyframeGenerator, SingleKeyframeGenerator
from clipvid.layouts import BoundingBox, Layout
from clipvid.metrics import consistency_score
from clipvid.nn import Adam, DecodeSchedule
from clipvid.tokenizer import PatchCodebook

OUT = "/tmp/clipvid_calib"


def log(msg):
    print(f"[{time.strftime('%H:%M:%S')}] {msg}", flush=True)


def resume_fit(est, records, extra_steps, seed_offset=1):
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([est._seed_tag, est.seed, seed_offset])))
    opt = Adam(est.model_.params, lr=est.lr)
    losses = []
    for step in range(extra_steps):
        batch = [records[i] for i in rng.integers(0, len(records), size=est.batch_size)]
        losses.append(est.train_step(batch, opt, rng))
        if step % 200 == 199:
            log(f"  +{step + 1}: loss {np.mean(losses[-100:]):.4f}")
    return losses


def gt_layouts(rec):
    return [Layout(tuple(BoundingBox(b.class_id, b.x, b.y, b.w, b.h, object_id=b.object_id) for b in kb))
            for kb in rec.layouts]


def measure(kf, kfs, cb, test, n_eval=100):
    sched = DecodeSchedule(steps=4, temperature=1.0, seed=0)
    cons_joint, cons_seq = [], []
    flat = 0
    for start in range(0, n_eval, 20):
        chunk = test[start:start + 20]
        reqs = [(cb.encode(r.frames[0]), gt_layouts(r)) for r in chunk]
        seeds = [1000 + r.seq_id for r in chunk]
        j = kf.generate_joint_batch(reqs, sched, seeds)
        s = kfs.generate_sequential_batch(reqs, sched, [x + 1 for x in seeds])
        for i, rec in enumerate(chunk):
            jf = cb.inverse_transform(j[i])
            sf = cb.inverse_transform(s[i])
            cons_joint.append(consistency_score(jf, rec.layouts[1:]).score)
            cons_seq.append(consistency_score(sf, rec.layouts[1:]).score)
            if all(len(np.unique(f.reshape(-1, 3), axis=0)) == 1 for f in jf):
                flat += 1
    return np.mean(cons_joint), np.mean(cons_seq), flat


def main():
    extra = int(sys.argv[1]) if len(sys.argv) > 1 else 500
    rounds = int(sys.argv[2]) if len(sys.argv) > 2 else 3
    cb = PatchCodebook.load(f"{OUT}/codebook.ccbk")
    train = D.load_split(f"{OUT}/dataset", "train")
    test = D.load_split(f"{OUT}/dataset", "test", limit=100)
    kf = KeyframeGenerator.load(f"{OUT}/kf.clpf").attach_codebook(cb)
    kfs = SingleKeyframeGenerator.load(f"{OUT}/kfs.clpf").attach_codebook(cb)
    kf._prepare(train)
    kfs._prepare(train)
    total = 500  # from the initial calibration
    for r in range(rounds):
        t = time.time()
        log(f"resume kf +{extra}")
        resume_fit(kf, train, extra, seed_offset=10 + r)
        log(f"resume kfs +{extra} ({time.time()-t:.0f}s)")
        resume_fit(kfs, train, extra, seed_offset=10 + r)
        total += extra
        kf.save(f"{OUT}/kf.clpf")
        kfs.save(f"{OUT}/kfs.clpf")
        t = time.time()
        cj, cs, flat = measure(kf, kfs, cb, test)
        log(f"@{total} steps: joint={cj:.4f} seq={cs:.4f} flat_joint={flat}/100 "
            f"direction={'OK' if cj < cs else 'FAIL'} (measure {time.time()-t:.0f}s)")


if __name__ == "__main__":
    main()
