"""Calibration run for the direction acceptance criteria.

Trains reduced-step models on a 400/200 corpus and measures:
  - consistency(joint) vs consistency(sequential) with GT layouts
  - held-out NLL of class-conditional vs unconditional baselines
  - per-frame (1-SSIM) slope of sliding-window vs full pipeline
  - per-keyframe accuracy trend of sequential generation
Saves checkpoints under /tmp/clipvid_calib for reuse.
"""

import sys
import time
from pathlib import Path

import numpy as np

import clipvid.data as D
from clipvid.baseline import SlidingWindowBaseline
from clipvid.interp import FrameInterpolator, stitch_video
from clipvid.keyframes import KeyframeGenerator, SingleKeyframeGenerator
from clipvid.layouts import BoundingBox, Layout, LayoutGenerator
from clipvid.metrics import consistency_score, curve_slope, per_frame_curve
from clipvid.nn import DecodeSchedule
from clipvid.tokenizer import PatchCodebook

OUT = Path("/tmp/clipvid_calib")
OUT.mkdir(exist_ok=True)
N_TRAIN, N_TEST = 400, 200
CFG = dict(width=64, layers=2, heads=2)


def log(msg):
    print(f"[{time.strftime('%H:%M:%S')}] {msg}", flush=True)


def main():
    t0 = time.time()
    ds = OUT / "dataset"
    if not ds.exists():
        D.generate_dataset(ds, N_TRAIN, N_TEST, seed=77)
    train = D.load_split(ds, "train")
    test = D.load_split(ds, "test", limit=N_TEST)
    log(f"corpus ready ({time.time()-t0:.0f}s)")

    cb_path = OUT / "codebook.ccbk"
    if cb_path.exists():
        cb = PatchCodebook.load(cb_path)
    else:
        cb = PatchCodebook(seed=0).fit(np.concatenate([r.frames for r in train[:100]]))
        cb.save(cb_path)
    log(f"codebook active={cb.n_active_}")

    def get(name, builder, steps, lr=2e-3, batch_size=4):
        path = OUT / f"{name}.clpf"
        cls = builder if isinstance(builder, type) else None
        if path.exists():
            est = builder.load(path) if hasattr(builder, "load") else None
            if est is not None:
                if hasattr(est, "attach_codebook"):
                    est.attach_codebook(cb)
                log(f"{name}: loaded")
                return est
        kwargs = dict(CFG, steps=steps, lr=lr, batch_size=batch_size, seed=0)
        if builder is SlidingWindowBaseline and name.endswith("cond"):
            kwargs["class_conditional"] = True
        est = builder(**kwargs)
        if hasattr(est, "attach_codebook"):
            est.attach_codebook(cb)
        t = time.time()
        est.fit(train)
        est.save(path)
        log(f"{name}: trained {steps} steps in {time.time()-t:.0f}s, loss {est.history_[0]:.3f}->{np.mean(est.history_[-20:]):.3f}")
        return est

    layout = get("layout", LayoutGenerator, steps=600, lr=1.5e-3, batch_size=8)
    kf = get("kf", KeyframeGenerator, steps=500)
    kfs = get("kfs", SingleKeyframeGenerator, steps=500)
    interp = get("interp", FrameInterpolator, steps=500)
    base = get("base", SlidingWindowBaseline, steps=400)
    base_cond = get("base_cond", SlidingWindowBaseline, steps=400)

    def gt_layouts(rec):
        return [Layout(tuple(BoundingBox(b.class_id, b.x, b.y, b.w, b.h, object_id=b.object_id) for b in kb))
                for kb in rec.layouts]

    sched = DecodeSchedule(steps=4, temperature=1.0, seed=0)

    # ---- joint vs single consistency -------------------------------------
    t = time.time()
    cons_joint, cons_seq = [], []
    acc_per_n = np.zeros(4)
    acc_counts = 0
    BS = 16
    for start in range(0, len(test), BS):
        chunk = test[start:start+BS]
        reqs = [(cb.encode(r.frames[0]), gt_layouts(r)) for r in chunk]
        seeds = [1000 + r.seq_id for r in chunk]
        j = kf.generate_joint_batch(reqs, sched, seeds)
        s = kfs.generate_sequential_batch(reqs, sched, [x + 1 for x in seeds])
        for i, rec in enumerate(chunk):
            kf_idx = rec.keyframe_indices[1:]
            jf = cb.inverse_transform(j[i])
            sf = cb.inverse_transform(s[i])
            cons_joint.append(consistency_score(jf, rec.layouts[1:]).score)
            cons_seq.append(consistency_score(sf, rec.layouts[1:]).score)
            gt_tokens = cb.transform(rec.frames[kf_idx])
            acc_per_n += (s[i] == gt_tokens).mean(axis=1)
            acc_counts += 1
    acc_per_n /= acc_counts
    log(f"consistency joint={np.mean(cons_joint):.3f} sequential={np.mean(cons_seq):.3f} "
        f"direction={'OK' if np.mean(cons_joint) < np.mean(cons_seq) else 'FAIL'} ({time.time()-t:.0f}s)")
    log(f"sequential per-keyframe accuracy: {np.round(acc_per_n, 4).tolist()} "
        f"slope={np.polyfit(range(4), acc_per_n, 1)[0]:.5f}")

    # ---- guidance helps (NLL) --------------------------------------------
    t = time.time()
    nll_u = base.eval_nll(test, seed=123)
    nll_c = base_cond.eval_nll(test, seed=123)
    log(f"baseline NLL uncond={nll_u:.4f} cond={nll_c:.4f} direction={'OK' if nll_c < nll_u else 'FAIL'} ({time.time()-t:.0f}s)")

    # ---- degradation curves ------------------------------------------------
    t = time.time()
    curves_pipe, curves_base = [], []
    for start in range(0, len(test), BS):
        chunk = test[start:start+BS]
        ref_tok = [cb.encode(r.frames[0]) for r in chunk]
        # pipeline: sample layouts from guidance, then keyframes, then interp
        lay_out = layout.sample_batch(
            [(gt_layouts(r)[0], r.label_sets[1:]) for r in chunk], sched,
            [2000 + r.seq_id for r in chunk])
        kf_codes = kf.generate_joint_batch(
            [(ref_tok[i], [gt_layouts(chunk[i])[0]] + lay_out[i]) for i in range(len(chunk))],
            sched, [3000 + r.seq_id for r in chunk])
        pairs, seeds = [], []
        for i, rec in enumerate(chunk):
            bounds = np.concatenate([ref_tok[i][None], kf_codes[i]])
            for k in range(4):
                pairs.append((bounds[k], bounds[k+1]))
                seeds.append(4000 + rec.seq_id * 7 + k)
        clips = interp.interpolate_batch(pairs, sched, seeds)
        base_codes = base.generate_video_tokens_batch(
            [(ref_tok[i], None) for i in range(len(chunk))], 4, sched,
            [5000 + r.seq_id for r in chunk])
        for i, rec in enumerate(chunk):
            own = clips[i*4:(i+1)*4]
            vid_p = stitch_video(list(own), cb)
            vid_b = cb.inverse_transform(base_codes[i])
            curves_pipe.append(per_frame_curve(vid_p, rec.frames))
            curves_base.append(per_frame_curve(vid_b, rec.frames))
        log(f"  curves {start+len(chunk)}/{len(test)}")
    mp = np.stack(curves_pipe).mean(axis=0)
    mb = np.stack(curves_base).mean(axis=0)
    sp, sb = curve_slope(mp), curve_slope(mb)
    log(f"slopes pipeline={sp:.6f} baseline={sb:.6f} direction={'OK' if sb >= sp else 'FAIL'} ({time.time()-t:.0f}s)")
    log(f"pipeline curve: {np.round(mp, 4).tolist()}")
    log(f"baseline curve: {np.round(mb, 4).tolist()}")
    log(f"total {time.time()-t0:.0f}s")


if __name__ == "__main__":
    sys.exit(main())
