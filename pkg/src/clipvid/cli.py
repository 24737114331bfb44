"""Command-line interface.

Subcommands: gen-data, build-codebook, train-{layout,keyframe,
keyframe-single,interp,baseline}, generate, evaluate, serve.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import data as D
from .baseline import SlidingWindowBaseline
from .config import PipelineConfig, StageConfig
from .errors import ContractError, NumericError, ParseError
from .imgio import load_png
from .interp import FrameInterpolator
from .keyframes import KeyframeGenerator, SingleKeyframeGenerator
from .layouts import Layout, LayoutGenerator, layout_from_json
from .pipeline import (
    GenerationRequest,
    Pipeline,
    evaluate,
    generate_for_split,
    write_generation_artifacts,
)
from .tokenizer import PatchCodebook


def _log(msg: str):
    print(f"[clipvid] {msg}", flush=True)


def cmd_gen_data(args):
    t0 = time.time()
    out = D.generate_dataset(args.out, args.num_train, args.num_test, seed=args.seed, progress=_log)
    _log(f"dataset written to {out} in {time.time() - t0:.1f}s")


def cmd_build_codebook(args):
    records = D.load_split(args.data, "train", limit=args.limit)
    if not records:
        raise ContractError(f"no training sequences under {args.data}")
    _log(f"collecting patches from {len(records)} sequences")
    frames = np.concatenate([r.frames for r in records])
    cb = PatchCodebook(num_codes=args.k, seed=args.seed).fit(frames)
    cb.save(args.out)
    mode = "exact" if cb.exact_ else "k-means"
    _log(f"codebook ({mode}, {cb.n_active_} active of {args.k}) written to {args.out}")


_TRAINERS = {
    "layout": (LayoutGenerator, "layout_model", False),
    "keyframe": (KeyframeGenerator, "keyframe_model", True),
    "keyframe-single": (SingleKeyframeGenerator, "keyframe_single_model", True),
    "interp": (FrameInterpolator, "interp_model", True),
    "baseline": (SlidingWindowBaseline, "baseline_model", True),
}


def cmd_train(stage):
    def run(args):
        cls, _, needs_codebook = _TRAINERS[stage]
        records = D.load_split(args.data, "train", limit=args.limit)
        if not records:
            raise ContractError(f"no training sequences under {args.data}")
        kwargs = dict(
            layers=args.layers, heads=args.heads, width=args.width,
            lr=args.lr, batch_size=args.batch_size, steps=args.steps, seed=args.seed,
        )
        if stage == "baseline":
            kwargs["class_conditional"] = args.class_cond
        est = cls(**kwargs)
        if needs_codebook:
            est.attach_codebook(PatchCodebook.load(args.codebook))
        t0 = time.time()
        last = {"step": -1}

        def progress(step, loss):
            if step % max(1, args.steps // 20) == 0 or step == args.steps - 1:
                _log(f"{stage} step {step}/{args.steps} loss {loss:.4f}")
            last["step"] = step

        est.fit(records, callback=progress)
        est.save(args.ckpt)
        _log(f"{stage} trained for {last['step'] + 1} steps in {time.time() - t0:.1f}s -> {args.ckpt}")

    return run


def _load_guidance(path, num_keyframes):
    with open(path) as f:
        g = json.load(f)
    out = {"reference_layout": None, "label_sets": None, "layouts": None, "keyframes": None}
    if "reference_layout" in g:
        _, out["reference_layout"] = layout_from_json(g["reference_layout"])
    if "label_sets" in g:
        out["label_sets"] = [sorted(int(c) for c in s) for s in g["label_sets"]]
    if "layouts" in g:
        parsed = sorted((layout_from_json(l) for l in g["layouts"]), key=lambda t: t[0])
        lookup = dict(parsed)
        if 0 in lookup and out["reference_layout"] is None:
            out["reference_layout"] = lookup.pop(0)
        expected = list(range(1, num_keyframes + 1))
        if sorted(lookup) != expected:
            raise ContractError(f"guidance.layouts: expected timesteps {expected}, got {sorted(lookup)}")
        out["layouts"] = [lookup[n] for n in expected]
    if "keyframes" in g:
        base = Path(path).parent
        out["keyframes"] = np.stack([load_png(base / p) for p in g["keyframes"]])
    return out


def cmd_generate(args):
    config = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    pipe = Pipeline(config)
    if args.dataset:
        out = generate_for_split(
            pipe, args.dataset, args.split, args.out, mode=args.mode,
            limit=args.limit, use_gt_layouts=args.gt_layouts,
            write_gif=args.gif, progress=_log,
        )
        _log(f"predictions written to {out}")
        return
    if not args.ref or not args.guidance:
        raise ContractError("generate: provide --ref and --guidance (or --dataset for batch mode)")
    guidance = _load_guidance(args.guidance, config.num_keyframes)
    request = GenerationRequest(
        reference_frame=load_png(args.ref),
        mode=args.mode,
        seed=args.seed,
        reference_layout=guidance["reference_layout"],
        label_sets=guidance["label_sets"],
        layouts=guidance["layouts"],
        keyframes=guidance["keyframes"],
    )
    result = pipe.generate(request)
    out = write_generation_artifacts(result, args.out, write_gif=args.gif)
    _log(f"request {result.request_id}: video written to {out}")


def cmd_evaluate(args):
    config = PipelineConfig.load(args.config) if args.config else None
    curve_path = args.curve or (str(Path(args.out).with_suffix("")) + "_curve.csv")
    report = evaluate(
        args.pred, args.gt, split=args.split, config=config,
        report_path=args.out, curve_csv_path=curve_path,
    )
    _log(f"report written to {args.out} (curve: {curve_path})")
    for key, value in report.corpus.items():
        _log(f"  {key}: {value}")


def cmd_serve(args):
    import uvicorn

    from .service import create_app

    config = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    app = create_app(config)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clipvid", description="Guided long-video generation on sprite scenes")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate the procedural dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--num-train", type=int, default=5000)
    p.add_argument("--num-test", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("build-codebook", help="build the patch codebook from the train split")
    p.add_argument("--data", required=True)
    p.add_argument("--k", type=int, default=512)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--limit", type=int, default=None, help="cap on training sequences scanned")
    p.set_defaults(func=cmd_build_codebook)

    defaults = PipelineConfig()
    for stage, (_, cfg_attr, needs_codebook) in _TRAINERS.items():
        sc: StageConfig = getattr(defaults, cfg_attr)
        p = sub.add_parser(f"train-{stage}", help=f"train the {stage} model")
        p.add_argument("--data", required=True)
        p.add_argument("--ckpt", required=True)
        p.add_argument("--steps", type=int, default=sc.steps)
        p.add_argument("--lr", type=float, default=sc.lr)
        p.add_argument("--batch-size", type=int, default=sc.batch_size)
        p.add_argument("--layers", type=int, default=sc.layers)
        p.add_argument("--heads", type=int, default=sc.heads)
        p.add_argument("--width", type=int, default=sc.width)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--limit", type=int, default=None)
        if needs_codebook:
            p.add_argument("--codebook", required=True)
        if stage == "baseline":
            p.add_argument("--class-cond", action="store_true")
        p.set_defaults(func=cmd_train(stage))

    p = sub.add_parser("generate", help="run generation (single request or a dataset split)")
    p.add_argument("--config", default=None)
    p.add_argument("--ref", default=None, help="reference frame PNG")
    p.add_argument("--guidance", default=None, help="guidance JSON file")
    p.add_argument("--mode", choices=["pipeline", "sliding-window", "class-conditional-window"], default="pipeline")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--gif", action="store_true")
    p.add_argument("--dataset", default=None, help="batch mode: dataset directory")
    p.add_argument("--split", default="test")
    p.add_argument("--limit", type=int, default=None)
    p.add_argument("--gt-layouts", action="store_true", help="batch mode: condition on ground-truth layouts")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="score predictions against the ground truth split")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--out", required=True)
    p.add_argument("--curve", default=None)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("serve", help="start the HTTP generation service")
    p.add_argument("--config", default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (ContractError, ParseError, NumericError, FileNotFoundError, FileExistsError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
