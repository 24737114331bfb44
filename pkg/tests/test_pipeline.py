import json

import numpy as np
import pytest

import clipvid.data as D
from clipvid.config import PipelineConfig, StageConfig
from clipvid.errors import ContractError
from clipvid.nn import load_checkpoint, save_checkpoint
from clipvid.pipeline import (
    GenerationRequest,
    Pipeline,
    evaluate,
    generate_for_split,
    request_from_record,
    write_generation_artifacts,
)


class TestConfig:
    def test_roundtrip(self, tmp_path):
        cfg = PipelineConfig(decode_steps=5, seed=3, layout_model=StageConfig(width=32, steps=10))
        cfg.save(tmp_path / "config.json")
        again = PipelineConfig.load(tmp_path / "config.json")
        assert again == cfg

    def test_unknown_field_named(self, tmp_path):
        with open(tmp_path / "bad.json", "w") as f:
            json.dump({"canvas_sizes": 32}, f)
        with pytest.raises(ContractError, match="canvas_sizes"):
            PipelineConfig.load(tmp_path / "bad.json")

    def test_cross_field_validation(self):
        with pytest.raises(ContractError, match="patch_size"):
            PipelineConfig(canvas_size=32, patch_size=5)
        with pytest.raises(ContractError, match="decode_temperature"):
            PipelineConfig(decode_temperature=-0.5)
        with pytest.raises(ContractError, match="width"):
            PipelineConfig(keyframe_model=StageConfig(width=30, heads=4))

    def test_derived_fields(self):
        cfg = PipelineConfig()
        assert cfg.frames_per_sequence == 33
        assert cfg.vocab_size == 560


class TestCheckpointFile:
    def test_header_and_blob_roundtrip(self, tmp_path):
        rng = np.random.default_rng(0)
        params = {"a": rng.normal(size=(3, 4)).astype(np.float32), "b": rng.normal(size=(5,)).astype(np.float32)}
        path = tmp_path / "m.clpf"
        save_checkpoint(path, {"stage": "test", "width": 4}, params)
        raw = path.read_bytes()
        assert raw[:4] == b"CLPF"
        assert int.from_bytes(raw[4:8], "little") == 1
        hlen = int.from_bytes(raw[8:12], "little")
        header = json.loads(raw[12 : 12 + hlen])
        assert [p["name"] for p in header["params"]] == ["a", "b"]
        hp, arrays = load_checkpoint(path)
        assert hp == {"stage": "test", "width": 4}
        assert np.array_equal(arrays["a"], params["a"])
        assert np.array_equal(arrays["b"], params["b"])


@pytest.fixture(scope="module")
def pipe(tiny_config):
    return Pipeline(tiny_config)


@pytest.fixture(scope="module")
def test_records(small_dataset):
    return D.load_split(small_dataset, "test")


class TestGenerate:
    def test_missing_checkpoint_names_stage(self, tiny_config):
        broken = PipelineConfig.from_dict({**tiny_config.to_dict(), "interp_ckpt": "/nonexistent.clpf"})
        pipe = Pipeline(broken)
        with pytest.raises(ContractError, match="interp"):
            pipe.model("interp")

    def test_video_shape_and_keyframe_anchoring(self, pipe, test_records):
        request = request_from_record(test_records[0], use_gt_layouts=True)
        result = pipe.generate(request)
        assert result.video.shape == (33, 32, 32, 3)
        assert result.keyframes.shape == (4, 32, 32, 3)
        # stitched video anchors exactly on the decoded keyframes
        for n, idx in enumerate(result.keyframe_indices[1:]):
            assert np.array_equal(result.video[idx], result.keyframes[n])
        assert np.array_equal(result.video[0], pipe.codebook.decode(pipe.codebook.encode(test_records[0].frames[0])))

    def test_same_request_and_seed_identical(self, pipe, test_records):
        request = request_from_record(test_records[1])
        a = pipe.generate(request)
        b = pipe.generate(request)
        assert np.array_equal(a.video, b.video)
        assert a.request_id == b.request_id

    def test_row_independent_of_batch_composition(self, pipe, test_records):
        reqs = [request_from_record(r) for r in test_records[:3]]
        solo = pipe.generate(reqs[1])
        batched = pipe.generate_batch(reqs)
        assert np.array_equal(solo.video, batched[1].video)

    def test_explicit_layouts_skip_stage_one(self, pipe, test_records, tiny_config):
        # with layouts given, the layout checkpoint is never needed
        fresh = Pipeline(tiny_config)
        request = request_from_record(test_records[0], use_gt_layouts=True)
        result = fresh.generate(request)
        assert "layout" not in fresh._models
        assert not result.layouts_sampled

    def test_explicit_keyframes_skip_stage_two(self, pipe, test_records, tiny_config):
        fresh = Pipeline(tiny_config)
        rec = test_records[2]
        request = GenerationRequest(
            reference_frame=rec.frames[0],
            seed=5,
            keyframes=rec.keyframes()[1:],
        )
        result = fresh.generate(request)
        assert "keyframe" not in fresh._models and "layout" not in fresh._models
        # ground-truth keyframes decode losslessly, so anchors equal the originals
        for n, idx in enumerate(result.keyframe_indices[1:]):
            assert np.array_equal(result.video[idx], rec.keyframes()[n + 1])

    def test_guidance_validation(self, pipe, test_records):
        rec = test_records[0]
        req = request_from_record(rec)
        req.label_sets = None
        with pytest.raises(ContractError, match="exactly one"):
            pipe.generate(req)
        req2 = request_from_record(rec)
        req2.layouts = [None]
        with pytest.raises(ContractError, match="exactly one"):
            pipe.generate(req2)
        req3 = request_from_record(rec)
        req3.mode = "warp"
        with pytest.raises(ContractError, match="mode"):
            pipe.generate(req3)

    def test_baseline_modes(self, pipe, test_records):
        rec = test_records[0]
        for mode in ("sliding-window", "class-conditional-window"):
            request = request_from_record(rec, mode=mode)
            result = pipe.generate(request)
            assert result.video.shape == (33, 32, 32, 3)
            assert np.array_equal(result.video[0], pipe.codebook.decode(pipe.codebook.encode(rec.frames[0])))

    def test_artifact_directory(self, pipe, test_records, tmp_path):
        request = request_from_record(test_records[0], use_gt_layouts=True)
        result = pipe.generate(request)
        out = write_generation_artifacts(result, tmp_path / "gen", write_gif=True)
        names = {p.name for p in out.iterdir()}
        assert {"layouts.json", "keyframe_1.png", "keyframe_4.png", "keyframe_tokens.json",
                "frame_000.png", "frame_032.png", "frames.cfrm", "video.gif", "result.json"} <= names
        frames = D.read_frames(out / "frames.cfrm")
        assert np.array_equal(frames, result.video)
        with open(out / "layouts.json") as f:
            layouts = json.load(f)
        assert [l["timestep"] for l in layouts["layouts"]] == [0, 1, 2, 3, 4]


@pytest.fixture(scope="module")
def gt_pred_dir(small_dataset, tmp_path_factory):
    # predictions that are exact copies of the ground truth
    out = tmp_path_factory.mktemp("pred_gt")
    for rec in D.load_split(small_dataset, "test"):
        seq_dir = out / f"seq_{rec.seq_id:05d}"
        seq_dir.mkdir()
        D.write_frames(seq_dir / "frames.cfrm", rec.frames)
    return out


class TestEvaluate:
    def test_gt_copy_scores_perfect(self, gt_pred_dir, small_dataset, tmp_path):
        report = evaluate(gt_pred_dir, small_dataset, report_path=tmp_path / "report.json",
                          curve_csv_path=tmp_path / "curve.csv")
        assert report.corpus["psnr"] == 99.0
        assert report.corpus["ssim"] == 1.0
        assert report.corpus["frame_frechet"] < 1e-6
        assert report.corpus["video_frechet"] < 1e-6
        assert np.allclose(report.per_frame, 0.0)
        assert len(report.per_frame) == 33
        header = (tmp_path / "curve.csv").read_text().splitlines()[0]
        assert header == "frame,value"

    def test_two_runs_byte_identical(self, gt_pred_dir, small_dataset, tmp_path):
        evaluate(gt_pred_dir, small_dataset, report_path=tmp_path / "a.json")
        evaluate(gt_pred_dir, small_dataset, report_path=tmp_path / "b.json")
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_id_mismatch_lists_missing(self, small_dataset, tmp_path):
        pred = tmp_path / "pred"
        (pred / "seq_99999").mkdir(parents=True)
        rec = D.load_split(small_dataset, "test")[0]
        D.write_frames(pred / "seq_99999" / "frames.cfrm", rec.frames)
        with pytest.raises(ContractError, match="99999"):
            evaluate(pred, small_dataset)

    def test_generate_for_split_then_evaluate(self, pipe, small_dataset, tmp_path):
        out = generate_for_split(pipe, small_dataset, "test", tmp_path / "pred", limit=3)
        report = evaluate(out, small_dataset, split="test")
        assert report.corpus["num_sequences"] == 3
        assert 0 < report.corpus["psnr"] <= 99.0
