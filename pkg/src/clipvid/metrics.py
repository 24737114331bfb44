"""Evaluation metrics: PSNR, SSIM, Fréchet distance over fixed handcrafted
features (reported as "FD-proxy"), cross-keyframe appearance consistency, and
per-frame degradation curves.

The FD-proxy features replace pretrained-network embeddings: per frame an 8x8
grayscale downsample plus 8-bin per-channel histograms; per video the mean
and standard deviation of the frame features plus frame-difference statistics.
FD-proxy numbers are not comparable to published FID/FVD values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, NumericError, ShapeError

PSNR_CAP_DB = 99.0
SSIM_WINDOW = 7
SSIM_C1 = (0.01 * 255) ** 2
SSIM_C2 = (0.03 * 255) ** 2
FRECHET_RIDGE = 1e-6


def psnr(pred: np.ndarray, gt: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB over 8-bit frames; capped at 99 dB."""
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ShapeError(f"psnr shapes differ: {pred.shape} vs {gt.shape}")
    mse = np.mean((pred.astype(np.float64) - gt.astype(np.float64)) ** 2)
    if mse == 0:
        return PSNR_CAP_DB
    return min(float(10.0 * np.log10(255.0**2 / mse)), PSNR_CAP_DB)


def _window_means(x: np.ndarray, win: int) -> np.ndarray:
    """Mean over every full win x win window (valid region)."""
    view = np.lib.stride_tricks.sliding_window_view(x, (win, win))
    return view.mean(axis=(-2, -1))


def ssim(pred: np.ndarray, gt: np.ndarray, window: int = SSIM_WINDOW) -> float:
    """Mean structural similarity with a uniform window, valid-region only,
    averaged over channels."""
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ShapeError(f"ssim shapes differ: {pred.shape} vs {gt.shape}")
    if pred.ndim == 2:
        pred = pred[..., None]
        gt = gt[..., None]
    h, w, channels = pred.shape
    if h < window or w < window:
        raise ContractError(f"frame {h}x{w} smaller than the {window}x{window} window")
    scores = []
    for c in range(channels):
        x = pred[..., c].astype(np.float64)
        y = gt[..., c].astype(np.float64)
        mu_x = _window_means(x, window)
        mu_y = _window_means(y, window)
        mu_xx = _window_means(x * x, window)
        mu_yy = _window_means(y * y, window)
        mu_xy = _window_means(x * y, window)
        var_x = mu_xx - mu_x**2
        var_y = mu_yy - mu_y**2
        cov = mu_xy - mu_x * mu_y
        num = (2 * mu_x * mu_y + SSIM_C1) * (2 * cov + SSIM_C2)
        den = (mu_x**2 + mu_y**2 + SSIM_C1) * (var_x + var_y + SSIM_C2)
        scores.append(float((num / den).mean()))
    return float(np.mean(scores))


# ---------------------------------------------------------------- features

FRAME_FEATURE_DIM = 64 + 3 * 8


def frame_features(frame: np.ndarray) -> np.ndarray:
    """88-dim fixed descriptor: 8x8 grayscale downsample + per-channel
    8-bin histograms (mass-normalized), both on [0, 1] scales."""
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim != 3 or frame.shape[-1] != 3:
        raise ContractError(f"expected an H x W x 3 frame, got {frame.shape}")
    gray = frame.mean(axis=-1) / 255.0
    h, w = gray.shape
    bh, bw = h // 8, w // 8
    down = gray[: bh * 8, : bw * 8].reshape(8, bh, 8, bw).mean(axis=(1, 3))
    hists = [
        np.histogram(frame[..., c], bins=8, range=(0, 256))[0] / frame[..., c].size
        for c in range(3)
    ]
    return np.concatenate([down.reshape(-1), *hists])


def video_features(frames: np.ndarray) -> np.ndarray:
    """Per-video descriptor: temporal mean/std of frame features plus
    mean/std of successive frame-difference magnitudes."""
    frames = np.asarray(frames)
    if frames.ndim != 4:
        raise ContractError(f"expected [F, H, W, 3] video, got {frames.shape}")
    per_frame = np.stack([frame_features(f) for f in frames])
    diffs = np.abs(np.diff(frames.astype(np.float64), axis=0)).mean(axis=(1, 2, 3)) / 255.0
    if diffs.size == 0:
        diff_stats = np.zeros(2)
    else:
        diff_stats = np.array([diffs.mean(), diffs.std()])
    return np.concatenate([per_frame.mean(axis=0), per_frame.std(axis=0), diff_stats])


def extract_features(frames: np.ndarray, per_frame: bool = True) -> np.ndarray:
    """Feature matrix: one row per frame, or one row for the whole video."""
    frames = np.asarray(frames)
    if per_frame:
        if frames.ndim == 3:
            frames = frames[None]
        return np.stack([frame_features(f) for f in frames])
    return video_features(frames)[None]


# ---------------------------------------------------------------- Fréchet


def _sqrtm_psd(mat: np.ndarray) -> np.ndarray:
    """Square root of a symmetric PSD matrix via eigendecomposition."""
    sym = (mat + mat.T) / 2.0
    try:
        vals, vecs = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as e:
        cond = np.abs(sym).max()
        raise NumericError(f"eigendecomposition failed (max |entry| {cond:.3e}): {e}") from e
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def frechet_distance(features_a: np.ndarray, features_b: np.ndarray, ridge: float = FRECHET_RIDGE) -> float:
    """Fréchet (2-Wasserstein between Gaussians) distance of two feature sets.

    ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a^1/2 S_b S_a^1/2)^1/2), with a
    ridge added to both covariance diagonals for stability.
    """
    a = np.atleast_2d(np.asarray(features_a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(features_b, dtype=np.float64))
    if a.shape[1] != b.shape[1]:
        raise ShapeError(f"feature dims differ: {a.shape[1]} vs {b.shape[1]}")
    if a.shape[0] < 2 or b.shape[0] < 2:
        raise ContractError("need at least two samples per side to estimate covariances")
    mu_a, mu_b = a.mean(axis=0), b.mean(axis=0)
    cov_a = np.cov(a, rowvar=False) + ridge * np.eye(a.shape[1])
    cov_b = np.cov(b, rowvar=False) + ridge * np.eye(b.shape[1])
    root_a = _sqrtm_psd(cov_a)
    inner = _sqrtm_psd(root_a @ cov_b @ root_a)
    dist = float(((mu_a - mu_b) ** 2).sum() + np.trace(cov_a + cov_b - 2.0 * inner))
    return max(dist, 0.0)


# ------------------------------------------------------------- consistency


@dataclass(frozen=True)
class ConsistencyResult:
    score: float
    num_recurring: int

    @property
    def has_recurring(self) -> bool:
        return self.num_recurring > 0

    def __float__(self):
        return self.score


def _crop_rescaled(frame: np.ndarray, box, size: int = 8) -> np.ndarray:
    h, w = frame.shape[:2]
    left = int(round((box.x - box.w / 2) * w))
    right = int(round((box.x + box.w / 2) * w))
    top = int(round((box.y - box.h / 2) * h))
    bottom = int(round((box.y + box.h / 2) * h))
    left, top = max(left, 0), max(top, 0)
    right, bottom = min(max(right, left + 1), w), min(max(bottom, top + 1), h)
    crop = frame[top:bottom, left:right]
    ys = np.floor((np.arange(size) + 0.5) * crop.shape[0] / size).astype(int)
    xs = np.floor((np.arange(size) + 0.5) * crop.shape[1] / size).astype(int)
    return crop[np.ix_(ys, xs)].astype(np.float64)


def consistency_score(keyframes: np.ndarray, layouts) -> ConsistencyResult:
    """Mean pairwise appearance distance of recurring objects' crops.

    For every object id appearing in two or more keyframes, its boxes are
    cropped, rescaled to 8x8 (nearest neighbor), and compared pairwise by
    per-pixel RMS intensity distance; per-id means are averaged. Lower is
    more consistent; 0 when nothing recurs (flagged via num_recurring).
    """
    keyframes = np.asarray(keyframes)
    if len(keyframes) != len(layouts):
        raise ShapeError(f"{len(keyframes)} keyframes but {len(layouts)} layouts")
    crops: dict[int, list[np.ndarray]] = {}
    for frame, layout in zip(keyframes, layouts):
        boxes = layout.boxes if hasattr(layout, "boxes") else layout
        for box in boxes:
            oid = getattr(box, "object_id", None)
            if oid is None:
                continue
            crops.setdefault(oid, []).append(_crop_rescaled(frame, box))
    per_id = []
    for occurrences in crops.values():
        if len(occurrences) < 2:
            continue
        dists = []
        for i in range(len(occurrences)):
            for j in range(i + 1, len(occurrences)):
                diff = occurrences[i] - occurrences[j]
                dists.append(float(np.sqrt(np.mean(diff**2))))
        per_id.append(float(np.mean(dists)))
    if not per_id:
        return ConsistencyResult(0.0, 0)
    return ConsistencyResult(float(np.mean(per_id)), len(per_id))


# ------------------------------------------------------------ frame curves


def per_frame_curve(pred_video: np.ndarray, gt_video: np.ndarray) -> np.ndarray:
    """Per-frame (1 - SSIM) for one video pair."""
    pred_video = np.asarray(pred_video)
    gt_video = np.asarray(gt_video)
    if len(pred_video) != len(gt_video):
        raise ShapeError(f"video lengths differ: {len(pred_video)} vs {len(gt_video)}")
    return np.array([1.0 - ssim(p, g) for p, g in zip(pred_video, gt_video)])


def curve_slope(curve: np.ndarray, start: int = 8, stop: int = 32) -> float:
    """Least-squares slope of a per-frame curve over frames start..stop."""
    idx = np.arange(start, stop + 1)
    return float(np.polyfit(idx, np.asarray(curve)[start : stop + 1], 1)[0])


# ----------------------------------------------------------------- report


@dataclass
class MetricsReport:
    per_sequence: dict = field(default_factory=dict)   # seq_id -> metric dict
    corpus: dict = field(default_factory=dict)
    per_frame: list = field(default_factory=list)      # corpus-mean (1-SSIM) curve
    config: dict = field(default_factory=dict)
    version: str = ""

    def to_json(self) -> dict:
        return {
            "per_sequence": {str(k): v for k, v in sorted(self.per_sequence.items())},
            "corpus": self.corpus,
            "per_frame_curve": list(self.per_frame),
            "config": self.config,
            "version": self.version,
        }
