"""Deterministic synthetic corpus with planted anomalous clip runs.

Normal clips are isotropic Gaussian noise around the origin; anomalous
clips add ``separation`` along a fixed random unit direction, giving a
tunable difficulty knob with an analytically known optimal scoring
direction.  Each positive video plants one contiguous anomalous run at a
random position.  Everything a run writes is a pure function of the spec,
so identical specs produce byte-identical files.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .features import FRAMES_PER_CLIP, FeatureMatrix, make_bag, segment_bounds, write_features
from .network import MlpModel, forward
from .rng import STREAM_SYNTH, derive_rng

ANNOTATION_SLOTS = 2  # pad every annotation line to this many interval pairs


@dataclass(frozen=True)
class SynthSpec:
    n_pos_videos: int
    n_neg_videos: int
    dim: int = 32
    clips_per_video: int = 64
    anomaly_fraction: float = 0.15
    separation: float = 2.0
    noise_sigma: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_pos_videos < 1 or self.n_neg_videos < 1:
            raise ValueError("video counts must be positive")
        if self.dim < 1 or self.clips_per_video < 1:
            raise ValueError("dim and clips_per_video must be positive")
        if not (0.0 < self.anomaly_fraction < 1.0):
            raise ValueError("anomaly_fraction must be in (0, 1)")
        if self.anomaly_fraction * self.clips_per_video < 1.0:
            raise ValueError("anomaly_fraction * clips_per_video must be at least 1")
        if self.separation < 0.0:
            raise ValueError("separation must be non-negative")
        if self.noise_sigma <= 0.0:
            raise ValueError("noise_sigma must be positive")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass(frozen=True)
class GeneratedDataset:
    out_dir: Path
    manifest_path: Path
    test_manifest_path: Path | None
    annotations_path: Path
    planted_csv_path: Path
    feature_paths: tuple[Path, ...]
    planted: dict[str, tuple[int, int]]  # video_id -> half-open clip run


def generate(spec: SynthSpec, out_dir, test_pos: int = 0, test_neg: int = 0) -> GeneratedDataset:
    """Write feature files, manifests, annotations, and the planted index.

    The spec's video counts form the training split (``manifest.txt``).
    ``test_pos``/``test_neg`` request extra held-out videos drawn from the
    same distribution, written to ``manifest_test.txt``; both splits share
    the one planted anomaly direction, so a model trained on one transfers
    to the other.
    """
    if test_pos < 0 or test_neg < 0 or (test_pos > 0) != (test_neg > 0):
        raise ValueError("test_pos and test_neg must both be zero or both positive")
    out_dir = Path(out_dir)
    features_dir = out_dir / "features"
    features_dir.mkdir(parents=True, exist_ok=True)
    rng = derive_rng(spec.seed, STREAM_SYNTH)
    direction = rng.normal(size=spec.dim)
    direction /= np.linalg.norm(direction)

    n_frames = spec.clips_per_video * FRAMES_PER_CLIP
    run_len = max(1, int(round(spec.anomaly_fraction * spec.clips_per_video)))
    manifest_lines: dict[str, list[str]] = {"train": [], "test": []}
    annotation_lines = []
    planted_lines = ["video_id,clip_start,clip_end"]
    planted: dict[str, tuple[int, int]] = {}
    feature_paths = []

    def emit(video_id: str, clips: np.ndarray, label: int,
             intervals: list[tuple[int, int]], split: str):
        path = features_dir / f"{video_id}.feat"
        write_features(FeatureMatrix(video_id, clips, n_frames), path, "binary")
        feature_paths.append(path)
        manifest_lines[split].append(f"features/{video_id}.feat {label} annotations.txt")
        pads = [(-1, -1)] * (ANNOTATION_SLOTS - len(intervals))
        pairs = " ".join(f"{a} {b}" for a, b in intervals + pads)
        annotation_lines.append(f"{video_id} {n_frames} {pairs}")

    def emit_positive(index: int, split: str):
        video_id = f"pos{index:03d}"
        clips = rng.normal(0.0, spec.noise_sigma, size=(spec.clips_per_video, spec.dim))
        start = int(rng.integers(0, spec.clips_per_video - run_len + 1))
        clips[start:start + run_len] += spec.separation * direction
        planted[video_id] = (start, start + run_len)
        planted_lines.append(f"{video_id},{start},{start + run_len}")
        emit(video_id, clips, 1,
             [(start * FRAMES_PER_CLIP, (start + run_len) * FRAMES_PER_CLIP)], split)

    def emit_negative(index: int, split: str):
        video_id = f"neg{index:03d}"
        clips = rng.normal(0.0, spec.noise_sigma, size=(spec.clips_per_video, spec.dim))
        emit(video_id, clips, 0, [], split)

    for i in range(spec.n_pos_videos):
        emit_positive(i, "train")
    for i in range(spec.n_neg_videos):
        emit_negative(i, "train")
    for i in range(test_pos):
        emit_positive(spec.n_pos_videos + i, "test")
    for i in range(test_neg):
        emit_negative(spec.n_neg_videos + i, "test")

    manifest_path = out_dir / "manifest.txt"
    annotations_path = out_dir / "annotations.txt"
    planted_csv_path = out_dir / "planted.csv"
    manifest_path.write_text("\n".join(manifest_lines["train"]) + "\n", encoding="utf-8")
    test_manifest_path = None
    if test_pos:
        test_manifest_path = out_dir / "manifest_test.txt"
        test_manifest_path.write_text("\n".join(manifest_lines["test"]) + "\n", encoding="utf-8")
    annotations_path.write_text("\n".join(annotation_lines) + "\n", encoding="utf-8")
    planted_csv_path.write_text("\n".join(planted_lines) + "\n", encoding="utf-8")
    return GeneratedDataset(
        out_dir=out_dir,
        manifest_path=manifest_path,
        test_manifest_path=test_manifest_path,
        annotations_path=annotations_path,
        planted_csv_path=planted_csv_path,
        feature_paths=tuple(feature_paths),
        planted=planted,
    )


def load_planted(path) -> dict[str, tuple[int, int]]:
    """Read a planted.csv back into a video-id lookup."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    out = {}
    for line in lines[1:]:
        if not line.strip():
            continue
        video_id, start, end = line.split(",")
        out[video_id] = (int(start), int(end))
    return out


def planted_segment_range(n_clips: int, m: int, clip_start: int, clip_end: int) -> set[int]:
    """Segment indices whose (non-empty) clip group intersects the planted run."""
    bounds = segment_bounds(n_clips, m)
    return {g for g in range(m)
            if bounds[g + 1] > bounds[g] and bounds[g] < clip_end and bounds[g + 1] > clip_start}


def localization_accuracy(model: MlpModel, features, planted: dict[str, tuple[int, int]],
                          m: int = 32) -> float:
    """Fraction of positive videos whose argmax segment hits the planted run."""
    hits = 0
    total = 0
    for f in features:
        run = planted.get(f.video_id)
        if run is None:
            continue
        bag = make_bag(f, 1, m)
        scores, _ = forward(model, bag.segments, mode="eval")
        best = int(np.argmax(scores))
        total += 1
        if best in planted_segment_range(f.n_clips, m, *run):
            hits += 1
    if total == 0:
        raise ValueError("no features matched the planted index")
    return hits / total
