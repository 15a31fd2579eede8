"""Deterministic wire-shape generators with exact ground-truth keypoints.

Each family is a small set of straight struts whose junctions and extremities
are analytically known, so the generated clouds double as their own keypoint
annotations and part segmentations. Proportions are drawn per instance from
fixed per-family ranges scaled by the spec's size range; every emitted cloud
is already unit-box normalized (with its annotations transformed identically)
and wire junctions are always emitted as cloud points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cloud import AnnotationSet, PointCloud, unit_box_transform

FAMILIES = ("box", "tee", "cross", "airplane-toy")


@dataclass
class SyntheticSpec:
    family: str
    points_per_cloud: int = 512
    seed: int = 0
    size_range: tuple[float, float] = (0.8, 1.2)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; choose from {FAMILIES}")
        if self.points_per_cloud < 2:
            raise ValueError("points_per_cloud must be >= 2")
        lo, hi = self.size_range
        if not (0 < lo < hi):
            raise ValueError(f"size_range must satisfy 0 < lo < hi, got {self.size_range}")


def _box(rng):
    lx, ly, lz = rng.uniform(0.6, 1.4, size=3)
    c = np.array([
        [sx * lx / 2, sy * ly / 2, sz * lz / 2]
        for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)
    ])
    edges, parts = [], []
    for a in range(8):
        for b in range(a + 1, 8):
            diff = np.abs(c[a] - c[b]) > 1e-12
            if diff.sum() == 1:
                edges.append((c[a], c[b]))
                parts.append(int(np.argmax(diff)))  # part = edge axis
    return [(p0, p1, part) for (p0, p1), part in zip(edges, parts)], c


def _tee(rng):
    # the junction may sit either side of center, so per-instance geometry
    # alone cannot pin the left/right channel identities
    bar = rng.uniform(0.8, 1.4)
    stem = rng.uniform(0.4, 1.0)
    junction = bar * rng.uniform(0.25, 0.75)
    left = np.array([0.0, 0.0, 0.0])
    j = np.array([junction, 0.0, 0.0])
    right = np.array([bar, 0.0, 0.0])
    bottom = np.array([junction, -stem, 0.0])
    segments = [(left, j, 0), (j, right, 0), (j, bottom, 1)]
    return segments, np.stack([left, j, right, bottom])


def _cross(rng):
    ax1, ax2 = rng.uniform(0.4, 0.7), rng.uniform(0.25, 0.45)
    ay1, ay2 = rng.uniform(0.45, 0.75), rng.uniform(0.2, 0.4)
    center = np.zeros(3)
    left = np.array([-ax1, 0.0, 0.0])
    right = np.array([ax2, 0.0, 0.0])
    bottom = np.array([0.0, -ay1, 0.0])
    top = np.array([0.0, ay2, 0.0])
    segments = [(left, center, 0), (center, right, 0),
                (bottom, center, 1), (center, top, 1)]
    return segments, np.stack([left, right, bottom, top, center])


def _airplane_toy(rng):
    length = rng.uniform(1.0, 1.4)
    wing_x = length * rng.uniform(0.3, 0.4)
    tail_x = length * rng.uniform(0.85, 0.95)
    wing_l = length * rng.uniform(0.45, 0.6)
    wing_r = wing_l * rng.uniform(0.75, 0.9)  # asymmetric on purpose
    tail_w = length * rng.uniform(0.15, 0.25)
    fin_h = length * rng.uniform(0.12, 0.2)
    nose = np.array([0.0, 0.0, 0.0])
    tail = np.array([length, 0.0, 0.0])
    wj = np.array([wing_x, 0.0, 0.0])
    tj = np.array([tail_x, 0.0, 0.0])
    wing_left = np.array([wing_x, -wing_l, 0.0])
    wing_right = np.array([wing_x, wing_r, 0.0])
    tail_left = np.array([tail_x, -tail_w, 0.0])
    tail_right = np.array([tail_x, tail_w, 0.0])
    fin_top = np.array([tail_x, 0.0, fin_h])
    segments = [
        (nose, wj, 0), (wj, tj, 0), (tj, tail, 0),
        (wing_left, wj, 1), (wj, wing_right, 1),
        (tail_left, tj, 2), (tj, tail_right, 2), (tj, fin_top, 2),
    ]
    keypoints = np.stack([nose, tail, wing_left, wing_right, tail_left, tail_right, fin_top])
    return segments, keypoints


_BUILDERS = {"box": _box, "tee": _tee, "cross": _cross, "airplane-toy": _airplane_toy}


def _allocate_counts(lengths: np.ndarray, total: int) -> np.ndarray:
    """Per-segment point counts proportional to length, each >= 2, summing to total."""
    s = len(lengths)
    if total < 2 * s:
        raise ValueError(f"need at least {2 * s} points for {s} segments, got {total}")
    counts = np.full(s, 2, dtype=np.int64)
    spare = total - 2 * s
    quota = spare * lengths / lengths.sum()
    counts += np.floor(quota).astype(np.int64)
    remainder = quota - np.floor(quota)
    leftover = total - int(counts.sum())
    # largest remainder first, index as tie-break
    for i in np.lexsort((np.arange(s), -remainder))[:leftover]:
        counts[i] += 1
    return counts


def _instance(spec: SyntheticSpec, index: int) -> tuple[PointCloud, AnnotationSet]:
    rng = np.random.default_rng([spec.seed, index])
    scale = rng.uniform(*spec.size_range)
    segments, keypoints = _BUILDERS[spec.family](rng)

    starts = np.stack([p0 for p0, _, _ in segments]) * scale
    ends = np.stack([p1 for _, p1, _ in segments]) * scale
    parts = np.array([part for _, _, part in segments], dtype=np.int64)
    keypoints = keypoints * scale

    lengths = np.linalg.norm(ends - starts, axis=1)
    counts = _allocate_counts(lengths, spec.points_per_cloud)
    pieces, labels = [], []
    for s in range(len(segments)):
        t = np.linspace(0.0, 1.0, counts[s])[:, None]
        pieces.append(starts[s] * (1 - t) + ends[s] * t)
        labels.append(np.full(counts[s], parts[s], dtype=np.int64))
    points = np.concatenate(pieces)

    center, extent = unit_box_transform(points)
    points = (points - center) / extent
    keypoints = (keypoints - center) / extent

    cloud_id = f"{spec.family}-{index:04d}"
    cloud = PointCloud(points, np.concatenate(labels), category=spec.family, id=cloud_id)
    ann = AnnotationSet(cloud_id, np.arange(len(keypoints), dtype=np.int64), keypoints)
    return cloud, ann


def generate(spec: SyntheticSpec, count: int) -> tuple[list[PointCloud], dict[str, AnnotationSet]]:
    """count instances of the family, plus their exact annotations by cloud id."""
    if count < 1:
        raise ValueError("count must be >= 1")
    clouds, annotations = [], {}
    for i in range(count):
        cloud, ann = _instance(spec, i)
        clouds.append(cloud)
        annotations[cloud.id] = ann
    return clouds, annotations


def export_dataset(spec: SyntheticSpec, count: int, out_dir) -> tuple[list[PointCloud], dict[str, AnnotationSet]]:
    """Write <out_dir>/<family>/<id>.xyz files plus <out_dir>/annotations.txt."""
    from pathlib import Path

    from .cloudio import write_annotations, write_xyz

    clouds, annotations = generate(spec, count)
    root = Path(out_dir)
    data_dir = root / spec.family
    data_dir.mkdir(parents=True, exist_ok=True)
    for cloud in clouds:
        write_xyz(cloud, data_dir / f"{cloud.id}.xyz")
    write_annotations(annotations, root / "annotations.txt")
    return clouds, annotations
