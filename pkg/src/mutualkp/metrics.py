"""Evaluation protocols: alignment score, keypoint IoU, part correspondence,
and noise repeatability.

The alignment score compares, per annotated semantic point, which predicted
channel sits nearest on a source and on a reference object; the channel
identities must agree. IoU matches predictions to annotations greedily by
global nearest distance under a threshold. Part correspondence checks that a
channel lands on the same segmentation part across two objects. Repeatability
counts channels that move at most a threshold under injected Gaussian noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .cloud import AnnotationSet, KeypointSet, PointCloud, add_gaussian_noise
from .errors import MetricUndefinedError

DEFAULT_TAU = 0.1
DEFAULT_REPEAT_THRESHOLD = 0.1
DEFAULT_REFERENCE_DRAWS = 10
DEFAULT_PART_PAIRS = 100


def _nearest_channel(pred: KeypointSet, position: np.ndarray) -> int:
    d = np.linalg.norm(pred.keypoints - position[None, :], axis=1)
    return int(np.argmin(d))  # ties -> lowest channel


def das(pred_src: KeypointSet, pred_ref: KeypointSet,
        ann_src: AnnotationSet, ann_ref: AnnotationSet) -> float:
    """Fraction of shared semantic ids whose nearest channel agrees."""
    if pred_src.k != pred_ref.k:
        raise ValueError(f"channel counts disagree: {pred_src.k} vs {pred_ref.k}")
    common = sorted(set(ann_src.semantic_ids.tolist()) & set(ann_ref.semantic_ids.tolist()))
    if not common:
        raise MetricUndefinedError(
            f"no shared semantic ids between {ann_src.cloud_id!r} and {ann_ref.cloud_id!r}"
        )
    aligned = 0
    for sid in common:
        ref_channel = _nearest_channel(pred_ref, ann_ref.position_of(sid))
        src_channel = _nearest_channel(pred_src, ann_src.position_of(sid))
        aligned += int(ref_channel == src_channel)
    return aligned / len(common)


def miou(pred: KeypointSet, ann: AnnotationSet, tau: float = DEFAULT_TAU) -> float:
    """Greedy one-to-one IoU for one object: matches / (K + |ann| - matches).

    Dataset-level mIoU is the mean of this over objects.
    """
    if tau <= 0:
        raise ValueError(f"tau must be > 0, got {tau}")
    if len(ann) == 0:
        raise ValueError("miou needs a nonempty annotation set")
    k, m = pred.k, len(ann)
    d = np.linalg.norm(pred.keypoints[:, None, :] - ann.positions[None, :, :], axis=2)
    matches = 0
    for _ in range(min(k, m)):
        flat = int(np.argmin(d))
        row, col = divmod(flat, m)
        if d[row, col] > tau:
            break
        matches += 1
        d[row, :] = np.inf
        d[:, col] = np.inf
    return matches / (k + m - matches)


def part_correspondence(pred_a: KeypointSet, cloud_a: PointCloud,
                        pred_b: KeypointSet, cloud_b: PointCloud) -> float:
    """Fraction of channels whose inherited part label agrees across two objects."""
    if pred_a.k != pred_b.k:
        raise ValueError(f"channel counts disagree: {pred_a.k} vs {pred_b.k}")
    if cloud_a.part_labels is None or cloud_b.part_labels is None:
        raise ValueError("part correspondence needs part labels on both clouds")
    labels_a = cloud_a.part_labels[kernels.nn_indices(pred_a.keypoints, cloud_a.points)]
    labels_b = cloud_b.part_labels[kernels.nn_indices(pred_b.keypoints, cloud_b.points)]
    return float(np.mean(labels_a == labels_b))


def _noise_seed(seed: int, sigma_index: int, cloud_index: int) -> int:
    return int(np.random.SeedSequence((seed, sigma_index, cloud_index)).generate_state(1)[0])


def repeatability(detector, clouds: list[PointCloud], sigmas: list[float],
                  threshold: float = DEFAULT_REPEAT_THRESHOLD,
                  seed: int = 0) -> list[tuple[float, float]]:
    """(sigma, repeatable-channel ratio) for each noise scale.

    detector is a Checkpoint or any callable PointCloud -> KeypointSet.
    A channel is repeatable when its prediction moves at most threshold
    between the clean and the noisy cloud.
    """
    sigmas = [float(s) for s in sigmas]
    if not sigmas or any(s < 0 for s in sigmas) or sorted(sigmas) != sigmas:
        raise ValueError("sigmas must be nonnegative and sorted ascending")
    if not clouds:
        raise ValueError("repeatability needs at least one cloud")
    if not callable(detector):
        from .trainer import Detector  # deferred: metrics stays importable without torch models
        detector = Detector.from_checkpoint(detector)

    clean = [detector(c) for c in clouds]
    curve = []
    for si, sigma in enumerate(sigmas):
        repeatable = 0
        total = 0
        for ci, cloud in enumerate(clouds):
            noisy = detector(add_gaussian_noise(cloud, sigma, _noise_seed(seed, si, ci)))
            dist = np.linalg.norm(clean[ci].keypoints - noisy.keypoints, axis=1)
            repeatable += int((dist <= threshold).sum())
            total += dist.shape[0]
        curve.append((sigma, repeatable / total))
    return curve


# ---------------------------------------------------------------------------
# dataset-level aggregation


def evaluate_das(preds: dict[str, KeypointSet], annotations: dict[str, AnnotationSet],
                 reference_draws: int = DEFAULT_REFERENCE_DRAWS,
                 seed: int = 0) -> tuple[float | None, int, int]:
    """Mean alignment score over (source, seeded reference) pairs.

    Returns (mean or None when nothing was evaluable, evaluated pair count,
    undefined pair count).
    """
    ids = sorted(set(preds) & set(annotations))
    rng = np.random.default_rng(seed)
    scores = []
    undefined = 0
    for src in ids:
        others = [i for i in ids if i != src]
        if not others:
            continue
        draws = min(reference_draws, len(others))
        refs = rng.choice(len(others), size=draws, replace=False)
        for ri in refs:
            ref = others[int(ri)]
            try:
                scores.append(das(preds[src], preds[ref], annotations[src], annotations[ref]))
            except MetricUndefinedError:
                undefined += 1
    if not scores:
        return None, 0, undefined
    return float(np.mean(scores)), len(scores), undefined


def evaluate_miou(preds: dict[str, KeypointSet], annotations: dict[str, AnnotationSet],
                  tau: float = DEFAULT_TAU) -> float | None:
    ids = sorted(set(preds) & set(annotations))
    if not ids:
        return None
    return float(np.mean([miou(preds[i], annotations[i], tau) for i in ids]))


def evaluate_part_correspondence(preds: dict[str, KeypointSet],
                                 clouds: dict[str, PointCloud],
                                 pairs: int = DEFAULT_PART_PAIRS,
                                 seed: int = 0) -> float | None:
    ids = sorted(i for i in preds if i in clouds and clouds[i].part_labels is not None)
    if len(ids) < 2:
        return None
    rng = np.random.default_rng(seed)
    scores = []
    for _ in range(pairs):
        a, b = rng.choice(len(ids), size=2, replace=False)
        a, b = ids[int(a)], ids[int(b)]
        scores.append(part_correspondence(preds[a], clouds[a], preds[b], clouds[b]))
    return float(np.mean(scores))


@dataclass
class MetricsReport:
    """Per-category metric table plus cross-category means and protocol notes."""

    per_category: dict[str, dict[str, float]]
    means: dict[str, float] = field(default_factory=dict)
    repeatability_curve: list[tuple[float, float]] = field(default_factory=list)
    protocol: dict = field(default_factory=dict)
    undefined: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.means:
            self.means = self._compute_means()

    def _compute_means(self) -> dict[str, float]:
        names = sorted({m for row in self.per_category.values() for m in row})
        means = {}
        for name in names:
            vals = [row[name] for row in self.per_category.values() if name in row]
            if vals:
                means[name] = float(np.mean(vals))
        return means

    def to_json_dict(self) -> dict:
        return {
            "per_category": self.per_category,
            "means": self.means,
            "repeatability_curve": [[s, r] for s, r in self.repeatability_curve],
            "protocol": self.protocol,
            "undefined": self.undefined,
        }

    def to_text(self) -> str:
        lines = [f"# {k}={v}" for k, v in sorted(self.protocol.items())]
        for k, v in sorted(self.undefined.items()):
            lines.append(f"# {k}={v}")
        names = sorted({m for row in self.per_category.values() for m in row})
        if names:
            width = max([len(c) for c in self.per_category] + [len("category"), len("mean")])
            header = "category".ljust(width) + "".join(f"  {n:>18}" for n in names)
            lines.append(header)
            for cat in sorted(self.per_category):
                row = self.per_category[cat]
                cells = "".join(
                    f"  {row[n]:>18.6f}" if n in row else f"  {'-':>18}" for n in names
                )
                lines.append(cat.ljust(width) + cells)
            cells = "".join(
                f"  {self.means[n]:>18.6f}" if n in self.means else f"  {'-':>18}"
                for n in names
            )
            lines.append("mean".ljust(width) + cells)
        if self.repeatability_curve:
            lines.append("sigma ratio")
            for s, r in self.repeatability_curve:
                lines.append(f"{s!r} {r!r}")
        return "\n".join(lines) + "\n"
