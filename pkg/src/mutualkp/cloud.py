"""Point-cloud data model: clouds, keypoint sets, annotations, normalization."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError


@dataclass
class PointCloud:
    """N points in 3D with optional per-point integer part labels.

    Coordinates are dimensionless; after normalize_unit_box they live in
    [-0.5, 0.5] with the longest bounding-box side scaled to exactly 1.
    """

    points: np.ndarray
    part_labels: np.ndarray | None = None
    category: str = ""
    id: str = ""

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim != 2 or self.points.shape[1] != 3:
            raise ValueError(f"points must have shape (n, 3), got {self.points.shape}")
        if self.points.shape[0] < 2:
            raise DegenerateInputError("a point cloud needs at least 2 points")
        if not np.isfinite(self.points).all():
            raise ValueError("point coordinates must be finite")
        if self.part_labels is not None:
            self.part_labels = np.asarray(self.part_labels, dtype=np.int64)
            if self.part_labels.shape != (self.points.shape[0],):
                raise ValueError(
                    f"part_labels length {self.part_labels.shape} does not match "
                    f"{self.points.shape[0]} points"
                )

    def __len__(self):
        return self.points.shape[0]

    def with_points(self, points: np.ndarray, part_labels=None) -> "PointCloud":
        labels = self.part_labels if part_labels is None else part_labels
        return PointCloud(points, labels, self.category, self.id)


@dataclass
class KeypointSet:
    """K ordered 3D keypoints; the channel index is the semantic identity."""

    keypoints: np.ndarray
    source_id: str = ""

    def __post_init__(self):
        self.keypoints = np.asarray(self.keypoints, dtype=np.float64)
        if self.keypoints.ndim != 2 or self.keypoints.shape[1] != 3:
            raise ValueError(f"keypoints must have shape (k, 3), got {self.keypoints.shape}")
        if self.keypoints.shape[0] < 2:
            raise ValueError("a keypoint set needs at least 2 channels")
        if not np.isfinite(self.keypoints).all():
            raise ValueError("keypoint coordinates must be finite")

    @property
    def k(self) -> int:
        return self.keypoints.shape[0]


@dataclass
class AnnotationSet:
    """Human/ground-truth keypoint annotations for one cloud."""

    cloud_id: str
    semantic_ids: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    positions: np.ndarray = field(default_factory=lambda: np.empty((0, 3)))

    def __post_init__(self):
        self.semantic_ids = np.asarray(self.semantic_ids, dtype=np.int64)
        self.positions = np.asarray(self.positions, dtype=np.float64)
        if self.positions.ndim != 2 or self.positions.shape[1] != 3:
            raise ValueError(f"positions must have shape (m, 3), got {self.positions.shape}")
        if self.semantic_ids.shape[0] != self.positions.shape[0]:
            raise ValueError("semantic_ids and positions disagree in length")
        if len(np.unique(self.semantic_ids)) != len(self.semantic_ids):
            raise ValueError(f"duplicate semantic ids in annotations for {self.cloud_id!r}")
        if not np.isfinite(self.positions).all():
            raise ValueError("annotation positions must be finite")

    def position_of(self, semantic_id: int) -> np.ndarray:
        idx = np.nonzero(self.semantic_ids == semantic_id)[0]
        if idx.size == 0:
            raise KeyError(f"semantic id {semantic_id} not annotated on {self.cloud_id!r}")
        return self.positions[idx[0]]

    def __len__(self):
        return self.semantic_ids.shape[0]


def unit_box_transform(points: np.ndarray) -> tuple[np.ndarray, float]:
    """(center, scale) such that (p - center) / scale fills the unit box."""
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    extent = float((hi - lo).max())
    if extent <= 0.0:
        raise DegenerateInputError("all points are identical; cannot normalize")
    return (lo + hi) / 2.0, extent


def normalize_unit_box(cloud: PointCloud) -> PointCloud:
    """Center at the bounding-box center and scale the longest side to 1."""
    center, scale = unit_box_transform(cloud.points)
    return cloud.with_points((cloud.points - center) / scale)


def add_gaussian_noise(cloud: PointCloud, sigma: float, seed: int) -> PointCloud:
    """Perturb every coordinate with iid zero-mean Gaussian noise."""
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return cloud.with_points(cloud.points.copy())
    rng = np.random.default_rng(seed)
    return cloud.with_points(cloud.points + rng.normal(0.0, sigma, cloud.points.shape))
