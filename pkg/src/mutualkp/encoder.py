"""Point-cloud encoder: per-point keypoint scores plus a pooled global feature.

A two-level hierarchical grouping network (farthest-point-sampled centers,
radius neighbourhoods, shared pointwise MLPs with max pooling) is propagated
back to every point and finished with a K-channel head. Each channel's scores
are softmax-normalized across the N points, so predicted keypoints are convex
combinations of input points. The pooled descriptor feeds two heads: segment
activation strengths squashed to (0, 1), and a conditioning vector for the
decoder's point offsets.

Permutation invariance is by canonicalization: encode() sorts the points
lexicographically, runs the network, and un-permutes the score columns, so
the same point set always produces bit-identical keypoints.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from . import kernels
from .cloud import KeypointSet, PointCloud
from .errors import NumericError

_ACT_CLAMP = 30.0  # keeps sigmoid outputs strictly inside (0, 1) in float64


@dataclass
class ScoreMatrix:
    """K x N nonnegative point weights; every row sums to 1."""

    weights: torch.Tensor

    def __post_init__(self):
        w = self.weights
        if w.ndim != 2:
            raise ValueError(f"score matrix must be 2-D, got shape {tuple(w.shape)}")
        if not torch.isfinite(w).all():
            raise ValueError("score matrix has non-finite entries")
        if w.min() < -1e-9 or w.max() > 1 + 1e-9:
            raise ValueError("score matrix entries must lie in [0, 1]")
        row_sums = w.sum(dim=1)
        if (row_sums - 1).abs().max() > 1e-5:
            raise ValueError("score matrix rows must sum to 1")

    @property
    def k(self) -> int:
        return self.weights.shape[0]

    @property
    def n(self) -> int:
        return self.weights.shape[1]


@dataclass
class GlobalFeature:
    """Pooled shape descriptor: segment activations plus offset conditioning."""

    activations: torch.Tensor
    offset_feature: torch.Tensor
    k: int

    def __post_init__(self):
        s = self.k * (self.k - 1) // 2
        if self.activations.shape != (s,):
            raise ValueError(
                f"expected {s} activations for k={self.k}, got {tuple(self.activations.shape)}"
            )
        if not torch.isfinite(self.activations).all():
            raise ValueError("activations must be finite")
        if self.activations.min() <= 0 or self.activations.max() >= 1:
            raise ValueError("activations must lie strictly inside (0, 1)")
        if self.offset_feature.ndim != 1 or not torch.isfinite(self.offset_feature).all():
            raise ValueError("offset feature must be a finite vector")

    @property
    def num_segments(self) -> int:
        return self.activations.shape[0]


def _pointwise_mlp(widths):
    layers = []
    for i in range(len(widths) - 1):
        layers.append(nn.Linear(widths[i], widths[i + 1]))
        if i < len(widths) - 2:
            layers.append(nn.ReLU())
    return nn.Sequential(*layers)


def _interp_weights(query, ref, k):
    """Inverse-distance weights over the k nearest ref points (fixed geometry)."""
    k = min(k, ref.shape[0])
    idx = kernels.knn_indices(query, ref, k)
    d2 = ((query[:, None, :] - ref[idx]) ** 2).sum(axis=2)
    w = 1.0 / (d2 + 1e-10)
    w /= w.sum(axis=1, keepdims=True)
    return idx, w


class KeypointEncoder(nn.Module):
    """Maps an (N, 3) float64 cloud to (K x N scores, activations, offset feature)."""

    def __init__(self, k: int, sa1_points: int = 512, sa1_radius: float = 0.2,
                 sa1_neighbors: int = 32, sa2_points: int = 128, sa2_radius: float = 0.4,
                 sa2_neighbors: int = 32, offset_feature_dim: int = 64):
        super().__init__()
        if k < 2:
            raise ValueError(f"keypoint count must be >= 2, got {k}")
        self.k = k
        self.sa1_points = sa1_points
        self.sa1_radius = sa1_radius
        self.sa1_neighbors = sa1_neighbors
        self.sa2_points = sa2_points
        self.sa2_radius = sa2_radius
        self.sa2_neighbors = sa2_neighbors
        self.offset_feature_dim = offset_feature_dim
        self.num_segments = k * (k - 1) // 2

        self.sa1_mlp = _pointwise_mlp([3, 64, 64, 128])
        self.sa2_mlp = _pointwise_mlp([3 + 128, 128, 128, 256])
        self.fp2_mlp = _pointwise_mlp([256 + 128, 128])
        self.fp1_mlp = _pointwise_mlp([128 + 3, 128, 128])
        self.score_head = nn.Linear(128, k)
        self.activation_head = nn.Linear(256, self.num_segments)
        self.offset_head = nn.Linear(256, offset_feature_dim)
        self.double()

    def backbone_sizes(self) -> dict:
        return {
            "sa1_points": self.sa1_points, "sa1_radius": self.sa1_radius,
            "sa1_neighbors": self.sa1_neighbors, "sa2_points": self.sa2_points,
            "sa2_radius": self.sa2_radius, "sa2_neighbors": self.sa2_neighbors,
            "offset_feature_dim": self.offset_feature_dim,
        }

    def forward(self, points: torch.Tensor):
        n = points.shape[0]
        if n < self.k:
            raise ValueError(f"need at least k={self.k} points, got {n}")
        pts_np = points.detach().numpy()

        # level 1: grouped centers over radius neighbourhoods
        m1 = min(self.sa1_points, n)
        c1 = kernels.fps_indices(pts_np, m1, start=0)
        xyz1 = points[c1]
        nbr1 = kernels.ball_query(pts_np, pts_np[c1], self.sa1_radius,
                                  min(self.sa1_neighbors, n))
        rel1 = points[nbr1] - xyz1[:, None, :]
        f1 = self.sa1_mlp(rel1).max(dim=1).values

        # level 2
        m2 = min(self.sa2_points, m1)
        xyz1_np = pts_np[c1]
        c2 = kernels.fps_indices(xyz1_np, m2, start=0)
        xyz2 = xyz1[c2]
        nbr2 = kernels.ball_query(xyz1_np, xyz1_np[c2], self.sa2_radius,
                                  min(self.sa2_neighbors, m1))
        rel2 = torch.cat([xyz1[nbr2] - xyz2[:, None, :], f1[nbr2]], dim=2)
        f2 = self.sa2_mlp(rel2).max(dim=1).values

        global_desc = f2.max(dim=0).values

        # propagate back: level 2 -> level 1 -> every point
        idx21, w21 = _interp_weights(xyz1_np, xyz1_np[c2], 3)
        w21_t = torch.from_numpy(w21)
        h1 = self.fp2_mlp(torch.cat([(f2[idx21] * w21_t[:, :, None]).sum(dim=1), f1], dim=1))

        idx10, w10 = _interp_weights(pts_np, xyz1_np, 3)
        w10_t = torch.from_numpy(w10)
        h0 = self.fp1_mlp(torch.cat([(h1[idx10] * w10_t[:, :, None]).sum(dim=1), points], dim=1))

        logits = self.score_head(h0).transpose(0, 1)
        weights = torch.softmax(logits, dim=1)
        activations = torch.sigmoid(
            self.activation_head(global_desc).clamp(-_ACT_CLAMP, _ACT_CLAMP)
        )
        offset_feature = self.offset_head(global_desc)
        return weights, activations, offset_feature


def canonical_order(points: np.ndarray) -> np.ndarray:
    """Lexicographic (x, then y, then z) ordering of the points."""
    return np.lexsort((points[:, 2], points[:, 1], points[:, 0]))


def encode(cloud: PointCloud, encoder: KeypointEncoder) -> tuple[ScoreMatrix, GlobalFeature]:
    """Forward pass on a cloud; score columns come back in input point order."""
    n = len(cloud)
    if n < encoder.k:
        raise ValueError(f"cloud has {n} points but the encoder needs >= {encoder.k}")
    order = canonical_order(cloud.points)
    weights, activations, offset_feature = encoder(torch.from_numpy(cloud.points[order]))
    if not (torch.isfinite(weights).all() and torch.isfinite(activations).all()
            and torch.isfinite(offset_feature).all()):
        raise NumericError(f"encoder produced non-finite outputs on cloud {cloud.id!r}")
    inverse = np.empty(n, dtype=np.int64)
    inverse[order] = np.arange(n)
    return (
        ScoreMatrix(weights[:, torch.from_numpy(inverse)]),
        GlobalFeature(activations, offset_feature, encoder.k),
    )


def keypoints_from_scores(weights: torch.Tensor, points: torch.Tensor) -> torch.Tensor:
    """Score-weighted point averages: keypoint k = sum_n w[k, n] * p[n]."""
    if weights.shape[1] != points.shape[0]:
        raise ValueError(
            f"score matrix covers {weights.shape[1]} points, cloud has {points.shape[0]}"
        )
    return weights @ points


def predict_keypoints(scores: ScoreMatrix, cloud: PointCloud) -> KeypointSet:
    kp = keypoints_from_scores(scores.weights, torch.from_numpy(cloud.points))
    return KeypointSet(kp.detach().numpy(), source_id=cloud.id)


def pointwise_saliency(scores: ScoreMatrix) -> np.ndarray:
    """Per-point channel-sum scores, for visualization export."""
    return scores.weights.sum(dim=0).detach().numpy()
