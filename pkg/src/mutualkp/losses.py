"""Reconstruction objectives: composite Chamfer distance and the combined loss.

The composite distance has two halves. Fidelity walks every reconstruction
point to its nearest target point, weighted by its segment's activation.
Coverage walks every target point through the segments sorted by proximity,
accumulating activation-weighted distances until the activations sum to 1;
the last segment in the prefix is truncated so the weights sum to exactly 1
(no truncation when the total stays below 1). Ties keep lexicographic
segment order. Both halves sum over points (no averaging).

Nearest-neighbour and sort indices come from the gradient-free kernels;
distances are recomputed differentiably from the chosen indices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from . import kernels
from .cloud import PointCloud
from .decoder import SkeletonReconstruction


def _target_tensor(target) -> torch.Tensor:
    if isinstance(target, PointCloud):
        return torch.from_numpy(target.points)
    if isinstance(target, np.ndarray):
        return torch.from_numpy(np.asarray(target, dtype=np.float64))
    return target


def _norms(diff: torch.Tensor) -> torch.Tensor:
    # exact 0 at coincident points, finite gradients everywhere
    d2 = (diff * diff).sum(dim=-1)
    d = torch.sqrt(d2.clamp_min(1e-24))
    return torch.where(d2 > 0, d, torch.zeros_like(d))


def fidelity_loss(rec: SkeletonReconstruction, target) -> torch.Tensor:
    """Activation-weighted sum of reconstruction-to-target nearest distances."""
    tgt = _target_tensor(target)
    if tgt.shape[0] == 0:
        raise ValueError("fidelity loss needs a nonempty target")
    if rec.total_points == 0:
        raise ValueError("fidelity loss needs a nonempty reconstruction")
    nn = kernels.nn_indices(rec.points.detach().numpy(), tgt.detach().numpy())
    d = _norms(rec.points - tgt[torch.from_numpy(nn)])
    seg_act = rec.activations[torch.from_numpy(rec.seg_index)]
    return (seg_act * d).sum()


def coverage_loss(rec: SkeletonReconstruction, target) -> torch.Tensor:
    """Activation-prefix coverage of every target point by nearby segments."""
    tgt = _target_tensor(target)
    if rec.total_points == 0 or rec.num_segments == 0:
        raise ValueError("coverage loss needs a nonempty reconstruction")
    if tgt.shape[0] == 0:
        raise ValueError("coverage loss needs a nonempty target")
    if float(rec.activations.detach().sum()) <= 0:
        raise ValueError("coverage loss needs a positive activation total")

    seg_nn = kernels.segment_nn_indices(
        tgt.detach().numpy(), rec.points.detach().numpy(), rec.seg_ptr
    )
    d = _norms(tgt[:, None, :] - rec.points[torch.from_numpy(seg_nn)])  # (T, S)
    order = torch.argsort(d.detach(), dim=1, stable=True)
    d_sorted = torch.gather(d, 1, order)
    a_sorted = rec.activations[None, :].expand_as(d)
    a_sorted = torch.gather(a_sorted, 1, order)

    prev_sum = torch.cumsum(a_sorted, dim=1) - a_sorted
    included = prev_sum < 1.0
    weights = torch.minimum(a_sorted, (1.0 - prev_sum).clamp_min(0.0))
    return (weights * d_sorted * included).sum()


def ccd_parts(rec: SkeletonReconstruction, target) -> tuple[torch.Tensor, torch.Tensor]:
    return fidelity_loss(rec, target), coverage_loss(rec, target)


def ccd(rec: SkeletonReconstruction, target) -> torch.Tensor:
    """Composite Chamfer distance: fidelity plus coverage."""
    fid, cov = ccd_parts(rec, target)
    return fid + cov


def self_loss(p1, rec1: SkeletonReconstruction, p2, rec2: SkeletonReconstruction) -> torch.Tensor:
    """ccd(rec1, p1) + ccd(rec2, p2): each object against its own reconstruction."""
    return ccd(rec1, p1) + ccd(rec2, p2)


def mutual_loss(p1, rec1_prime: SkeletonReconstruction,
                p2, rec2_prime: SkeletonReconstruction) -> torch.Tensor:
    """ccd(rec1', p1) + ccd(rec2', p2): cross-reconstructions against the inputs."""
    return ccd(rec1_prime, p1) + ccd(rec2_prime, p2)


@dataclass
class LossBreakdown:
    """Per-step loss components; total carries the autograd graph when present."""

    fidelity: float
    coverage: float
    self_loss: float
    mutual_loss: float
    reg_skeleton_offsets: float
    reg_keypoint_offsets: float
    total: float
    total_tensor: torch.Tensor | None = field(default=None, repr=False, compare=False)

    FIELDS = ("fidelity", "coverage", "self_loss", "mutual_loss",
              "reg_skeleton_offsets", "reg_keypoint_offsets", "total")

    def __post_init__(self):
        for name in self.FIELDS:
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"loss component {name} must be finite and >= 0, got {v}")

    def values(self) -> tuple[float, ...]:
        return tuple(getattr(self, name) for name in self.FIELDS)


def _sum_squares(offsets) -> torch.Tensor:
    if offsets is None:
        return torch.zeros((), dtype=torch.float64)
    if isinstance(offsets, torch.Tensor):
        offsets = [offsets]
    total = torch.zeros((), dtype=torch.float64)
    for t in offsets:
        total = total + (t * t).sum()
    return total


def total_loss(self_term, mutual_term, skeleton_offsets=None, keypoint_offsets=None,
               lambda_self: float = 0.5, lambda_mutual: float = 0.5,
               mu_skeleton: float = 0.01, mu_keypoint: float = 0.01,
               fidelity: float = 0.0, coverage: float = 0.0) -> LossBreakdown:
    """lambda_s * self + lambda_m * mutual + L2 penalties on both offset kinds.

    fidelity/coverage are pass-through reporting values (unweighted sums over
    however many composite distances fed the two terms).
    """
    for name, w in (("lambda_self", lambda_self), ("lambda_mutual", lambda_mutual),
                    ("mu_skeleton", mu_skeleton), ("mu_keypoint", mu_keypoint)):
        if w < 0:
            raise ValueError(f"{name} must be >= 0, got {w}")
    self_t = self_term if isinstance(self_term, torch.Tensor) else torch.tensor(float(self_term), dtype=torch.float64)
    mutual_t = mutual_term if isinstance(mutual_term, torch.Tensor) else torch.tensor(float(mutual_term), dtype=torch.float64)
    reg_skel = mu_skeleton * _sum_squares(skeleton_offsets)
    reg_kp = mu_keypoint * _sum_squares(keypoint_offsets)
    total = lambda_self * self_t + lambda_mutual * mutual_t + reg_skel + reg_kp
    return LossBreakdown(
        fidelity=float(fidelity),
        coverage=float(coverage),
        self_loss=float(self_t.detach()),
        mutual_loss=float(mutual_t.detach()),
        reg_skeleton_offsets=float(reg_skel.detach()),
        reg_keypoint_offsets=float(reg_kp.detach()),
        total=float(total.detach()),
        total_tensor=total,
    )
