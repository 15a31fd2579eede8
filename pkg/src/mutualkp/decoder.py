"""Skeleton decoder: keypoint pairs -> point segments with learned offsets.

For K keypoints the decoder emits K(K-1)/2 straight point segments, one per
unordered keypoint pair in lexicographic order (0,1), (0,2), ... Points are
uniformly spaced along each segment (endpoints always included), then
displaced by a small MLP conditioned on the global offset feature, a segment
embedding, and the point's normalized arc position. Segment activations are
copied from the global feature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from .cloud import KeypointSet
from .cloudio import atomic_write_text, format_ply
from .encoder import GlobalFeature

DEFAULT_SPACING = 0.05
DEFAULT_CAP = 64


@dataclass
class SkeletonReconstruction:
    """K(K-1)/2 point segments with per-segment activation strengths."""

    points: torch.Tensor            # (R, 3)
    seg_ptr: np.ndarray             # (S+1,) slice boundaries into points
    seg_pairs: np.ndarray           # (S, 2) endpoint keypoint indices
    arc_pos: torch.Tensor           # (R,) position in [0, 1] along the segment
    activations: torch.Tensor       # (S,)
    offsets: torch.Tensor           # (R, 3) cumulative applied displacements
    degenerate_segments: list = field(default_factory=list)

    @property
    def num_segments(self) -> int:
        return len(self.seg_pairs)

    @property
    def total_points(self) -> int:
        return self.points.shape[0]

    @property
    def seg_index(self) -> np.ndarray:
        counts = np.diff(self.seg_ptr)
        return np.repeat(np.arange(self.num_segments), counts)

    def segment_points(self, s: int) -> torch.Tensor:
        return self.points[self.seg_ptr[s]:self.seg_ptr[s + 1]]

    def numpy_points(self) -> np.ndarray:
        return self.points.detach().numpy()


def segment_pairs(k: int) -> np.ndarray:
    """Unordered keypoint pairs in lexicographic order."""
    return np.array([(i, j) for i in range(k) for j in range(i + 1, k)], dtype=np.int64)


def _as_tensor(kp) -> torch.Tensor:
    if isinstance(kp, KeypointSet):
        return torch.from_numpy(kp.keypoints)
    if isinstance(kp, np.ndarray):
        return torch.from_numpy(np.asarray(kp, dtype=np.float64))
    return kp


def build_skeletons(kp, spacing: float = DEFAULT_SPACING,
                    cap_per_segment: int = DEFAULT_CAP) -> SkeletonReconstruction:
    """Straight segments between every keypoint pair; unit activations, no offsets.

    Per segment, points = max(2, ceil(length/spacing) + 1) capped at
    cap_per_segment, uniformly spaced with both endpoints included. A small
    guard keeps exact-multiple lengths from gaining a point to float noise.
    """
    kp_t = _as_tensor(kp)
    k = kp_t.shape[0]
    if k < 2:
        raise ValueError("skeleton construction needs at least 2 keypoints")
    if spacing <= 0 or cap_per_segment < 2:
        raise ValueError("need spacing > 0 and cap_per_segment >= 2")
    pairs = segment_pairs(k)

    chunks, arcs, ptr, degenerate = [], [], [0], []
    for s, (i, j) in enumerate(pairs):
        length = float(torch.norm(kp_t[j] - kp_t[i]).detach())
        if length <= 1e-12:
            degenerate.append(s)
        count = max(2, min(cap_per_segment, math.ceil(length / spacing - 1e-9) + 1))
        t = torch.linspace(0.0, 1.0, count, dtype=torch.float64)
        chunks.append(kp_t[i][None, :] * (1.0 - t)[:, None] + kp_t[j][None, :] * t[:, None])
        arcs.append(t)
        ptr.append(ptr[-1] + count)

    points = torch.cat(chunks, dim=0)
    return SkeletonReconstruction(
        points=points,
        seg_ptr=np.array(ptr, dtype=np.int64),
        seg_pairs=pairs,
        arc_pos=torch.cat(arcs),
        activations=torch.ones(len(pairs), dtype=torch.float64),
        offsets=torch.zeros_like(points),
        degenerate_segments=degenerate,
    )


def displace(skel: SkeletonReconstruction, offsets: torch.Tensor,
             activations: torch.Tensor | None = None) -> SkeletonReconstruction:
    """Shift every skeleton point by its offset vector, recording the shift."""
    if offsets.shape != skel.points.shape:
        raise ValueError(
            f"offsets shape {tuple(offsets.shape)} does not match "
            f"{tuple(skel.points.shape)} skeleton points"
        )
    return SkeletonReconstruction(
        points=skel.points + offsets,
        seg_ptr=skel.seg_ptr,
        seg_pairs=skel.seg_pairs,
        arc_pos=skel.arc_pos,
        activations=skel.activations if activations is None else activations,
        offsets=skel.offsets + offsets,
        degenerate_segments=skel.degenerate_segments,
    )


class SkeletonDecoder(nn.Module):
    """Offset head: (offset feature, segment id, arc position) -> 3-vector.

    The final layer starts at zero, so a fresh decoder reproduces the bare
    skeleton exactly.
    """

    def __init__(self, k: int, offset_feature_dim: int = 64,
                 segment_embed_dim: int = 8, hidden: int = 64):
        super().__init__()
        self.k = k
        self.offset_feature_dim = offset_feature_dim
        self.num_segments = k * (k - 1) // 2
        self.segment_embedding = nn.Embedding(self.num_segments, segment_embed_dim)
        self.net = nn.Sequential(
            nn.Linear(offset_feature_dim + segment_embed_dim + 1, hidden), nn.ReLU(),
            nn.Linear(hidden, 3),
        )
        nn.init.zeros_(self.net[-1].weight)
        nn.init.zeros_(self.net[-1].bias)
        self.double()

    def offset_vectors(self, gf: GlobalFeature, skel: SkeletonReconstruction) -> torch.Tensor:
        r = skel.total_points
        seg_idx = torch.from_numpy(skel.seg_index)
        feat = torch.cat(
            [
                gf.offset_feature[None, :].expand(r, -1),
                self.segment_embedding(seg_idx),
                skel.arc_pos[:, None],
            ],
            dim=1,
        )
        return self.net(feat)


def apply_offsets(skel: SkeletonReconstruction, gf: GlobalFeature,
                  decoder: SkeletonDecoder) -> SkeletonReconstruction:
    """Displace skeleton points by the decoder's offsets; adopt gf activations."""
    if gf.num_segments != skel.num_segments:
        raise ValueError(
            f"global feature carries {gf.num_segments} activations but the skeleton "
            f"has {skel.num_segments} segments"
        )
    if decoder.num_segments != skel.num_segments:
        raise ValueError(
            f"decoder built for {decoder.num_segments} segments, skeleton has "
            f"{skel.num_segments}"
        )
    if gf.offset_feature.shape[0] != decoder.offset_feature_dim:
        raise ValueError(
            f"offset feature dim {gf.offset_feature.shape[0]} does not match the "
            f"decoder's {decoder.offset_feature_dim}"
        )
    return displace(skel, decoder.offset_vectors(gf, skel), activations=gf.activations)


def decode(kp, gf: GlobalFeature, decoder: SkeletonDecoder,
           spacing: float = DEFAULT_SPACING,
           cap_per_segment: int = DEFAULT_CAP) -> SkeletonReconstruction:
    """Full reconstruction: build the skeleton, then apply learned offsets."""
    return apply_offsets(build_skeletons(kp, spacing, cap_per_segment), gf, decoder)


def write_reconstruction_ply(skel: SkeletonReconstruction, path,
                             comments: list[str] = ()) -> None:
    """Export as ascii ply with per-point segment id and activation."""
    seg = skel.seg_index
    act = skel.activations.detach().numpy()[seg]
    props = [("segment", "int", seg), ("activation", "double", act)]
    atomic_write_text(path, format_ply(skel.numpy_points(), props, comments))
