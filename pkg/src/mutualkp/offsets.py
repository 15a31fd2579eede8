"""Keypoint offsets and the cross-instance reshaping of keypoint sets.

The difference between two keypoint sets is pushed through a small shared
MLP, channel by channel, and the result moves each set toward the other:
reshaped_1 = kp2 + offsets and reshaped_2 = kp1 - offsets. Their sum is
conserved by construction.
"""

from __future__ import annotations

import torch
from torch import nn


class KeypointOffsetNet(nn.Module):
    """Three affine layers (3 -> hidden -> hidden -> 3) applied per channel.

    The final layer starts at zero so training begins from the identity
    reshaping.
    """

    def __init__(self, hidden: int = 64):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(3, hidden), nn.ReLU(),
            nn.Linear(hidden, hidden), nn.ReLU(),
            nn.Linear(hidden, 3),
        )
        nn.init.zeros_(self.net[-1].weight)
        nn.init.zeros_(self.net[-1].bias)
        self.double()

    def forward(self, raw_offsets: torch.Tensor) -> torch.Tensor:
        return self.net(raw_offsets)


def keypoint_offset(kp1: torch.Tensor, kp2: torch.Tensor,
                    net: KeypointOffsetNet) -> torch.Tensor:
    """Learned per-channel offsets from the raw difference kp1 - kp2."""
    if kp1.shape != kp2.shape:
        raise ValueError(f"keypoint shape mismatch: {tuple(kp1.shape)} vs {tuple(kp2.shape)}")
    return net(kp1 - kp2)


def reshape_keypoints(kp1: torch.Tensor, kp2: torch.Tensor,
                      offsets: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    """(kp2 + offsets, kp1 - offsets); conserves the channel-wise sum."""
    if kp1.shape != kp2.shape or offsets.shape != kp1.shape:
        raise ValueError(
            f"shape mismatch: kp1 {tuple(kp1.shape)}, kp2 {tuple(kp2.shape)}, "
            f"offsets {tuple(offsets.shape)}"
        )
    return kp2 + offsets, kp1 - offsets
