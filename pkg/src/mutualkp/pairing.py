"""Cross-group pair sampling for two-branch training."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cloud import PointCloud


@dataclass
class PairStream:
    """Deterministic ordered sequence of cross-group cloud pairs."""

    pairs: list[tuple[PointCloud, PointCloud]]
    group_a_ids: list[str]
    group_b_ids: list[str]

    def __iter__(self):
        return iter(self.pairs)

    def __len__(self):
        return len(self.pairs)

    def __getitem__(self, i):
        return self.pairs[i]


def split_groups(clouds: list[PointCloud], rng: np.random.Generator):
    """Seeded shuffle, then split into two near-halves."""
    order = rng.permutation(len(clouds))
    half = len(clouds) // 2
    return [clouds[i] for i in order[:half]], [clouds[i] for i in order[half:]]


def make_pairs(clouds: list[PointCloud], seed: int, epoch_pairs: int) -> PairStream:
    """Emit epoch_pairs pairs, one member per group.

    Each group is consumed without repetition until exhausted, then
    reshuffled, so short epochs never show the same cloud twice.
    """
    clouds = list(clouds)
    if len(clouds) < 2:
        raise ValueError("pairing needs at least 2 clouds")
    categories = {c.category for c in clouds}
    if len(categories) > 1:
        raise ValueError(f"pairing requires a single category, got {sorted(categories)}")
    if epoch_pairs < 1:
        raise ValueError("epoch_pairs must be >= 1")

    rng = np.random.default_rng(seed)
    group_a, group_b = split_groups(clouds, rng)

    pairs = []
    queue_a: list[int] = []
    queue_b: list[int] = []
    for _ in range(epoch_pairs):
        if not queue_a:
            queue_a = list(rng.permutation(len(group_a)))
        if not queue_b:
            queue_b = list(rng.permutation(len(group_b)))
        pairs.append((group_a[queue_a.pop()], group_b[queue_b.pop()]))
    return PairStream(pairs, [c.id for c in group_a], [c.id for c in group_b])
