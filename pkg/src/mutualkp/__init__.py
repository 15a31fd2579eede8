"""Unsupervised category-level 3D semantic keypoints from point clouds.

Keypoints are learned so that they reconstruct both their own object and
other instances of the same category through a shared skeleton decoder,
and are scored with alignment, IoU, part-correspondence, and noise
repeatability protocols.
"""

from ._version import VERSION as __version__
from .cloud import (AnnotationSet, KeypointSet, PointCloud, add_gaussian_noise,
                    normalize_unit_box)
from .config import TrainConfig
from .decoder import SkeletonDecoder, SkeletonReconstruction, build_skeletons, decode
from .encoder import (GlobalFeature, KeypointEncoder, ScoreMatrix, encode,
                      pointwise_saliency, predict_keypoints)
from .kernels import backend as kernel_backend
from .losses import (LossBreakdown, ccd, coverage_loss, fidelity_loss, mutual_loss,
                     self_loss, total_loss)
from .metrics import MetricsReport, das, miou, part_correspondence, repeatability
from .offsets import KeypointOffsetNet, keypoint_offset, reshape_keypoints
from .pairing import PairStream, make_pairs
from .sampling import farthest_point_sample
from .synthetic import SyntheticSpec, generate
from .trainer import Checkpoint, Detector, detect, resume, train

__all__ = [
    "__version__", "kernel_backend",
    "PointCloud", "KeypointSet", "AnnotationSet", "normalize_unit_box",
    "add_gaussian_noise", "farthest_point_sample", "PairStream", "make_pairs",
    "ScoreMatrix", "GlobalFeature", "KeypointEncoder", "encode", "predict_keypoints",
    "pointwise_saliency", "KeypointOffsetNet", "keypoint_offset", "reshape_keypoints",
    "SkeletonReconstruction", "SkeletonDecoder", "build_skeletons", "decode",
    "LossBreakdown", "fidelity_loss", "coverage_loss", "ccd", "self_loss",
    "mutual_loss", "total_loss", "TrainConfig", "Checkpoint", "train", "resume",
    "detect", "Detector", "MetricsReport", "das", "miou", "part_correspondence",
    "repeatability", "SyntheticSpec", "generate",
]
