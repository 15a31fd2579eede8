"""Two-branch training loop, checkpointing, and the inference entry point.

Every step draws a cross-group pair, encodes both clouds with the shared
encoder, reshapes the keypoint sets with the learned offsets, decodes four
reconstructions (two self, two cross), and takes one Adam step on the
combined objective. The only training-time randomness is the pair sequence,
which is derived up front from (dataset order, seed); a checkpoint therefore
resumes bit-for-bit by skipping the consumed pairs.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace

import numpy as np
import torch

from .cloud import KeypointSet, PointCloud
from .config import TrainConfig, config_from_dict, config_to_dict
from .decoder import SkeletonDecoder, decode
from .encoder import GlobalFeature, KeypointEncoder, canonical_order
from .errors import IncompatibleCheckpointError, NumericError
from .losses import LossBreakdown, ccd_parts, total_loss
from .offsets import KeypointOffsetNet, reshape_keypoints
from .pairing import make_pairs

CHECKPOINT_VERSION = 1

STEP_LOG_COLUMNS = "step,fidelity,coverage,self,mutual,reg1,reg2,total"


class Adam:
    """Adaptive-moment gradient descent over a fixed parameter list."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [torch.zeros_like(p) for p in self.params]
        self.v = [torch.zeros_like(p) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    @torch.no_grad()
    def step(self):
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad
            m.mul_(self.beta1).add_(g, alpha=1.0 - self.beta1)
            v.mul_(self.beta2).addcmul_(g, g, value=1.0 - self.beta2)
            p.sub_(self.lr * (m / bc1) / ((v / bc2).sqrt() + self.eps))

    def state_dict(self):
        return {"t": self.t, "m": [m.clone() for m in self.m],
                "v": [v.clone() for v in self.v]}

    def load_state_dict(self, state):
        self.t = int(state["t"])
        if len(state["m"]) != len(self.params):
            raise IncompatibleCheckpointError("optimizer state does not match parameters")
        self.m = [m.clone() for m in state["m"]]
        self.v = [v.clone() for v in state["v"]]


@torch.no_grad()
def clip_grad_norm(params, max_norm: float) -> float:
    """Scale gradients so their global L2 norm is at most max_norm."""
    grads = [p.grad for p in params if p.grad is not None]
    if not grads:
        return 0.0
    total = torch.sqrt(sum((g * g).sum() for g in grads))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / total
        for g in grads:
            g.mul_(scale)
    return float(total)


@dataclass
class ModelBundle:
    """The three learnable pieces: encoder, keypoint-offset MLP, decoder."""

    encoder: KeypointEncoder
    offset_net: KeypointOffsetNet
    decoder: SkeletonDecoder

    @classmethod
    def from_config(cls, config: TrainConfig) -> "ModelBundle":
        torch.manual_seed(config.seed)
        encoder = KeypointEncoder(
            config.k, sa1_points=config.sa1_points, sa1_radius=config.sa1_radius,
            sa1_neighbors=config.sa1_neighbors, sa2_points=config.sa2_points,
            sa2_radius=config.sa2_radius, sa2_neighbors=config.sa2_neighbors,
            offset_feature_dim=config.offset_feature_dim,
        )
        offset_net = KeypointOffsetNet()
        decoder = SkeletonDecoder(config.k, offset_feature_dim=config.offset_feature_dim)
        return cls(encoder, offset_net, decoder)

    def parameters(self):
        return (list(self.encoder.parameters()) + list(self.offset_net.parameters())
                + list(self.decoder.parameters()))

    def state(self):
        return {"encoder": self.encoder.state_dict(),
                "offsets": self.offset_net.state_dict(),
                "decoder": self.decoder.state_dict()}

    def load_state(self, state):
        try:
            self.encoder.load_state_dict(state["encoder"])
            self.offset_net.load_state_dict(state["offsets"])
            self.decoder.load_state_dict(state["decoder"])
        except (KeyError, RuntimeError) as exc:
            raise IncompatibleCheckpointError(f"model state does not fit config: {exc}") from exc


@dataclass
class Checkpoint:
    config: TrainConfig
    global_step: int
    model_state: dict
    adam_state: dict
    dataset_fingerprint: str
    version: int = CHECKPOINT_VERSION


@dataclass
class StepRecord:
    step: int
    loss: LossBreakdown

    def to_line(self) -> str:
        return ",".join([str(self.step)] + [repr(v) for v in self.loss.values()])


def format_step_log(records: list[StepRecord], manifest_id: str | None = None) -> str:
    lines = []
    if manifest_id is not None:
        lines.append(f"# manifest={manifest_id}")
    lines.append(f"# columns={STEP_LOG_COLUMNS}")
    lines.extend(r.to_line() for r in records)
    return "\n".join(lines) + "\n"


def parse_step_log(text: str) -> list[StepRecord]:
    records = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        step = int(parts[0])
        vals = [float(v) for v in parts[1:]]
        records.append(StepRecord(step, LossBreakdown(*vals)))
    return records


def dataset_fingerprint(clouds: list[PointCloud]) -> str:
    h = hashlib.sha256()
    for c in clouds:
        h.update(c.id.encode())
        h.update(c.category.encode())
        h.update(np.ascontiguousarray(c.points).tobytes())
        if c.part_labels is not None:
            h.update(np.ascontiguousarray(c.part_labels).tobytes())
    return h.hexdigest()


def _canonical_tensor(cloud: PointCloud) -> torch.Tensor:
    return torch.from_numpy(cloud.points[canonical_order(cloud.points)])


def _check_finite(**components):
    for name, tensor in components.items():
        if not torch.isfinite(tensor).all():
            raise NumericError(f"non-finite value in loss component {name!r}")


def train_step_losses(bundle: ModelBundle, t1: torch.Tensor, t2: torch.Tensor,
                      config: TrainConfig) -> LossBreakdown:
    """Forward both branches and assemble the combined loss (graph attached)."""
    w1, a1, of1 = bundle.encoder(t1)
    w2, a2, of2 = bundle.encoder(t2)
    kp1 = w1 @ t1
    kp2 = w2 @ t2
    gf1 = GlobalFeature(a1, of1, config.k)
    gf2 = GlobalFeature(a2, of2, config.k)

    offsets = bundle.offset_net(kp1 - kp2)
    if config.mutual_direction == "mirrored":
        offsets = -offsets
    kp1_prime, kp2_prime = reshape_keypoints(kp1, kp2, offsets)

    rec1 = decode(kp1, gf1, bundle.decoder, config.spacing, config.cap_per_segment)
    rec2 = decode(kp2, gf2, bundle.decoder, config.spacing, config.cap_per_segment)
    rec1_prime = decode(kp1_prime, gf1, bundle.decoder, config.spacing, config.cap_per_segment)
    rec2_prime = decode(kp2_prime, gf2, bundle.decoder, config.spacing, config.cap_per_segment)

    fid1, cov1 = ccd_parts(rec1, t1)
    fid2, cov2 = ccd_parts(rec2, t2)
    if config.mutual_target == "input":
        tm1, tm2 = t1, t2
    else:
        tm1, tm2 = rec1.points.detach(), rec2.points.detach()
    fid1m, cov1m = ccd_parts(rec1_prime, tm1)
    fid2m, cov2m = ccd_parts(rec2_prime, tm2)

    _check_finite(fidelity_1=fid1, coverage_1=cov1, fidelity_2=fid2, coverage_2=cov2,
                  mutual_fidelity_1=fid1m, mutual_coverage_1=cov1m,
                  mutual_fidelity_2=fid2m, mutual_coverage_2=cov2m,
                  keypoint_offsets=offsets)

    return total_loss(
        (fid1 + cov1) + (fid2 + cov2),
        (fid1m + cov1m) + (fid2m + cov2m),
        skeleton_offsets=[rec1.offsets, rec2.offsets, rec1_prime.offsets, rec2_prime.offsets],
        keypoint_offsets=offsets,
        lambda_self=config.lambda_self, lambda_mutual=config.lambda_mutual,
        mu_skeleton=config.mu_skeleton, mu_keypoint=config.mu_keypoint,
        fidelity=float((fid1 + fid2 + fid1m + fid2m).detach()),
        coverage=float((cov1 + cov2 + cov1m + cov2m).detach()),
    )


def resolve_pairs_per_epoch(config: TrainConfig, dataset_size: int) -> int:
    if config.pairs_per_epoch is not None:
        return config.pairs_per_epoch
    return max(1, dataset_size // 2)


def _validate_dataset(config: TrainConfig, dataset: list[PointCloud]):
    if not dataset:
        raise ValueError("training needs a nonempty dataset")
    categories = {c.category for c in dataset}
    if len(categories) != 1:
        raise ValueError(f"training needs a single category, got {sorted(categories)}")
    if config.category not in categories:
        raise ValueError(
            f"config category {config.category!r} does not match dataset {categories.pop()!r}"
        )
    for c in dataset:
        if len(c) != config.points_per_cloud:
            raise ValueError(
                f"cloud {c.id!r} has {len(c)} points, config expects {config.points_per_cloud}"
            )
        if np.abs(c.points).max() > 0.5 + 1e-6:
            raise ValueError(f"cloud {c.id!r} is not normalized to the unit box")


def _run_steps(bundle, adam, config, stream, start: int, end: int, step_callback=None):
    records = []
    for step in range(start, end):
        ca, cb = stream[step]
        breakdown = train_step_losses(bundle, _canonical_tensor(ca), _canonical_tensor(cb), config)
        adam.zero_grad()
        breakdown.total_tensor.backward()
        if config.grad_clip > 0:
            clip_grad_norm(adam.params, config.grad_clip)
        adam.step()
        record = StepRecord(step, replace(breakdown, total_tensor=None))
        records.append(record)
        if step_callback is not None:
            step_callback(record)
    return records


def train(config: TrainConfig, dataset: list[PointCloud], stop_after_steps: int | None = None,
          step_callback=None) -> tuple[Checkpoint, list[StepRecord]]:
    """Run the configured number of steps (or fewer) from a fresh initialization."""
    _validate_dataset(config, dataset)
    pairs_per_epoch = resolve_pairs_per_epoch(config, len(dataset))
    total_steps = config.epochs * pairs_per_epoch
    end = total_steps if stop_after_steps is None else min(stop_after_steps, total_steps)

    stream = make_pairs(dataset, config.seed, total_steps)
    bundle = ModelBundle.from_config(config)
    adam = Adam(bundle.parameters(), lr=config.learning_rate)
    records = _run_steps(bundle, adam, config, stream, 0, end, step_callback)
    checkpoint = Checkpoint(config, end, bundle.state(), adam.state_dict(),
                            dataset_fingerprint(dataset))
    return checkpoint, records


def resume(checkpoint: Checkpoint, dataset: list[PointCloud], until_step: int | None = None,
           step_callback=None) -> tuple[Checkpoint, list[StepRecord]]:
    """Continue a run; the trajectory matches an uninterrupted one bit-for-bit."""
    if checkpoint.version != CHECKPOINT_VERSION:
        raise IncompatibleCheckpointError(
            f"checkpoint version {checkpoint.version}, expected {CHECKPOINT_VERSION}"
        )
    config = checkpoint.config
    _validate_dataset(config, dataset)
    if checkpoint.dataset_fingerprint != dataset_fingerprint(dataset):
        raise IncompatibleCheckpointError("dataset does not match the checkpoint fingerprint")

    bundle, adam = _restore_models(checkpoint)
    pairs_per_epoch = resolve_pairs_per_epoch(config, len(dataset))
    total_steps = config.epochs * pairs_per_epoch
    end = total_steps if until_step is None else min(until_step, total_steps)
    stream = make_pairs(dataset, config.seed, total_steps)
    records = _run_steps(bundle, adam, config, stream, checkpoint.global_step, end,
                         step_callback)
    new_ck = Checkpoint(config, max(end, checkpoint.global_step), bundle.state(),
                        adam.state_dict(), checkpoint.dataset_fingerprint)
    return new_ck, records


def _restore_models(checkpoint: Checkpoint) -> tuple[ModelBundle, Adam]:
    bundle = ModelBundle.from_config(checkpoint.config)
    bundle.load_state(checkpoint.model_state)
    adam = Adam(bundle.parameters(), lr=checkpoint.config.learning_rate)
    adam.load_state_dict(checkpoint.adam_state)
    return bundle, adam


class Detector:
    """Inference wrapper: cloud -> keypoints, no gradients, no reshaping."""

    def __init__(self, bundle: ModelBundle, k: int):
        self.bundle = bundle
        self.k = k

    @classmethod
    def from_checkpoint(cls, checkpoint: Checkpoint) -> "Detector":
        bundle, _ = _restore_models(checkpoint)
        return cls(bundle, checkpoint.config.k)

    @torch.no_grad()
    def __call__(self, cloud: PointCloud) -> KeypointSet:
        if len(cloud) < self.k:
            raise ValueError(f"cloud has {len(cloud)} points but k={self.k}")
        t = _canonical_tensor(cloud)
        weights, _, _ = self.bundle.encoder(t)
        if not torch.isfinite(weights).all():
            raise NumericError(f"encoder produced non-finite scores on cloud {cloud.id!r}")
        return KeypointSet((weights @ t).numpy(), source_id=cloud.id)


def detect(checkpoint: Checkpoint, cloud: PointCloud) -> KeypointSet:
    return Detector.from_checkpoint(checkpoint)(cloud)


def save_checkpoint(checkpoint: Checkpoint, path, manifest_id: str | None = None) -> None:
    cfg = checkpoint.config
    payload = {
        "version": checkpoint.version,
        "config": config_to_dict(cfg),
        "global_step": checkpoint.global_step,
        "models": checkpoint.model_state,
        "adam": checkpoint.adam_state,
        "dataset_fingerprint": checkpoint.dataset_fingerprint,
        "manifest_id": manifest_id or "",
        "encoder_manifest": {
            "k": cfg.k, "score_normalization": "softmax",
            "sa1_points": cfg.sa1_points, "sa1_radius": cfg.sa1_radius,
            "sa1_neighbors": cfg.sa1_neighbors, "sa2_points": cfg.sa2_points,
            "sa2_radius": cfg.sa2_radius, "sa2_neighbors": cfg.sa2_neighbors,
            "offset_feature_dim": cfg.offset_feature_dim,
        },
    }
    torch.save(payload, path)


def load_checkpoint(path) -> Checkpoint:
    try:
        payload = torch.load(path, weights_only=True)
        version = payload["version"]
        if version != CHECKPOINT_VERSION:
            raise IncompatibleCheckpointError(
                f"checkpoint version {version}, expected {CHECKPOINT_VERSION}"
            )
        return Checkpoint(
            config=config_from_dict(payload["config"]),
            global_step=int(payload["global_step"]),
            model_state=payload["models"],
            adam_state=payload["adam"],
            dataset_fingerprint=payload["dataset_fingerprint"],
            version=version,
        )
    except IncompatibleCheckpointError:
        raise
    except Exception as exc:
        raise IncompatibleCheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
