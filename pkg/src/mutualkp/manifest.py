"""Run manifests: config snapshot, dataset fingerprint, and the design flags
in effect. The manifest id hashes only deterministic content, so reruns with
the same inputs reference the same id; wall-clock timestamps live here and
nowhere else.
"""

from __future__ import annotations

import hashlib
import json
from datetime import datetime, timezone

from . import kernels
from ._version import VERSION
from .cloudio import atomic_write_text
from .config import TrainConfig, config_to_dict

DESIGN_FLAGS = {
    "normalize": "per-object",
    "score_normalization": "softmax",
    "fps_tie_rule": "lowest-index",
    "coverage_truncation": "clip-last-weight",
    "pairing": "two-group-no-repeat",
    "miou_matching": "greedy-nearest",
}


def build_manifest(command: str, config: TrainConfig, dataset_fingerprint: str = "",
                   extras: dict | None = None) -> dict:
    body = {
        "tool": "mutualkp",
        "version": VERSION,
        "command": command,
        "config": config_to_dict(config),
        "dataset_fingerprint": dataset_fingerprint,
        "kernel_backend": kernels.BACKEND,
        "design_flags": dict(DESIGN_FLAGS),
    }
    if extras:
        body["extras"] = extras
    digest = hashlib.sha256(
        json.dumps(body, sort_keys=True, default=str).encode()
    ).hexdigest()[:16]
    return {"manifest_id": digest, **body,
            "created": datetime.now(timezone.utc).isoformat()}


def write_manifest(manifest: dict, path) -> None:
    atomic_write_text(path, json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
