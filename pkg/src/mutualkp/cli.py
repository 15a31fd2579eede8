"""Command-line surface: train, detect, eval, noise-sweep, export-viz.

Exit codes: 0 ok, 2 usage or input problem, 3 artifact incompatibility,
4 numeric failure. Outputs are written atomically (temp file, then rename)
and every text artifact carries the id of the manifest written next to it.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import torch

from .cloud import KeypointSet, PointCloud, normalize_unit_box
from .cloudio import (atomic_write_text, format_keypoints, format_ply, load_cloud,
                      load_cloud_dir, read_annotations, read_keypoints)
from .config import TrainConfig, apply_overrides, load_config
from .decoder import decode
from .encoder import encode, pointwise_saliency, predict_keypoints
from .errors import IncompatibleCheckpointError, NumericError
from .manifest import build_manifest, write_manifest
from .metrics import (DEFAULT_PART_PAIRS, DEFAULT_REFERENCE_DRAWS, DEFAULT_TAU,
                      MetricsReport, evaluate_das, evaluate_miou,
                      evaluate_part_correspondence, repeatability)
from .sampling import farthest_point_sample
from .trainer import (Detector, dataset_fingerprint, format_step_log, load_checkpoint,
                      save_checkpoint, train)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INCOMPATIBLE = 3
EXIT_NUMERIC = 4

EVAL_METRICS = ("das", "miou", "part_corr")

# fixed per-channel colors so figures are comparable across objects
CHANNEL_PALETTE = [
    (230, 25, 75), (60, 180, 75), (255, 225, 25), (0, 130, 200), (245, 130, 48),
    (145, 30, 180), (70, 240, 240), (240, 50, 230), (210, 245, 60), (250, 190, 190),
]

CLOUD_GREY = (128, 128, 128)
RECONSTRUCTION_BLUE = (100, 149, 237)


def _derived_seed(*entropy) -> int:
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


def _load_config(args) -> TrainConfig:
    config = load_config(args.config) if args.config else TrainConfig()
    if getattr(args, "override", None):
        config = apply_overrides(config, args.override)
    if getattr(args, "seed", None) is not None:
        config = replace(config, seed=args.seed)
    return config


def _prepare_dataset(clouds: list[PointCloud], config: TrainConfig) -> list[PointCloud]:
    prepared = []
    for i, cloud in enumerate(clouds):
        c = normalize_unit_box(cloud)
        if len(c) > config.points_per_cloud:
            c = farthest_point_sample(c, config.points_per_cloud,
                                      seed=_derived_seed(config.seed, i))
        elif len(c) < config.points_per_cloud:
            raise ValueError(
                f"cloud {c.id!r} has {len(c)} points; config expects "
                f"{config.points_per_cloud} and upsampling is not supported"
            )
        prepared.append(c)
    return prepared


def cmd_train(args) -> int:
    config = _load_config(args)
    clouds = load_cloud_dir(args.data)
    categories = sorted({c.category for c in clouds})
    if len(categories) != 1:
        raise ValueError(f"training data must hold one category, found {categories}")
    config = replace(config, category=categories[0])

    dataset = _prepare_dataset(clouds, config)
    fingerprint = dataset_fingerprint(dataset)
    manifest = build_manifest("train", config, fingerprint,
                              extras={"data_dir": str(args.data)})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    checkpoint, records = train(config, dataset)
    write_manifest(manifest, out / "manifest.json")
    atomic_write_text(out / "steps.log", format_step_log(records, manifest["manifest_id"]))
    tmp = out / "checkpoint.pt.tmp"
    save_checkpoint(checkpoint, tmp, manifest_id=manifest["manifest_id"])
    os.replace(tmp, out / "checkpoint.pt")
    print(f"trained {len(records)} steps; artifacts in {out}")
    return EXIT_OK


def cmd_detect(args) -> int:
    checkpoint = load_checkpoint(args.checkpoint)
    cloud = normalize_unit_box(load_cloud(args.cloud))
    manifest = build_manifest("detect", checkpoint.config, checkpoint.dataset_fingerprint,
                              extras={"cloud": str(args.cloud)})
    keypoints = Detector.from_checkpoint(checkpoint)(cloud)
    out = Path(args.out)
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True, exist_ok=True)
    write_manifest(manifest, out.with_name(out.name + ".manifest.json"))
    atomic_write_text(out, format_keypoints(keypoints,
                                            [f"manifest={manifest['manifest_id']}"]))
    print(f"wrote {keypoints.k} keypoints to {out}")
    return EXIT_OK


def _predictions_for(clouds: list[PointCloud], args, checkpoint) -> dict[str, KeypointSet]:
    if args.keypoints:
        kp_dir = Path(args.keypoints)
        if not kp_dir.is_dir():
            raise ValueError(f"keypoint directory {kp_dir} does not exist")
        preds = {}
        for cloud in clouds:
            path = kp_dir / f"{cloud.id}.kp"
            if path.exists():
                preds[cloud.id] = read_keypoints(path, source_id=cloud.id)
        if not preds:
            raise ValueError(f"no <cloud_id>.kp files in {kp_dir} match the data")
        return preds
    detector = Detector.from_checkpoint(checkpoint)
    return {cloud.id: detector(cloud) for cloud in clouds}


def cmd_eval(args) -> int:
    which = [m.strip() for m in args.metrics.split(",") if m.strip()]
    bad = [m for m in which if m not in EVAL_METRICS]
    if bad or not which:
        raise ValueError(
            f"unknown metric name(s) {bad}; valid names: {', '.join(EVAL_METRICS)}"
        )
    if not args.checkpoint and not args.keypoints:
        raise ValueError("eval needs --checkpoint or --keypoints")
    checkpoint = load_checkpoint(args.checkpoint) if args.checkpoint else None

    clouds = [normalize_unit_box(c) for c in load_cloud_dir(args.data)]
    annotations = read_annotations(args.annotations) if args.annotations else {}
    if ("das" in which or "miou" in which) and not annotations:
        raise ValueError("das/miou need --annotations")

    by_category: dict[str, list[PointCloud]] = {}
    for c in clouds:
        by_category.setdefault(c.category, []).append(c)

    per_category: dict[str, dict[str, float]] = {}
    undefined: dict[str, int] = {}
    for category in sorted(by_category):
        members = by_category[category]
        preds = _predictions_for(members, args, checkpoint)
        cloud_map = {c.id: c for c in members}
        row: dict[str, float] = {}
        if "das" in which:
            mean, evaluated, undef = evaluate_das(
                preds, annotations, reference_draws=args.reference_draws, seed=args.seed)
            if mean is not None:
                row["das"] = mean
            undefined[f"das_undefined_pairs[{category}]"] = undef
        if "miou" in which:
            mean = evaluate_miou(preds, annotations, tau=args.tau)
            if mean is not None:
                row["miou"] = mean
        if "part_corr" in which:
            mean = evaluate_part_correspondence(preds, cloud_map,
                                                pairs=args.part_pairs, seed=args.seed)
            if mean is not None:
                row["part_corr"] = mean
        if row:
            per_category[category] = row

    report = MetricsReport(
        per_category=per_category,
        protocol={
            "miou_tau": args.tau,
            "miou_matching": "greedy-nearest",
            "das_reference_draws": args.reference_draws,
            "part_pairs": args.part_pairs,
            "normalize": "per-object",
            "seed": args.seed,
        },
        undefined=undefined,
    )
    config = checkpoint.config if checkpoint else TrainConfig()
    manifest = build_manifest("eval", config, extras={"metrics": which})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(manifest, out / "manifest.json")
    atomic_write_text(out / "report.txt",
                      f"# manifest={manifest['manifest_id']}\n" + report.to_text())
    atomic_write_text(out / "report.json", json.dumps(
        {"manifest_id": manifest["manifest_id"], **report.to_json_dict()},
        indent=2, sort_keys=True) + "\n")
    print(report.to_text(), end="")
    return EXIT_OK


def cmd_noise_sweep(args) -> int:
    sigmas = [float(s) for s in args.sigmas.split(",") if s.strip()]
    if sorted(sigmas) != sigmas:
        raise ValueError("sigmas must be ascending")
    checkpoint = load_checkpoint(args.checkpoint)
    clouds = [normalize_unit_box(c) for c in load_cloud_dir(args.data)]
    curve = repeatability(checkpoint, clouds, sigmas,
                          threshold=args.threshold, seed=args.seed)
    manifest = build_manifest("noise-sweep", checkpoint.config,
                              checkpoint.dataset_fingerprint,
                              extras={"sigmas": sigmas, "threshold": args.threshold})
    out = Path(args.out)
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True, exist_ok=True)
    write_manifest(manifest, out.with_name(out.name + ".manifest.json"))
    lines = [f"# manifest={manifest['manifest_id']}",
             f"# threshold={args.threshold!r}", "# columns=sigma,ratio"]
    lines += [f"{s!r} {r!r}" for s, r in curve]
    atomic_write_text(out, "\n".join(lines) + "\n")
    print(f"wrote {len(curve)} curve points to {out}")
    return EXIT_OK


def cmd_export_viz(args) -> int:
    checkpoint = load_checkpoint(args.checkpoint)
    cloud = normalize_unit_box(load_cloud(args.cloud))
    detector = Detector.from_checkpoint(checkpoint)
    bundle = detector.bundle
    with torch.no_grad():
        scores, gf = encode(cloud, bundle.encoder)
        keypoints = predict_keypoints(scores, cloud)
        saliency = pointwise_saliency(scores)
        rec = decode(keypoints, gf, bundle.decoder,
                     checkpoint.config.spacing, checkpoint.config.cap_per_segment)
    rec_points = rec.numpy_points()

    points = np.concatenate([cloud.points, keypoints.keypoints, rec_points])
    colors = np.concatenate([
        np.tile(CLOUD_GREY, (len(cloud), 1)),
        np.array([CHANNEL_PALETTE[c % len(CHANNEL_PALETTE)] for c in range(keypoints.k)]),
        np.tile(RECONSTRUCTION_BLUE, (rec_points.shape[0], 1)),
    ])
    sal = np.concatenate([saliency, np.zeros(keypoints.k), np.zeros(rec_points.shape[0])])

    manifest = build_manifest("export-viz", checkpoint.config,
                              checkpoint.dataset_fingerprint,
                              extras={"cloud": str(args.cloud)})
    out = Path(args.out)
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True, exist_ok=True)
    write_manifest(manifest, out.with_name(out.name + ".manifest.json"))
    props = [("red", "uchar", colors[:, 0]), ("green", "uchar", colors[:, 1]),
             ("blue", "uchar", colors[:, 2]), ("saliency", "double", sal)]
    atomic_write_text(out, format_ply(points, props,
                                      [f"manifest={manifest['manifest_id']}"]))
    print(f"wrote {points.shape[0]} vertices to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mutualkp",
        description="Unsupervised semantic 3D keypoints via self- and cross-instance "
                    "reconstruction: training, detection, and evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a detector on a directory of clouds")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--data", required=True, help="directory of .xyz/.ply clouds")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config entry (repeatable)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("detect", help="predict keypoints for one cloud")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--cloud", required=True)
    p.add_argument("--out", required=True, help="keypoint file to write")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", help="score predictions against annotations")
    p.add_argument("--checkpoint", help="detector checkpoint")
    p.add_argument("--keypoints", help="directory of <cloud_id>.kp files instead")
    p.add_argument("--data", required=True)
    p.add_argument("--annotations", help="annotation records file")
    p.add_argument("--metrics", default=",".join(EVAL_METRICS),
                   help=f"comma list from: {', '.join(EVAL_METRICS)}")
    p.add_argument("--out", required=True, help="report directory")
    p.add_argument("--tau", type=float, default=DEFAULT_TAU)
    p.add_argument("--reference-draws", type=int, default=DEFAULT_REFERENCE_DRAWS)
    p.add_argument("--part-pairs", type=int, default=DEFAULT_PART_PAIRS)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("noise-sweep", help="repeatability under Gaussian noise")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--sigmas", required=True, help="ascending comma list, e.g. 0,0.01,0.02")
    p.add_argument("--threshold", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="curve file to write")
    p.set_defaults(func=cmd_noise_sweep)

    p = sub.add_parser("export-viz", help="colored ply with cloud, keypoints, reconstruction")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--cloud", required=True)
    p.add_argument("--out", required=True, help="ply file to write")
    p.set_defaults(func=cmd_export_viz)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except IncompatibleCheckpointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INCOMPATIBLE
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
