"""Operator-surface contracts: exit codes, artifacts, reproducibility."""

import json

import numpy as np
import pytest
import torch

from mutualkp.cli import main
from mutualkp.cloud import KeypointSet, normalize_unit_box
from mutualkp.cloudio import write_annotations, write_keypoints, write_xyz
from mutualkp.decoder import build_skeletons
from mutualkp.metrics import repeatability
from mutualkp.synthetic import SyntheticSpec, generate
from mutualkp.trainer import Detector, load_checkpoint

N_POINTS = 64
SMALL_OVERRIDES = [
    "k=4", "points_per_cloud=64", "epochs=1", "pairs_per_epoch=2",
    "encoder.sa1_points=16", "encoder.sa1_neighbors=8", "encoder.sa2_points=8",
    "encoder.sa2_neighbors=8", "encoder.sa1_radius=0.3", "encoder.sa2_radius=0.6",
    "encoder.offset_dim=16",
]


def _override_args(extra=()):
    args = []
    for ov in [*SMALL_OVERRIDES, *extra]:
        args += ["--override", ov]
    return args


@pytest.fixture(scope="module")
def tee_data(tmp_path_factory):
    root = tmp_path_factory.mktemp("data") / "tee"
    root.mkdir()
    clouds, anns = generate(SyntheticSpec("tee", points_per_cloud=N_POINTS, seed=11), 8)
    for c in clouds:
        write_xyz(c, root / f"{c.id}.xyz")
    ann_path = root.parent / "annotations.txt"
    write_annotations(anns, ann_path)
    return root, ann_path, clouds, anns


@pytest.fixture(scope="module")
def trained(tee_data, tmp_path_factory):
    data_dir, _, _, _ = tee_data
    out = tmp_path_factory.mktemp("run")
    code = main(["train", "--data", str(data_dir), "--out", str(out), "--seed", "9",
                 *_override_args()])
    assert code == 0
    return out


def test_train_missing_data_dir_exits_2(tmp_path, capsys):
    code = main(["train", "--data", str(tmp_path / "nope"), "--out", str(tmp_path / "o")])
    assert code == 2
    assert "error" in capsys.readouterr().err


def test_train_writes_manifest_with_overrides(trained):
    manifest = json.loads((trained / "manifest.json").read_text())
    assert manifest["config"]["epochs"] == 1
    assert manifest["config"]["k"] == 4
    assert manifest["config"]["category"] == "tee"
    assert manifest["design_flags"]["normalize"] == "per-object"
    log = (trained / "steps.log").read_text()
    assert f"# manifest={manifest['manifest_id']}" in log
    assert (trained / "checkpoint.pt").exists()


def test_train_rerun_reproduces_step_log(tee_data, trained, tmp_path):
    data_dir, _, _, _ = tee_data
    out2 = tmp_path / "run2"
    code = main(["train", "--data", str(data_dir), "--out", str(out2), "--seed", "9",
                 *_override_args()])
    assert code == 0
    assert (out2 / "steps.log").read_bytes() == (trained / "steps.log").read_bytes()


def test_detect_writes_k_records_idempotently(tee_data, trained, tmp_path):
    data_dir, _, clouds, _ = tee_data
    cloud_file = data_dir / f"{clouds[0].id}.xyz"
    out = tmp_path / "kp.txt"
    assert main(["detect", "--checkpoint", str(trained / "checkpoint.pt"),
                 "--cloud", str(cloud_file), "--out", str(out)]) == 0
    records = [l for l in out.read_text().splitlines() if l and not l.startswith("#")]
    assert len(records) == 4

    first = out.read_bytes()
    assert main(["detect", "--checkpoint", str(trained / "checkpoint.pt"),
                 "--cloud", str(cloud_file), "--out", str(out)]) == 0
    assert out.read_bytes() == first


def test_detect_k10_writes_10_records(tee_data, tmp_path):
    data_dir, _, _, _ = tee_data
    out_dir = tmp_path / "k10"
    overrides = [ov for ov in SMALL_OVERRIDES if not ov.startswith("k=")] + ["k=10"]
    args = []
    for ov in overrides:
        args += ["--override", ov]
    assert main(["train", "--data", str(data_dir), "--out", str(out_dir),
                 "--seed", "1", *args]) == 0
    kp_file = tmp_path / "kp10.txt"
    cloud_file = next(data_dir.glob("*.xyz"))
    assert main(["detect", "--checkpoint", str(out_dir / "checkpoint.pt"),
                 "--cloud", str(cloud_file), "--out", str(kp_file)]) == 0
    records = [l for l in kp_file.read_text().splitlines() if l and not l.startswith("#")]
    assert len(records) == 10


def test_detect_invalid_checkpoint_exits_3(tee_data, tmp_path, capsys):
    data_dir, _, clouds, _ = tee_data
    bad = tmp_path / "bad.pt"
    bad.write_bytes(b"garbage")
    code = main(["detect", "--checkpoint", str(bad),
                 "--cloud", str(data_dir / f"{clouds[0].id}.xyz"),
                 "--out", str(tmp_path / "kp.txt")])
    assert code == 3


def test_eval_with_annotation_predictions_scores_one(tee_data, tmp_path):
    data_dir, ann_path, clouds, anns = tee_data
    kp_dir = tmp_path / "ext_kp"
    kp_dir.mkdir()
    for c in clouds:
        write_keypoints(KeypointSet(anns[c.id].positions, source_id=c.id),
                        kp_dir / f"{c.id}.kp")
    out = tmp_path / "report"
    code = main(["eval", "--keypoints", str(kp_dir), "--data", str(data_dir),
                 "--annotations", str(ann_path), "--metrics", "das,miou,part_corr",
                 "--out", str(out)])
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    row = report["per_category"]["tee"]
    assert row["das"] == 1.0 and row["miou"] == 1.0 and row["part_corr"] == 1.0
    # means recomputable from the per-category table
    for name, value in report["means"].items():
        values = [r[name] for r in report["per_category"].values() if name in r]
        assert abs(value - np.mean(values)) <= 1e-9


def test_eval_metric_typo_exits_2_listing_names(tee_data, tmp_path, capsys):
    data_dir, ann_path, _, _ = tee_data
    code = main(["eval", "--keypoints", str(tmp_path), "--data", str(data_dir),
                 "--annotations", str(ann_path), "--metrics", "das,miou2",
                 "--out", str(tmp_path / "r")])
    assert code == 2
    err = capsys.readouterr().err
    assert "das" in err and "part_corr" in err


def test_noise_sweep_zero_sigma_single_point(tee_data, trained, tmp_path):
    data_dir, _, _, _ = tee_data
    out = tmp_path / "curve.txt"
    code = main(["noise-sweep", "--checkpoint", str(trained / "checkpoint.pt"),
                 "--data", str(data_dir), "--sigmas", "0", "--out", str(out)])
    assert code == 0
    rows = [l.split() for l in out.read_text().splitlines() if not l.startswith("#")]
    assert len(rows) == 1
    assert float(rows[0][0]) == 0.0 and float(rows[0][1]) == 1.0


def test_noise_sweep_rejects_descending_sigmas(tee_data, trained, tmp_path):
    data_dir, _, _, _ = tee_data
    code = main(["noise-sweep", "--checkpoint", str(trained / "checkpoint.pt"),
                 "--data", str(data_dir), "--sigmas", "0.02,0.01",
                 "--out", str(tmp_path / "c.txt")])
    assert code == 2


def test_noise_sweep_matches_direct_repeatability(tee_data, trained, tmp_path):
    data_dir, _, clouds, _ = tee_data
    out = tmp_path / "curve.txt"
    sigmas = [0.0, 0.01]
    assert main(["noise-sweep", "--checkpoint", str(trained / "checkpoint.pt"),
                 "--data", str(data_dir), "--sigmas", "0,0.01", "--seed", "3",
                 "--out", str(out)]) == 0
    rows = [l.split() for l in out.read_text().splitlines() if not l.startswith("#")]
    got = [(float(a), float(b)) for a, b in rows]

    checkpoint = load_checkpoint(trained / "checkpoint.pt")
    normalized = [normalize_unit_box(c) for c in clouds]
    expected = repeatability(checkpoint, normalized, sigmas, threshold=0.1, seed=3)
    assert got == expected


def test_export_viz_vertex_arithmetic_and_palette(tee_data, trained, tmp_path):
    data_dir, _, clouds, _ = tee_data
    checkpoint = load_checkpoint(trained / "checkpoint.pt")

    def export(cloud_id):
        out = tmp_path / f"{cloud_id}.ply"
        assert main(["export-viz", "--checkpoint", str(trained / "checkpoint.pt"),
                     "--cloud", str(data_dir / f"{cloud_id}.xyz"),
                     "--out", str(out)]) == 0
        return out.read_text().splitlines()

    lines = export(clouds[0].id)
    n_vertices = int(next(l.split()[2] for l in lines if l.startswith("element vertex")))
    kp = Detector.from_checkpoint(checkpoint)(normalize_unit_box(clouds[0]))
    skel = build_skeletons(torch.from_numpy(kp.keypoints),
                           checkpoint.config.spacing, checkpoint.config.cap_per_segment)
    assert n_vertices == N_POINTS + 4 + skel.total_points

    body = lines[lines.index("end_header") + 1:]
    kp_colors_a = [tuple(l.split()[3:6]) for l in body[N_POINTS:N_POINTS + 4]]
    body_b = export(clouds[1].id)
    body_b = body_b[body_b.index("end_header") + 1:]
    kp_colors_b = [tuple(l.split()[3:6]) for l in body_b[N_POINTS:N_POINTS + 4]]
    assert kp_colors_a == kp_colors_b  # palette keyed by channel, not by object


def test_export_viz_missing_cloud_exits_2(trained, tmp_path):
    code = main(["export-viz", "--checkpoint", str(trained / "checkpoint.pt"),
                 "--cloud", str(tmp_path / "missing.xyz"), "--out", str(tmp_path / "v.ply")])
    assert code == 2
