"""Readers and writers for the text formats the toolkit speaks.

xyz-ascii: one point per line, ``x y z [part]``, '#' comments allowed.
ply-ascii: standard header; an integer vertex property named ``part`` is
picked up as the part label. Annotation files hold ``cloud_id semantic_id
x y z`` records; keypoint files hold ``channel x y z`` records.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .cloud import AnnotationSet, KeypointSet, PointCloud
from .errors import DegenerateInputError, ParseError

CLOUD_SUFFIXES = (".xyz", ".ply")


def _data_lines(path):
    with open(path, "r", encoding="utf-8") as fh:
        for no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            yield no, line


def atomic_write_text(path, text: str) -> None:
    """Write via a temp file in the same directory, then rename."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# xyz-ascii


def read_xyz(path, category: str = "", cloud_id: str | None = None) -> PointCloud:
    points, labels = [], []
    n_fields = None
    for no, line in _data_lines(path):
        parts = line.split()
        if len(parts) not in (3, 4):
            raise ParseError(path, no, f"expected 3 or 4 fields, got {len(parts)}")
        if n_fields is None:
            n_fields = len(parts)
        elif len(parts) != n_fields:
            raise ParseError(path, no, "inconsistent field count")
        try:
            points.append([float(parts[0]), float(parts[1]), float(parts[2])])
            if n_fields == 4:
                labels.append(int(parts[3]))
        except ValueError as exc:
            raise ParseError(path, no, f"non-numeric token: {exc}") from exc
    if len(points) < 2:
        raise DegenerateInputError(f"{path}: fewer than 2 points")
    return PointCloud(
        np.array(points),
        np.array(labels, dtype=np.int64) if labels else None,
        category=category,
        id=cloud_id if cloud_id is not None else Path(path).stem,
    )


def write_xyz(cloud: PointCloud, path) -> None:
    lines = []
    for i, p in enumerate(cloud.points):
        line = f"{float(p[0])!r} {float(p[1])!r} {float(p[2])!r}"
        if cloud.part_labels is not None:
            line += f" {int(cloud.part_labels[i])}"
        lines.append(line)
    atomic_write_text(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# ply-ascii

_PLY_FLOAT_TYPES = {"float", "float32", "float64", "double"}
_PLY_INT_TYPES = {"char", "uchar", "int8", "uint8", "short", "ushort", "int16",
                  "uint16", "int", "uint", "int32", "uint32"}


def read_ply(path, category: str = "", cloud_id: str | None = None) -> PointCloud:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != "ply":
        raise ParseError(path, 1, "not a ply file (missing 'ply' magic)")

    n_vertices = None
    props: list[str] = []
    in_vertex_element = False
    body_start = None
    for i, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if line.startswith("comment") or not line:
            continue
        if line.startswith("format"):
            if "ascii" not in line:
                raise ParseError(path, i, "only ascii ply is supported")
        elif line.startswith("element"):
            fields = line.split()
            in_vertex_element = fields[1] == "vertex"
            if in_vertex_element:
                try:
                    n_vertices = int(fields[2])
                except (IndexError, ValueError) as exc:
                    raise ParseError(path, i, "bad element vertex line") from exc
        elif line.startswith("property") and in_vertex_element:
            fields = line.split()
            if fields[1] == "list":
                raise ParseError(path, i, "list properties are not supported")
            props.append(fields[2])
        elif line == "end_header":
            body_start = i + 1
            break
    if body_start is None or n_vertices is None:
        raise ParseError(path, len(lines), "truncated ply header")
    for name in ("x", "y", "z"):
        if name not in props:
            raise ParseError(path, body_start - 1, f"vertex property {name!r} missing")

    col = {name: j for j, name in enumerate(props)}
    points = np.empty((n_vertices, 3), dtype=np.float64)
    labels = np.empty(n_vertices, dtype=np.int64) if "part" in col else None
    for v in range(n_vertices):
        line_no = body_start + v
        if line_no > len(lines):
            raise ParseError(path, len(lines), "vertex list truncated")
        parts = lines[line_no - 1].split()
        if len(parts) < len(props):
            raise ParseError(path, line_no, f"expected {len(props)} fields, got {len(parts)}")
        try:
            points[v, 0] = float(parts[col["x"]])
            points[v, 1] = float(parts[col["y"]])
            points[v, 2] = float(parts[col["z"]])
            if labels is not None:
                labels[v] = int(parts[col["part"]])
        except ValueError as exc:
            raise ParseError(path, line_no, f"non-numeric token: {exc}") from exc
    if n_vertices < 2:
        raise DegenerateInputError(f"{path}: fewer than 2 points")
    return PointCloud(
        points, labels, category=category,
        id=cloud_id if cloud_id is not None else Path(path).stem,
    )


def format_ply(points: np.ndarray, props: list[tuple[str, str, np.ndarray]] = (),
               comments: list[str] = ()) -> str:
    """Render an ascii ply with x y z plus extra scalar vertex properties.

    props entries are (name, ply_type, values); integer types are emitted as
    ints, everything else with repr so reruns are byte-identical.
    """
    n = points.shape[0]
    header = ["ply", "format ascii 1.0"]
    header += [f"comment {c}" for c in comments]
    header.append(f"element vertex {n}")
    header += ["property double x", "property double y", "property double z"]
    for name, ply_type, _ in props:
        header.append(f"property {ply_type} {name}")
    header.append("end_header")

    body = []
    for i in range(n):
        fields = [repr(float(points[i, 0])), repr(float(points[i, 1])),
                  repr(float(points[i, 2]))]
        for _, ply_type, values in props:
            v = values[i]
            fields.append(str(int(v)) if ply_type in _PLY_INT_TYPES else repr(float(v)))
        body.append(" ".join(fields))
    return "\n".join(header + body) + "\n"


def write_ply(cloud: PointCloud, path, comments: list[str] = ()) -> None:
    props = []
    if cloud.part_labels is not None:
        props.append(("part", "int", cloud.part_labels))
    atomic_write_text(path, format_ply(cloud.points, props, comments))


def load_pointcloud(path, format: str, category: str = "") -> PointCloud:
    """Load a cloud under an explicit format name: 'xyz-ascii' or 'ply-ascii'."""
    if format == "xyz-ascii":
        return read_xyz(path, category=category)
    if format == "ply-ascii":
        return read_ply(path, category=category)
    raise ValueError(f"unknown format {format!r} (expected 'xyz-ascii' or 'ply-ascii')")


def load_cloud(path, category: str = "") -> PointCloud:
    """Format-by-suffix convenience wrapper around load_pointcloud."""
    suffix = Path(path).suffix.lower()
    if suffix == ".xyz":
        return load_pointcloud(path, "xyz-ascii", category=category)
    if suffix == ".ply":
        return load_pointcloud(path, "ply-ascii", category=category)
    raise ValueError(f"unsupported cloud format {suffix!r} (expected .xyz or .ply)")


def load_cloud_dir(data_dir) -> list[PointCloud]:
    """Load every .xyz/.ply cloud under data_dir.

    A flat directory becomes one category named after the directory; immediate
    subdirectories become one category each. Files sort by name.
    """
    root = Path(data_dir)
    if not root.is_dir():
        raise ValueError(f"data directory {root} does not exist")
    clouds = []
    subdirs = sorted(d for d in root.iterdir() if d.is_dir())
    if subdirs:
        groups = [(d.name, d) for d in subdirs]
    else:
        groups = [(root.name, root)]
    for category, d in groups:
        for f in sorted(d.iterdir()):
            if f.suffix.lower() in CLOUD_SUFFIXES:
                clouds.append(load_cloud(f, category=category))
    if not clouds:
        raise ValueError(f"no .xyz/.ply clouds found under {root}")
    return clouds


# ---------------------------------------------------------------------------
# annotations and keypoint records


def read_annotations(path) -> dict[str, AnnotationSet]:
    """cloud_id -> AnnotationSet from 'cloud_id semantic_id x y z' records."""
    per_cloud: dict[str, tuple[list, list]] = {}
    for no, line in _data_lines(path):
        parts = line.split()
        if len(parts) != 5:
            raise ParseError(path, no, f"expected 5 fields, got {len(parts)}")
        try:
            sid = int(parts[1])
            pos = [float(parts[2]), float(parts[3]), float(parts[4])]
        except ValueError as exc:
            raise ParseError(path, no, f"non-numeric token: {exc}") from exc
        ids, positions = per_cloud.setdefault(parts[0], ([], []))
        ids.append(sid)
        positions.append(pos)
    return {
        cid: AnnotationSet(cid, np.array(ids, np.int64), np.array(pos))
        for cid, (ids, pos) in per_cloud.items()
    }


def write_annotations(annotations: dict[str, AnnotationSet], path) -> None:
    lines = []
    for cid in sorted(annotations):
        ann = annotations[cid]
        for sid, p in zip(ann.semantic_ids, ann.positions):
            lines.append(f"{cid} {int(sid)} {float(p[0])!r} {float(p[1])!r} {float(p[2])!r}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_keypoints(path, source_id: str | None = None) -> KeypointSet:
    """KeypointSet from 'channel x y z' records, ordered by channel."""
    rows = []
    for no, line in _data_lines(path):
        parts = line.split()
        if len(parts) != 4:
            raise ParseError(path, no, f"expected 4 fields, got {len(parts)}")
        try:
            rows.append((int(parts[0]), [float(parts[1]), float(parts[2]), float(parts[3])]))
        except ValueError as exc:
            raise ParseError(path, no, f"non-numeric token: {exc}") from exc
    if not rows:
        raise ParseError(path, 1, "no keypoint records")
    channels = [c for c, _ in rows]
    if sorted(channels) != list(range(len(rows))):
        raise ParseError(path, 1, "channels must be exactly 0..K-1")
    rows.sort(key=lambda r: r[0])
    return KeypointSet(
        np.array([p for _, p in rows]),
        source_id=source_id if source_id is not None else Path(path).stem,
    )


def format_keypoints(kps: KeypointSet, comments: list[str] = ()) -> str:
    lines = [f"# {c}" for c in comments]
    for c, p in enumerate(kps.keypoints):
        lines.append(f"{c} {float(p[0])!r} {float(p[1])!r} {float(p[2])!r}")
    return "\n".join(lines) + "\n"


def write_keypoints(kps: KeypointSet, path, comments: list[str] = ()) -> None:
    atomic_write_text(path, format_keypoints(kps, comments))
