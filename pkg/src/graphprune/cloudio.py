"""On-disk formats: columnar text clouds, binary PLY points, JSON manifests.

All formats round-trip exactly: floats are written with ``repr`` (shortest
exact decimal) in the text formats and as little-endian float64 in PLY.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .datatypes import (
    BoneLabel,
    FramePoint,
    FrameTransform,
    LabeledCloud,
    N_CLASSES,
    Position,
    ScanFrame,
    ScanKind,
    ScanRecord,
)
from .errors import EmptyInputError, InvalidInputError, ParseError, SchemaError, ValidationError

CSV_HEADER = "x,y,z,label,scan_id,frame,u,v,artifact"

_PLY_PROPS = [
    ("x", "double"),
    ("y", "double"),
    ("z", "double"),
    ("label", "uchar"),
    ("frame", "int"),
    ("u", "double"),
    ("v", "double"),
    ("artifact", "uchar"),
]
_PLY_DTYPE = np.dtype(
    [
        ("x", "<f8"),
        ("y", "<f8"),
        ("z", "<f8"),
        ("label", "u1"),
        ("frame", "<i4"),
        ("u", "<f8"),
        ("v", "<f8"),
        ("artifact", "u1"),
    ]
)


def save_cloud(path, cloud: LabeledCloud) -> None:
    """Write ``cloud`` to ``path``; format chosen by suffix (.ply or text)."""
    if len(cloud) == 0:
        raise EmptyInputError("refusing to save an empty cloud")
    if "," in cloud.source or "\n" in cloud.source:
        raise InvalidInputError(f"scan_id {cloud.source!r} contains a delimiter")
    path = Path(path)
    if path.suffix.lower() == ".ply":
        _save_ply(path, cloud)
    else:
        _save_csv(path, cloud)


def load_cloud(path) -> LabeledCloud:
    path = Path(path)
    if path.suffix.lower() == ".ply":
        return _load_ply(path)
    return _load_csv(path)


def _save_csv(path: Path, cloud: LabeledCloud) -> None:
    lines = [CSV_HEADER]
    for i in range(len(cloud)):
        x, y, z = cloud.xyz[i]
        lines.append(
            f"{x!r},{y!r},{z!r},{int(cloud.labels[i])},{cloud.source},"
            f"{int(cloud.frame_index[i])},{cloud.u[i]!r},{cloud.v[i]!r},"
            f"{int(cloud.is_artifact[i])}"
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _load_csv(path: Path) -> LabeledCloud:
    text = path.read_text(encoding="utf-8")
    if not text.strip():
        raise ParseError("empty file", path=path)
    rows = text.splitlines()
    if rows[0].strip() != CSV_HEADER:
        raise ParseError(f"expected header {CSV_HEADER!r}, got {rows[0]!r}", path=path, line=1)
    xyz, labels, fidx, us, vs, art = [], [], [], [], [], []
    source = None
    data_rows = 0
    for lineno, row in enumerate(rows[1:], start=2):
        if not row.strip():
            continue
        fields = row.split(",")
        if len(fields) != 9:
            raise ParseError(f"expected 9 fields, got {len(fields)}", path=path, line=lineno)
        try:
            x, y, z = float(fields[0]), float(fields[1]), float(fields[2])
            label = int(fields[3])
            frame = int(fields[5])
            u, v = float(fields[6]), float(fields[7])
            artifact = int(fields[8])
        except ValueError as exc:
            raise ParseError(f"bad numeric field: {exc}", path=path, line=lineno) from None
        if not 0 <= label < N_CLASSES:
            raise SchemaError(f"{path}:{lineno}: unknown label code {label}")
        if artifact not in (0, 1):
            raise SchemaError(f"{path}:{lineno}: artifact flag must be 0 or 1, got {artifact}")
        if source is None:
            source = fields[4]
        elif fields[4] != source:
            raise SchemaError(
                f"{path}:{lineno}: scan_id {fields[4]!r} differs from {source!r}"
            )
        xyz.append((x, y, z))
        labels.append(label)
        fidx.append(frame)
        us.append(u)
        vs.append(v)
        art.append(bool(artifact))
        data_rows += 1
    if data_rows == 0:
        raise ParseError("no data rows", path=path, line=1)
    return LabeledCloud(
        source=source,
        xyz=np.array(xyz),
        labels=np.array(labels, dtype=np.uint8),
        frame_index=np.array(fidx, dtype=np.int32),
        u=np.array(us),
        v=np.array(vs),
        is_artifact=np.array(art, dtype=bool),
    )


def _save_ply(path: Path, cloud: LabeledCloud) -> None:
    n = len(cloud)
    header = ["ply", "format binary_little_endian 1.0", f"comment scan_id={cloud.source}"]
    header.append(f"element vertex {n}")
    header.extend(f"property {typ} {name}" for name, typ in _PLY_PROPS)
    header.append("end_header")
    rec = np.empty(n, dtype=_PLY_DTYPE)
    rec["x"], rec["y"], rec["z"] = cloud.xyz[:, 0], cloud.xyz[:, 1], cloud.xyz[:, 2]
    rec["label"] = cloud.labels
    rec["frame"] = cloud.frame_index
    rec["u"], rec["v"] = cloud.u, cloud.v
    rec["artifact"] = cloud.is_artifact.astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        fh.write(rec.tobytes())


def _load_ply(path: Path) -> LabeledCloud:
    blob = path.read_bytes()
    if not blob:
        raise ParseError("empty file", path=path)
    end_marker = b"end_header\n"
    pos = blob.find(end_marker)
    if pos < 0 or not blob.startswith(b"ply\n"):
        raise ParseError("not a PLY file", path=path, line=1)
    header_lines = blob[:pos].decode("ascii", errors="replace").splitlines()
    body = blob[pos + len(end_marker):]
    n = None
    source = ""
    props = []
    for lineno, line in enumerate(header_lines, start=1):
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "format" and parts[1] != "binary_little_endian":
            raise ParseError(f"unsupported PLY format {parts[1]!r}", path=path, line=lineno)
        if parts[0] == "comment" and parts[1].startswith("scan_id="):
            source = line.split("scan_id=", 1)[1]
        if parts[0] == "element":
            if parts[1] != "vertex":
                raise SchemaError(f"{path}:{lineno}: unexpected element {parts[1]!r}")
            n = int(parts[2])
        if parts[0] == "property":
            props.append((parts[2], parts[1]))
    if n is None:
        raise ParseError("missing vertex element", path=path)
    if props != _PLY_PROPS:
        raise SchemaError(f"{path}: unexpected property list {props}")
    expected = n * _PLY_DTYPE.itemsize
    if len(body) < expected:
        raise ParseError(
            f"truncated payload: expected {expected} bytes, got {len(body)}", path=path
        )
    rec = np.frombuffer(body[:expected], dtype=_PLY_DTYPE)
    labels = rec["label"]
    bad = np.nonzero(labels >= N_CLASSES)[0]
    if bad.size:
        raise SchemaError(f"{path}: vertex {int(bad[0])} has unknown label code {int(labels[bad[0]])}")
    return LabeledCloud(
        source=source,
        xyz=np.column_stack([rec["x"], rec["y"], rec["z"]]).astype(np.float64),
        labels=labels.astype(np.uint8),
        frame_index=rec["frame"].astype(np.int32),
        u=rec["u"].astype(np.float64),
        v=rec["v"].astype(np.float64),
        is_artifact=rec["artifact"].astype(bool),
    )


MANIFEST_FORMAT = "graphprune-scan"
MANIFEST_VERSION = 1


def save_manifest(path, scan: ScanRecord) -> None:
    """Write the full scan (transforms and frame points) as JSON."""
    scan.validate()
    doc = {
        "format": MANIFEST_FORMAT,
        "version": MANIFEST_VERSION,
        "scan_id": scan.scan_id,
        "position": scan.position.name,
        "scan_kind": scan.scan_kind.name.lower(),
        "frames": [
            {
                "frame_index": f.transform.frame_index,
                "pixel_spacing": [float(s) for s in f.transform.pixel_spacing],
                "rotation": [[float(c) for c in row] for row in f.transform.rotation],
                "translation": [float(c) for c in f.transform.translation],
                "points": [
                    {
                        "u": p.u,
                        "v": p.v,
                        "label": int(p.label),
                        "line_id": p.line_id,
                        "artifact": bool(p.is_artifact),
                    }
                    for p in f.points
                ],
            }
            for f in scan.frames
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def load_manifest(path) -> ScanRecord:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", path=path, line=exc.lineno) from None
    except FileNotFoundError:
        raise
    if not isinstance(doc, dict) or doc.get("format") != MANIFEST_FORMAT:
        raise SchemaError(f"{path}: not a {MANIFEST_FORMAT} file")
    if doc.get("version") != MANIFEST_VERSION:
        raise SchemaError(f"{path}: unsupported version {doc.get('version')!r}")
    try:
        frames = []
        for fdoc in doc["frames"]:
            transform = FrameTransform(
                frame_index=int(fdoc["frame_index"]),
                pixel_spacing=tuple(float(s) for s in fdoc["pixel_spacing"]),
                rotation=np.array(fdoc["rotation"], dtype=float),
                translation=np.array(fdoc["translation"], dtype=float),
            )
            points = [
                FramePoint(
                    u=float(p["u"]),
                    v=float(p["v"]),
                    label=BoneLabel.from_code(p["label"]),
                    line_id=int(p["line_id"]),
                    is_artifact=bool(p["artifact"]),
                )
                for p in fdoc["points"]
            ]
            frames.append(ScanFrame(transform, points))
        scan = ScanRecord(
            scan_id=str(doc["scan_id"]),
            position=Position.from_name(doc["position"]),
            scan_kind=ScanKind.from_name(doc["scan_kind"]),
            frames=frames,
        )
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"{path}: missing or malformed field ({exc})") from None
    try:
        scan.validate()
    except (ValidationError, InvalidInputError) as exc:
        raise ValidationError(f"{path}: {exc}") from None
    return scan
