"""File formats: JSON documents, CSV tables, PNG and PFM images, dataset manifests.

Every writer goes through a temporary file in the destination directory
followed by ``os.replace``, so readers never see a half-written file.
Floats are written with Python's shortest round-trip representation, which
makes write-then-read exact.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
from PIL import Image

from .camera import CameraIntrinsics
from .errors import MissingImage, ParseError
from .kinematics import DHChain, JointState
from .observations import CalibrationShot, CalibrationTarget
from .se3 import RigidTransform
from .trajectory import Trajectory

# Joint values above this magnitude are almost certainly degrees.
_MAX_JOINT_RAD = 2.0 * math.pi + 1e-6

# OpenCV camera axes (x right, y down, z forward) to OpenGL (y up, z backward).
_CV_TO_GL = np.diag([1.0, -1.0, -1.0, 1.0])

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


# ---------------------------------------------------------------------------
# atomic writes


def write_bytes(path, data: bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_text(path, text: str) -> Path:
    return write_bytes(path, text.encode("utf-8"))


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"{type(obj).__name__} is not JSON serializable")


def dumps_json(obj) -> str:
    """Stable JSON text: 2-space indent, non-finite floats rejected."""
    return json.dumps(obj, indent=2, default=_json_default, allow_nan=False, ensure_ascii=False) + "\n"


def write_json(path, obj) -> Path:
    return write_text(path, dumps_json(obj))


def read_json(path):
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return write_text(path, buf.getvalue())


def _read_csv(path, expected_prefix: Sequence[str]) -> tuple[list[str], list[tuple[int, list[str]]]]:
    """Header and ``(line_number, fields)`` rows; blank lines are skipped."""
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(f"{path}: empty file, expected header {','.join(expected_prefix)}") from None
        if header[: len(expected_prefix)] != list(expected_prefix):
            raise ParseError(f"{path}: line 1: header must start with {','.join(expected_prefix)}, got {','.join(header)}")
        rows = [(reader.line_num, row) for row in reader if any(f.strip() for f in row)]
    return header, rows


def _float(path, line: int, column: str, text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"{path}: line {line}: column {column!r}: {text!r} is not a number") from None
    if not math.isfinite(value):
        raise ParseError(f"{path}: line {line}: column {column!r} is not finite")
    return value


# ---------------------------------------------------------------------------
# poses, joints, calibration inputs


def write_trajectory(path, traj: Trajectory) -> Path:
    return write_json(path, traj.to_json())


def read_trajectory(path) -> Trajectory:
    data = read_json(path)
    if not isinstance(data, list):
        raise ParseError(f"{path}: trajectory must be a JSON list of frames")
    try:
        return Trajectory.from_json(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: invalid trajectory: {exc}") from None


def write_joint_log(path, log: Sequence[JointState], n_joints: Optional[int] = None) -> Path:
    n = n_joints if n_joints is not None else (log[0].q.shape[0] if log else 6)
    header = ["frame_id"] + [f"q{k + 1}" for k in range(n)]
    return write_csv(path, header, ([js.frame_id] + [repr(float(v)) for v in js.q] for js in log))


def read_joint_log(path) -> list[JointState]:
    """``frame_id,q1,...,qn`` in radians, one row per image.

    Raises:
        ParseError: bad header, wrong field count, non-numeric or duplicate
            entries, or angles beyond ±2π (a sign of degrees); the message
            names the file line.
    """
    header, rows = _read_csv(path, ["frame_id"])
    n = len(header) - 1
    if n < 1 or header[1:] != [f"q{k + 1}" for k in range(n)]:
        raise ParseError(f"{path}: line 1: joint columns must be q1..qn, got {','.join(header[1:])}")
    log, seen = [], set()
    for line, row in rows:
        if len(row) != n + 1:
            raise ParseError(f"{path}: line {line}: expected {n + 1} fields, got {len(row)}")
        fid = row[0].strip()
        if not fid:
            raise ParseError(f"{path}: line {line}: empty frame_id")
        if fid in seen:
            raise ParseError(f"{path}: line {line}: duplicate frame_id {fid!r}")
        seen.add(fid)
        q = [_float(path, line, header[k + 1], row[k + 1]) for k in range(n)]
        bad = [v for v in q if abs(v) > _MAX_JOINT_RAD]
        if bad:
            raise ParseError(f"{path}: line {line}: joint angle {bad[0]} exceeds 2π; angles must be radians")
        log.append(JointState(fid, np.array(q)))
    return log


def write_dh(path, chain: DHChain) -> Path:
    return write_json(path, chain.to_json())


def read_dh(path) -> DHChain:
    data = read_json(path)
    if isinstance(data, dict):
        data = data.get("joints")
    if not isinstance(data, list):
        raise ParseError(f"{path}: DH file must be a list of joints or an object with 'joints'")
    try:
        return DHChain.from_json(data)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{path}: {exc}") from None


def write_target(path, target: CalibrationTarget) -> Path:
    return write_json(path, target.to_json())


def read_target(path) -> CalibrationTarget:
    data = read_json(path)
    try:
        return CalibrationTarget.from_json(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: invalid target: {exc}") from None


def write_intrinsics(path, intrinsics: CameraIntrinsics) -> Path:
    return write_json(path, intrinsics.to_dict())


def read_intrinsics(path) -> CameraIntrinsics:
    data = read_json(path)
    try:
        return CameraIntrinsics.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: invalid intrinsics: {exc}") from None


def write_observations(path, shots: Sequence[CalibrationShot]) -> Path:
    rows = (
        [s.frame_id, pid, repr(float(uv[0])), repr(float(uv[1]))]
        for s in shots
        for pid, uv in zip(s.point_ids, s.pixels)
    )
    return write_csv(path, ["frame_id", "point_id", "u", "v"], rows)


def read_observations(path) -> list[CalibrationShot]:
    """Shots in order of first appearance, robot poses unset."""
    _, rows = _read_csv(path, ["frame_id", "point_id", "u", "v"])
    groups: dict[str, list] = {}
    first_line: dict[str, int] = {}
    for line, row in rows:
        if len(row) != 4:
            raise ParseError(f"{path}: line {line}: expected 4 fields, got {len(row)}")
        fid, pid = row[0].strip(), row[1].strip()
        uv = (_float(path, line, "u", row[2]), _float(path, line, "v", row[3]))
        groups.setdefault(fid, []).append((pid, uv))
        first_line.setdefault(fid, line)
    shots = []
    for fid, obs in groups.items():
        try:
            shots.append(CalibrationShot.from_pairs(fid, None, obs))
        except ValueError as exc:
            raise ParseError(f"{path}: frame starting at line {first_line[fid]}: {exc}") from None
    return shots


def write_tool_poses_csv(path, traj: Trajectory) -> Path:
    """Robot-side table: position in meters and unit quaternion ``(w, x, y, z)``."""
    rows = ([fid] + [repr(float(v)) for v in np.concatenate([p.translation, p.rotation])] for fid, p in traj)
    return write_csv(path, ["frame_id", "x", "y", "z", "qw", "qx", "qy", "qz"], rows)


# ---------------------------------------------------------------------------
# images


def read_image(path) -> np.ndarray:
    """8-bit PNG/JPEG as float64 in [0, 1]: ``(H, W)`` gray or ``(H, W, 3)`` RGB.

    Alpha is dropped and palette images are expanded to RGB.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingImage(f"image not found: {path}")
    with Image.open(path) as im:
        if im.mode in ("L", "RGB"):
            pass
        elif im.mode == "LA":
            im = im.convert("L")
        elif im.mode in ("RGBA", "P", "PA", "CMYK", "YCbCr"):
            im = im.convert("RGB")
        else:
            raise ParseError(f"{path}: unsupported image mode {im.mode!r}; only 8-bit images are read")
        data = np.asarray(im, dtype=np.uint8)
    return data.astype(np.float64) / 255.0


def to_uint8(image: np.ndarray) -> np.ndarray:
    return np.round(np.clip(np.asarray(image, dtype=float), 0.0, 1.0) * 255.0).astype(np.uint8)


def write_png(path, image: np.ndarray) -> Path:
    """Write a [0, 1] gray or RGB image as 8-bit PNG (values are clipped)."""
    arr = to_uint8(image)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    return write_bytes(path, buf.getvalue())


def write_pfm(path, image: np.ndarray) -> Path:
    """Little-endian PFM; rows stored bottom to top as the format requires."""
    a = np.asarray(image, dtype=np.float32)
    if a.ndim == 3 and a.shape[2] == 1:
        a = a[:, :, 0]
    if a.ndim == 2:
        tag = b"Pf"
    elif a.ndim == 3 and a.shape[2] == 3:
        tag = b"PF"
    else:
        raise ValueError(f"PFM holds 1 or 3 channels, got shape {a.shape}")
    h, w = a.shape[:2]
    header = tag + b"\n" + f"{w} {h}\n-1.0\n".encode("ascii")
    body = np.ascontiguousarray(a[::-1]).astype("<f4").tobytes()
    return write_bytes(path, header + body)


def read_pfm(path) -> np.ndarray:
    """PFM as float32, top row first; either byte order is accepted."""
    path = Path(path)
    if not path.is_file():
        raise MissingImage(f"map not found: {path}")
    raw = path.read_bytes()
    fields, pos = [], 0
    while len(fields) < 4:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ParseError(f"{path}: truncated PFM header")
        fields.append(raw[start:pos].decode("ascii", "replace"))
    pos += 1  # single whitespace byte after the scale
    tag, w, h, scale = fields
    if tag not in ("Pf", "PF"):
        raise ParseError(f"{path}: not a PFM file (magic {tag!r})")
    try:
        w, h, scale = int(w), int(h), float(scale)
    except ValueError:
        raise ParseError(f"{path}: malformed PFM header") from None
    channels = 1 if tag == "Pf" else 3
    dtype = "<f4" if scale < 0 else ">f4"
    count = w * h * channels
    if len(raw) - pos < 4 * count:
        raise ParseError(f"{path}: PFM data is shorter than {w}x{h}x{channels}")
    a = np.frombuffer(raw, dtype=dtype, count=count, offset=pos).astype(np.float32)
    shape = (h, w) if channels == 1 else (h, w, 3)
    return a.reshape(shape)[::-1].copy()


def list_images(directory) -> dict[str, Path]:
    """Image files in a directory keyed by stem, sorted by name."""
    d = Path(directory)
    if not d.is_dir():
        raise MissingImage(f"not a directory: {d}")
    return {p.stem: p for p in sorted(d.iterdir()) if p.suffix.lower() in IMAGE_SUFFIXES and p.is_file()}


# ---------------------------------------------------------------------------
# dataset manifest


def camera_to_world_gl(camera_pose: RigidTransform) -> np.ndarray:
    """Manifest matrix for a ``c_from_w`` pose: camera-to-world with OpenGL axes."""
    return camera_pose.inverse().as_matrix() @ _CV_TO_GL


def camera_pose_from_gl(matrix) -> RigidTransform:
    """Inverse of :func:`camera_to_world_gl`."""
    return RigidTransform.from_matrix(np.asarray(matrix, dtype=float) @ _CV_TO_GL).inverse()


def build_manifest(
    camera_poses: Trajectory, intrinsics: CameraIntrinsics, file_paths: dict[str, str]
) -> dict:
    """Manifest document in the nerfstudio ``transforms.json`` layout."""
    frames = []
    for fid, pose in camera_poses:
        if fid not in file_paths:
            raise MissingImage(f"no image for frame {fid!r}")
        frames.append({"file_path": file_paths[fid], "transform_matrix": camera_to_world_gl(pose).tolist()})
    paths = [f["file_path"] for f in frames]
    if len(set(paths)) != len(paths):
        raise ValueError("manifest file paths must be unique")
    doc = {"camera_model": "OPENCV"}
    doc.update(intrinsics.to_dict())
    doc["frames"] = frames
    return doc


def write_manifest(path, manifest: dict) -> Path:
    return write_json(path, manifest)


def read_manifest(path) -> tuple[CameraIntrinsics, list[tuple[str, np.ndarray]]]:
    """Intrinsics and ``(file_path, camera_to_world)`` pairs exactly as stored."""
    doc = read_json(path)
    try:
        intr = CameraIntrinsics.from_dict(doc)
        frames = [(f["file_path"], np.array(f["transform_matrix"], dtype=float)) for f in doc["frames"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: invalid manifest: {exc}") from None
    for fp, m in frames:
        if m.shape != (4, 4):
            raise ParseError(f"{path}: frame {fp!r}: transform_matrix must be 4x4")
    return intr, frames


def manifest_camera_poses(frames: Sequence[tuple[str, np.ndarray]]) -> Trajectory:
    """``c_from_w`` poses keyed by image stem."""
    return Trajectory((Path(fp).stem, camera_pose_from_gl(m)) for fp, m in frames)
