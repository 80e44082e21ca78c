"""Motion data model: 135-dim feature packing, canonicalization, standardization,
trimming/slicing, and motion file I/O (JSON and binary)."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import (
    DegeneratePose,
    InvalidLength,
    SchemaError,
    ShapeMismatch,
)
from .geometry import NUM_JOINTS, matrix_to_rot6d, rot6d_to_matrix

# per frame: 22 joints x 6 rotation values, then (x, y, z) root translation
FEATURE_DIM = NUM_JOINTS * 6 + 3

MOTION_SCHEMA = "motion/1"
STATS_SCHEMA = "stats/1"
BINARY_MAGIC = b"SINCMO01"

STD_FLOOR = 1e-8


class Annotation(NamedTuple):
    text: str
    start_frame: int
    end_frame: int


@dataclass(frozen=True)
class MotionSequence:
    """Frames of per-joint 6D rotations plus root translation.

    `rotations` is (F, 22, 6) with joint 0 holding the global (pelvis)
    orientation; `translations` is (F, 3) in meters.  Arrays are frozen
    after construction so sequences can be shared across threads.
    """

    id: str
    fps: float
    rotations: np.ndarray
    translations: np.ndarray
    annotations: tuple[Annotation, ...] = field(default=())

    def __post_init__(self):
        rot = np.asarray(self.rotations, dtype=np.float64)
        trans = np.asarray(self.translations, dtype=np.float64)
        if rot.ndim != 3 or rot.shape[1:] != (NUM_JOINTS, 6):
            raise ShapeMismatch(f"rotations must be (F, {NUM_JOINTS}, 6), got {rot.shape}")
        if trans.shape != (rot.shape[0], 3):
            raise ShapeMismatch(f"translations must be ({rot.shape[0]}, 3), got {trans.shape}")
        if rot.shape[0] < 1:
            raise ShapeMismatch("a motion needs at least one frame")
        if not (np.all(np.isfinite(rot)) and np.all(np.isfinite(trans))):
            raise ShapeMismatch("motion values must be finite")
        if not self.fps > 0:
            raise ShapeMismatch(f"fps must be positive, got {self.fps}")
        rot.setflags(write=False)
        trans.setflags(write=False)
        object.__setattr__(self, "rotations", rot)
        object.__setattr__(self, "translations", trans)
        object.__setattr__(self, "annotations", tuple(Annotation(*a) for a in self.annotations))

    def __len__(self) -> int:
        return self.rotations.shape[0]

    @property
    def num_frames(self) -> int:
        return self.rotations.shape[0]

    def pose_matrices(self) -> np.ndarray:
        """Local rotation matrices, (F, 22, 3, 3)."""
        return rot6d_to_matrix(self.rotations)


@dataclass(frozen=True)
class StandardizationStats:
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        std = np.asarray(self.std, dtype=np.float64)
        if mean.shape != (FEATURE_DIM,) or std.shape != (FEATURE_DIM,):
            raise ShapeMismatch(f"stats must be length {FEATURE_DIM}")
        std = np.maximum(std, STD_FLOOR)
        mean.setflags(write=False)
        std.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)


def pack_features(m: MotionSequence) -> np.ndarray:
    """(F, 135) features: 132 rotation values in joint order, then x, y, z."""
    flat = m.rotations.reshape(len(m), NUM_JOINTS * 6)
    return np.concatenate([flat, m.translations], axis=1)


def unpack_features(
    frames: np.ndarray,
    fps: float,
    id: str = "",
    annotations: tuple[Annotation, ...] = (),
) -> MotionSequence:
    """Inverse of pack_features (id/fps travel as a sidecar)."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[1] != FEATURE_DIM:
        raise ShapeMismatch(f"feature frames must be (F, {FEATURE_DIM}), got {frames.shape}")
    rot = frames[:, : NUM_JOINTS * 6].reshape(-1, NUM_JOINTS, 6)
    trans = frames[:, NUM_JOINTS * 6 :]
    return MotionSequence(id=id, fps=fps, rotations=rot, translations=trans, annotations=annotations)


def _rotation_about_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def canonicalize(m: MotionSequence) -> MotionSequence:
    """Rigidly rotate about +Z so the frame-0 facing direction is +Y and
    translate so the frame-0 root lands on (0, 0, z).

    The facing direction is the pelvis rotation applied to +Y, projected
    onto the ground plane.  Relative frame-to-frame motion is unchanged.
    """
    pelvis0 = rot6d_to_matrix(m.rotations[0, 0])
    forward = pelvis0 @ np.array([0.0, 1.0, 0.0])
    if np.hypot(forward[0], forward[1]) < 1e-9:
        raise DegeneratePose("frame-0 facing direction is parallel to the up axis")
    delta = np.pi / 2 - np.arctan2(forward[1], forward[0])
    q = _rotation_about_z(delta)

    pelvis_all = rot6d_to_matrix(m.rotations[:, 0])
    new_pelvis = matrix_to_rot6d(q[None] @ pelvis_all)
    rotations = m.rotations.copy()
    rotations[:, 0] = new_pelvis

    origin_shift = np.array([m.translations[0, 0], m.translations[0, 1], 0.0])
    translations = (m.translations - origin_shift) @ q.T
    return MotionSequence(
        id=m.id,
        fps=m.fps,
        rotations=rotations,
        translations=translations,
        annotations=m.annotations,
    )


def standardize(frames: np.ndarray, stats: StandardizationStats) -> np.ndarray:
    frames = np.asarray(frames, dtype=np.float64)
    if frames.shape[-1] != FEATURE_DIM:
        raise ShapeMismatch(f"expected trailing dimension {FEATURE_DIM}, got {frames.shape}")
    return (frames - stats.mean) / stats.std


def destandardize(frames: np.ndarray, stats: StandardizationStats) -> np.ndarray:
    frames = np.asarray(frames, dtype=np.float64)
    if frames.shape[-1] != FEATURE_DIM:
        raise ShapeMismatch(f"expected trailing dimension {FEATURE_DIM}, got {frames.shape}")
    return frames * stats.std + stats.mean


def compute_stats(frames: np.ndarray) -> StandardizationStats:
    """Per-dimension mean/std (population estimator) over packed frames (N, 135)."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[1] != FEATURE_DIM:
        raise ShapeMismatch(f"expected (N, {FEATURE_DIM}) frames, got {frames.shape}")
    return StandardizationStats(mean=frames.mean(axis=0), std=frames.std(axis=0))


def trim_to(m: MotionSequence, n_frames: int) -> MotionSequence:
    """Keep the first n_frames frames; annotations are clipped to the new range."""
    if not 1 <= n_frames <= len(m):
        raise InvalidLength(f"cannot trim {len(m)}-frame motion to {n_frames}")
    annotations = tuple(
        Annotation(a.text, a.start_frame, min(a.end_frame, n_frames))
        for a in m.annotations
        if a.start_frame < n_frames
    )
    return MotionSequence(
        id=m.id,
        fps=m.fps,
        rotations=m.rotations[:n_frames],
        translations=m.translations[:n_frames],
        annotations=annotations,
    )


def slice_frames(m: MotionSequence, start: int, end: int, new_id: str | None = None) -> MotionSequence:
    """Extract frames [start, end); annotations are clipped and re-based."""
    if not 0 <= start < end <= len(m):
        raise InvalidLength(f"invalid slice [{start}, {end}) of {len(m)}-frame motion")
    annotations = []
    for a in m.annotations:
        s = max(a.start_frame, start) - start
        e = min(a.end_frame, end) - start
        if s < e:
            annotations.append(Annotation(a.text, s, e))
    return MotionSequence(
        id=m.id if new_id is None else new_id,
        fps=m.fps,
        rotations=m.rotations[start:end],
        translations=m.translations[start:end],
        annotations=tuple(annotations),
    )


# ---------------------------------------------------------------------------
# File formats


def save_motion_json(m: MotionSequence, path) -> None:
    payload = {
        "schema": MOTION_SCHEMA,
        "id": m.id,
        "fps": m.fps,
        "frames": [
            {
                "rotations": m.rotations[f].reshape(-1).tolist(),
                "translation": m.translations[f].tolist(),
            }
            for f in range(len(m))
        ],
    }
    if m.annotations:
        payload["annotations"] = [
            {"text": a.text, "start_frame": a.start_frame, "end_frame": a.end_frame}
            for a in m.annotations
        ]
    Path(path).write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")


def load_motion_json(path) -> MotionSequence:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read motion file {path}: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("schema") != MOTION_SCHEMA:
        raise SchemaError(f"{path}: expected schema {MOTION_SCHEMA!r}")
    try:
        frames = payload["frames"]
        rot = np.array([f["rotations"] for f in frames], dtype=np.float64)
        trans = np.array([f["translation"] for f in frames], dtype=np.float64)
        annotations = tuple(
            Annotation(a["text"], int(a["start_frame"]), int(a["end_frame"]))
            for a in payload.get("annotations", [])
        )
        motion_id = payload["id"]
        fps = float(payload["fps"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: malformed motion payload: {exc}") from exc
    if rot.ndim != 2 or rot.shape[1] != NUM_JOINTS * 6:
        raise ShapeMismatch(f"{path}: each frame needs {NUM_JOINTS * 6} rotation values")
    return MotionSequence(
        id=motion_id,
        fps=fps,
        rotations=rot.reshape(-1, NUM_JOINTS, 6),
        translations=trans,
        annotations=annotations,
    )


def save_motion_bin(m: MotionSequence, path) -> None:
    """Binary layout: magic, little-endian u32 frame count, f32 fps, then
    frame_count x 135 float32 packed features.  Round-trips bit-exactly."""
    feats = pack_features(m).astype("<f4")
    with open(path, "wb") as fh:
        fh.write(BINARY_MAGIC)
        fh.write(struct.pack("<I", len(m)))
        fh.write(struct.pack("<f", m.fps))
        fh.write(feats.tobytes())


def load_motion_bin(path, id: str | None = None) -> MotionSequence:
    path = Path(path)
    raw = path.read_bytes()
    if raw[: len(BINARY_MAGIC)] != BINARY_MAGIC:
        raise SchemaError(f"{path}: bad magic bytes")
    header_end = len(BINARY_MAGIC) + 8
    if len(raw) < header_end:
        raise SchemaError(f"{path}: truncated header")
    (frame_count,) = struct.unpack_from("<I", raw, len(BINARY_MAGIC))
    (fps,) = struct.unpack_from("<f", raw, len(BINARY_MAGIC) + 4)
    body = raw[header_end:]
    expected = frame_count * FEATURE_DIM * 4
    if len(body) != expected:
        raise SchemaError(f"{path}: expected {expected} payload bytes, found {len(body)}")
    feats = np.frombuffer(body, dtype="<f4").reshape(frame_count, FEATURE_DIM)
    return unpack_features(feats, fps=fps, id=path.stem if id is None else id)


def load_motion(path) -> MotionSequence:
    """Dispatch on extension: .json or .bin."""
    path = Path(path)
    if path.suffix == ".json":
        return load_motion_json(path)
    if path.suffix == ".bin":
        return load_motion_bin(path)
    raise SchemaError(f"{path}: unknown motion file extension")


def save_stats(stats: StandardizationStats, path) -> None:
    payload = {"schema": STATS_SCHEMA, "mean": stats.mean.tolist(), "std": stats.std.tolist()}
    Path(path).write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")


def load_stats(path) -> StandardizationStats:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read stats file {path}: {exc}") from exc
    if "mean" not in payload or "std" not in payload:
        raise SchemaError(f"{path}: stats file needs 'mean' and 'std' arrays")
    return StandardizationStats(
        mean=np.asarray(payload["mean"], dtype=np.float64),
        std=np.asarray(payload["std"], dtype=np.float64),
    )
