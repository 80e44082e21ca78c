"""Rotation representations and forward kinematics over a fixed 22-joint body skeleton.

Conventions (also recorded in the skeleton data file):
  - rotation matrices act on column vectors, v' = R @ v;
  - the 6D rotation encoding is the first two matrix columns stored
    column-major: (c1x, c1y, c1z, c2x, c2y, c2z);
  - up axis is +Z, forward axis is +Y, offsets are meters.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import DegenerateRotation, InvalidMatrix, SchemaError, ShapeMismatch

NUM_JOINTS = 22

IDENTITY_6D = np.array([1.0, 0.0, 0.0, 0.0, 1.0, 0.0])

# Round-trips hold to 1e-9; inputs are validated at the looser 1e-6.
ROUNDTRIP_TOL = 1e-9
VALIDATION_TOL = 1e-6
DEGENERATE_TOL = 1e-12

SKELETON_SCHEMA = "skeleton/1"


def rot6d_to_matrix(r: np.ndarray) -> np.ndarray:
    """Orthonormalize 6D rotations (..., 6) into rotation matrices (..., 3, 3).

    Gram-Schmidt on the two encoded columns: b1 = c1/|c1|, b2 = the
    normalized rejection of c2 from b1, b3 = b1 x b2.  The result always
    satisfies R^T R = I and det R = +1.
    """
    r = np.asarray(r, dtype=np.float64)
    if r.shape[-1] != 6:
        raise ShapeMismatch(f"expected trailing dimension 6, got shape {r.shape}")
    if not np.all(np.isfinite(r)):
        raise DegenerateRotation("non-finite values in 6D rotation")
    c1 = r[..., 0:3]
    c2 = r[..., 3:6]
    n1 = np.linalg.norm(c1, axis=-1, keepdims=True)
    if np.any(n1 < DEGENERATE_TOL):
        raise DegenerateRotation("first column has near-zero norm")
    b1 = c1 / n1
    rej = c2 - np.sum(b1 * c2, axis=-1, keepdims=True) * b1
    n2 = np.linalg.norm(rej, axis=-1, keepdims=True)
    if np.any(n2 < DEGENERATE_TOL):
        raise DegenerateRotation("encoded columns are parallel")
    b2 = rej / n2
    b3 = np.cross(b1, b2)
    return np.stack([b1, b2, b3], axis=-1)


def matrix_to_rot6d(m: np.ndarray) -> np.ndarray:
    """Pack rotation matrices (..., 3, 3) into the 6D encoding (..., 6)."""
    m = np.asarray(m, dtype=np.float64)
    if m.shape[-2:] != (3, 3):
        raise ShapeMismatch(f"expected trailing shape (3, 3), got {m.shape}")
    _require_rotation(m, VALIDATION_TOL)
    return np.concatenate([m[..., :, 0], m[..., :, 1]], axis=-1)


def _require_rotation(m: np.ndarray, tol: float) -> None:
    gram = np.matmul(np.swapaxes(m, -1, -2), m)
    eye = np.eye(3)
    if np.max(np.abs(gram - eye)) > tol:
        raise InvalidMatrix("matrix is not orthonormal")
    if np.max(np.abs(np.linalg.det(m) - 1.0)) > tol:
        raise InvalidMatrix("matrix determinant is not +1")


@dataclass(frozen=True)
class Skeleton:
    """22-joint tree (pelvis first) with rest-pose offsets from each parent."""

    joint_names: tuple[str, ...]
    parent_index: tuple[int, ...]
    bone_offsets: np.ndarray  # (22, 3), meters

    def __post_init__(self):
        if len(self.joint_names) != NUM_JOINTS or len(self.parent_index) != NUM_JOINTS:
            raise ShapeMismatch(f"skeleton must have exactly {NUM_JOINTS} joints")
        offsets = np.asarray(self.bone_offsets, dtype=np.float64)
        if offsets.shape != (NUM_JOINTS, 3):
            raise ShapeMismatch(f"offsets must be ({NUM_JOINTS}, 3), got {offsets.shape}")
        if not np.all(np.isfinite(offsets)):
            raise ShapeMismatch("offsets must be finite")
        if self.parent_index[0] != -1:
            raise SchemaError("joint 0 (pelvis) must be the root with parent -1")
        for j, p in enumerate(self.parent_index[1:], start=1):
            if not 0 <= p < NUM_JOINTS or p == j:
                raise SchemaError(f"joint {j} has invalid parent {p}")
        # walking to the root from every joint must terminate
        for j in range(1, NUM_JOINTS):
            seen, k = set(), j
            while k != -1:
                if k in seen:
                    raise SchemaError(f"parent indices contain a cycle through joint {j}")
                seen.add(k)
                k = self.parent_index[k]
        offsets.setflags(write=False)
        object.__setattr__(self, "bone_offsets", offsets)
        object.__setattr__(self, "_topo_order", _topological_order(self.parent_index))

    @property
    def topological_order(self) -> tuple[int, ...]:
        return self._topo_order


def _topological_order(parents) -> tuple[int, ...]:
    order = [0]
    placed = {0}
    pending = [j for j in range(1, NUM_JOINTS)]
    while pending:
        rest = []
        for j in pending:
            if parents[j] in placed:
                order.append(j)
                placed.add(j)
            else:
                rest.append(j)
        pending = rest
    return tuple(order)


def forward_kinematics(
    skeleton: Skeleton, pose: np.ndarray, root_translation: np.ndarray
) -> np.ndarray:
    """World-space joint positions for local rotation matrices.

    Args:
        pose: (..., 22, 3, 3) local rotations; index 0 is the global
            (pelvis) orientation.
        root_translation: (..., 3) pelvis position.

    Returns:
        (..., 22, 3) positions; position(pelvis) = root_translation and
        position(j) = position(parent) + R_global(parent) @ offset(j).
    """
    pose = np.asarray(pose, dtype=np.float64)
    trans = np.asarray(root_translation, dtype=np.float64)
    if pose.shape[-3:] != (NUM_JOINTS, 3, 3):
        raise ShapeMismatch(f"pose must end in ({NUM_JOINTS}, 3, 3), got {pose.shape}")
    if trans.shape[-1] != 3 or trans.shape[:-1] != pose.shape[:-3]:
        raise ShapeMismatch(
            f"translation shape {trans.shape} does not match pose shape {pose.shape}"
        )
    batch = pose.shape[:-3]
    globals_rot = np.empty(batch + (NUM_JOINTS, 3, 3))
    positions = np.empty(batch + (NUM_JOINTS, 3))
    offsets = skeleton.bone_offsets
    for j in skeleton.topological_order:
        p = skeleton.parent_index[j]
        if p < 0:
            globals_rot[..., j, :, :] = pose[..., j, :, :]
            positions[..., j, :] = trans
        else:
            globals_rot[..., j, :, :] = globals_rot[..., p, :, :] @ pose[..., j, :, :]
            positions[..., j, :] = positions[..., p, :] + np.einsum(
                "...ij,j->...i", globals_rot[..., p, :, :], offsets[j]
            )
    return positions


def save_skeleton(skeleton: Skeleton, path) -> None:
    payload = {
        "schema": SKELETON_SCHEMA,
        "units": "meters",
        "up_axis": "+z",
        "forward_axis": "+y",
        "joint_names": list(skeleton.joint_names),
        "parents": list(skeleton.parent_index),
        "offsets": skeleton.bone_offsets.tolist(),
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_skeleton(path) -> Skeleton:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read skeleton file {path}: {exc}") from exc
    return _skeleton_from_payload(payload, source=str(path))


def _skeleton_from_payload(payload: dict, source: str) -> Skeleton:
    if not isinstance(payload, dict) or payload.get("schema") != SKELETON_SCHEMA:
        raise SchemaError(f"{source}: expected schema {SKELETON_SCHEMA!r}")
    for key in ("joint_names", "parents", "offsets"):
        if key not in payload:
            raise SchemaError(f"{source}: missing key {key!r}")
    return Skeleton(
        joint_names=tuple(payload["joint_names"]),
        parent_index=tuple(int(p) for p in payload["parents"]),
        bone_offsets=np.asarray(payload["offsets"], dtype=np.float64),
    )


@lru_cache(maxsize=1)
def default_skeleton() -> Skeleton:
    """The bundled 22-joint skeleton with placeholder rest offsets."""
    text = resources.files("motionstitch.data").joinpath("skeleton_body22.json").read_text()
    return _skeleton_from_payload(json.loads(text), source="skeleton_body22.json")
