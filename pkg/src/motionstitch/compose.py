"""Body-part stitching of two labeled motions.

Strict mode is used for synthetic data creation and requires disjoint part
sets; override mode drops that requirement (conflicting slots go to the
motion with fewer parts) and is meant for compositing independently
generated motions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyMotion, EmptyPartSet, Incompatible, ShapeMismatch
from .motion import Annotation, MotionSequence, canonicalize, save_motion_json, trim_to
from .partlab import PART_JOINTS, BodyPart, PartSet

COMPOSITION_SCHEMA = "composition/1"

# Leg motion is strongly coupled to trajectory: whenever the fewer-part
# motion touches any of these, it supplies both legs, the pelvis rotation,
# and the translation.
LOWER_BODY_COUPLING = frozenset({BodyPart.LEFT_LEG, BodyPart.RIGHT_LEG, BodyPart.GLOBAL})

_LEG_JOINTS = sorted(PART_JOINTS[BodyPart.LEFT_LEG] | PART_JOINTS[BodyPart.RIGHT_LEG])


@dataclass(frozen=True)
class LabeledMotion:
    motion: MotionSequence
    action: str
    parts: PartSet


@dataclass(frozen=True)
class SourceMap:
    """Which input ('a' or 'b') supplied each of the 22 joint slots and the
    root translation."""

    joints: tuple[str, ...]
    translation: str

    def __post_init__(self):
        if len(self.joints) != 22 or not all(s in ("a", "b") for s in self.joints):
            raise ShapeMismatch("source map needs 22 joint entries of 'a'/'b'")
        if self.translation not in ("a", "b"):
            raise ShapeMismatch("translation source must be 'a' or 'b'")

    def to_dict(self) -> dict:
        return {"joints": list(self.joints), "translation": self.translation}


@dataclass(frozen=True)
class CompositionResult:
    motion: MotionSequence
    source_map: SourceMap
    actions: tuple[str, str]


def compatible(parts_a: PartSet, parts_b: PartSet) -> bool:
    """Two actions can run simultaneously iff their part sets are disjoint."""
    return not (frozenset(parts_a) & frozenset(parts_b))


def compose_strict(a: LabeledMotion, b: LabeledMotion) -> CompositionResult:
    """Stitch two compatible labeled motions into one.

    Steps: trim both to the shorter length (prefix), relabel so the second
    motion has at most as many parts as the first, couple legs/pelvis/
    translation to whichever side owns the lower body, take the fewer-part
    motion's joints from it and everything else from the other.  Both
    inputs are canonicalized before stitching so the transplanted
    translation lives in a shared frame.
    """
    if not a.parts or not b.parts:
        raise EmptyPartSet("strict composition needs non-empty part sets on both motions")
    if not compatible(a.parts, b.parts):
        overlap = sorted(p.value for p in frozenset(a.parts) & frozenset(b.parts))
        raise Incompatible(f"part sets overlap on: {', '.join(overlap)}")
    return _compose(a, b)


def compose_override(a: LabeledMotion, b: LabeledMotion) -> CompositionResult:
    """Like compose_strict but overlap is allowed: after reordering, any slot
    claimed by both motions is sourced from the fewer-part one."""
    return _compose(a, b)


def _compose(a: LabeledMotion, b: LabeledMotion) -> CompositionResult:
    if len(a.motion) < 1 or len(b.motion) < 1:
        raise EmptyMotion("cannot compose a zero-frame motion")
    if a.motion.fps != b.motion.fps:
        raise ShapeMismatch(
            f"fps mismatch: {a.motion.fps} vs {b.motion.fps} (resampling is out of scope)"
        )

    n = min(len(a.motion), len(b.motion))
    motions = {
        "a": trim_to(canonicalize(a.motion), n),
        "b": trim_to(canonicalize(b.motion), n),
    }

    # relabel so the "top" motion has no more parts than the base;
    # on a tie the input order stands (b stays on top)
    if len(b.parts) > len(a.parts):
        top_label, base_label = "a", "b"
        top_parts = frozenset(a.parts)
    else:
        top_label, base_label = "b", "a"
        top_parts = frozenset(b.parts)

    joint_sources = [base_label] * 22
    translation_source = base_label
    if top_parts & LOWER_BODY_COUPLING:
        translation_source = top_label
        joint_sources[0] = top_label
        for j in _LEG_JOINTS:
            joint_sources[j] = top_label
    for part in top_parts:
        for j in PART_JOINTS[part]:
            joint_sources[j] = top_label

    rotations = np.empty((n, 22, 6))
    for j, src in enumerate(joint_sources):
        rotations[:, j] = motions[src].rotations[:, j]
    translations = motions[translation_source].translations.copy()

    composed = MotionSequence(
        id=f"{a.motion.id}+{b.motion.id}",
        fps=a.motion.fps,
        rotations=rotations,
        translations=translations,
        annotations=(Annotation(a.action, 0, n), Annotation(b.action, 0, n)),
    )
    return CompositionResult(
        motion=composed,
        source_map=SourceMap(joints=tuple(joint_sources), translation=translation_source),
        actions=(a.action, b.action),
    )


def sidecar_path(motion_path) -> Path:
    path = Path(motion_path)
    return path.with_name(path.stem + ".provenance.json")


def save_composition(
    result: CompositionResult,
    motion_path,
    parent_ids: tuple[str, str],
    description: str | None = None,
) -> Path:
    """Write the composed motion plus its provenance sidecar; returns the
    sidecar path."""
    save_motion_json(result.motion, motion_path)
    payload = {
        "schema": COMPOSITION_SCHEMA,
        "source_map": result.source_map.to_dict(),
        "actions": list(result.actions),
        "parent_ids": list(parent_ids),
    }
    if description is not None:
        payload["description"] = description
    out = sidecar_path(motion_path)
    out.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return out
