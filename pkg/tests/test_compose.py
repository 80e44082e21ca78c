import json

import numpy as np
import pytest

from motionstitch.compose import (
    LOWER_BODY_COUPLING,
    CompositionResult,
    LabeledMotion,
    compatible,
    compose_override,
    compose_strict,
    save_composition,
    sidecar_path,
)
from motionstitch.errors import EmptyPartSet, Incompatible, ShapeMismatch
from motionstitch.motion import MotionSequence, canonicalize, trim_to
from motionstitch.partlab import PART_JOINTS, BodyPart

from test_motion import random_motion

LA, RA = BodyPart.LEFT_ARM, BodyPart.RIGHT_ARM
LL, RL = BodyPart.LEFT_LEG, BodyPart.RIGHT_LEG
TORSO, GLOBAL = BodyPart.TORSO, BodyPart.GLOBAL


def labeled(frames, seed, action, parts, id=None):
    m = random_motion(frames=frames, seed=seed, id=id or action)
    return LabeledMotion(motion=m, action=action, parts=frozenset(parts))


# ---------------------------------------------------------------------------
# Independent slot-assignment oracle: decides every slot on its own, straight
# from the written rules, without sharing code with the implementation.


def _owner(joint):
    for part, joints in PART_JOINTS.items():
        if joint in joints:
            return part
    raise AssertionError(joint)


def oracle_slot_source(slot, parts_a, parts_b):
    """slot is a joint index 0..21 or 'translation'; returns 'a' or 'b'."""
    if len(parts_b) > len(parts_a):
        top, base, top_parts = "a", "b", frozenset(parts_a)
    else:
        top, base, top_parts = "b", "a", frozenset(parts_b)
    lower_from_top = bool(top_parts & {LL, RL, GLOBAL})
    if slot == "translation":
        return top if lower_from_top else base
    owner = _owner(slot)
    if owner in top_parts:
        return top
    if owner is GLOBAL or owner in (LL, RL):
        return top if lower_from_top else base
    return base


def oracle_compose(a, b):
    """Expected output frames assembled slot by slot from the oracle map."""
    n = min(len(a.motion), len(b.motion))
    prepared = {
        "a": trim_to(canonicalize(a.motion), n),
        "b": trim_to(canonicalize(b.motion), n),
    }
    joints = tuple(oracle_slot_source(j, a.parts, b.parts) for j in range(22))
    translation = oracle_slot_source("translation", a.parts, b.parts)
    rot = np.stack([prepared[joints[j]].rotations[:, j] for j in range(22)], axis=1)
    trans = prepared[translation].translations
    return joints, translation, rot, trans


def random_compatible_parts(rng):
    while True:
        parts_a, parts_b = set(), set()
        for part in BodyPart:
            side = rng.integers(0, 3)
            if side == 0:
                parts_a.add(part)
            elif side == 1:
                parts_b.add(part)
        if parts_a and parts_b:
            return frozenset(parts_a), frozenset(parts_b)


def run_oracle_check(case_count=500, seed=123):
    rng = np.random.default_rng(seed)
    for case in range(case_count):
        parts_a, parts_b = random_compatible_parts(rng)
        len_a = int(rng.integers(2, 12))
        len_b = int(rng.integers(2, 12))
        a = labeled(len_a, seed=2 * case, action="A", parts=parts_a)
        b = labeled(len_b, seed=2 * case + 1, action="B", parts=parts_b)
        result = compose_strict(a, b)

        joints, translation, rot, trans = oracle_compose(a, b)
        assert result.source_map.joints == joints, (parts_a, parts_b)
        assert result.source_map.translation == translation
        assert len(result.motion) == min(len_a, len_b)
        np.testing.assert_array_equal(result.motion.rotations, rot)
        np.testing.assert_array_equal(result.motion.translations, trans)

        # lower-body coupling: the final top side owning any leg/global slot
        # implies legs, pelvis and translation all come from one source
        leg_sources = {joints[j] for p in (LL, RL) for j in PART_JOINTS[p]}
        if (parts_b if len(parts_b) <= len(parts_a) else parts_a) & LOWER_BODY_COUPLING:
            assert leg_sources == {translation} == {joints[0]}
    return case_count


# ---------------------------------------------------------------------------
# compatibility


def test_compatible_examples():
    assert not compatible({LL, RL, GLOBAL}, {RL})
    assert compatible({RA}, {LA})
    assert compatible({LA, TORSO}, frozenset())
    assert compatible(frozenset(), frozenset())


def test_compatible_is_symmetric():
    rng = np.random.default_rng(5)
    for _ in range(50):
        xs = frozenset(p for p in BodyPart if rng.integers(0, 2))
        ys = frozenset(p for p in BodyPart if rng.integers(0, 2))
        assert compatible(xs, ys) == compatible(ys, xs)


# ---------------------------------------------------------------------------
# strict composition


def test_walk_plus_wave():
    walk = labeled(120, seed=1, action="walk", parts={LL, RL, GLOBAL})
    wave = labeled(80, seed=2, action="wave with the right hand", parts={RA})
    result = compose_strict(walk, wave)
    assert len(result.motion) == 80
    sm = result.source_map
    for j in PART_JOINTS[RA]:
        assert sm.joints[j] == "b"
    for j in PART_JOINTS[LL] | PART_JOINTS[RL] | PART_JOINTS[TORSO] | PART_JOINTS[LA] | {0}:
        assert sm.joints[j] == "a"
    assert sm.translation == "a"
    assert result.actions == ("walk", "wave with the right hand")


def test_raise_arms_plus_stroll_reorders():
    raise_arms = labeled(60, seed=3, action="raise arms", parts={LA, RA})
    stroll = labeled(90, seed=4, action="stroll", parts={LL, RL, GLOBAL})
    result = compose_strict(raise_arms, stroll)
    sm = result.source_map
    # fewer parts -> the arm motion is stitched on top of the leg motion
    for j in PART_JOINTS[LA] | PART_JOINTS[RA]:
        assert sm.joints[j] == "a"
    for j in PART_JOINTS[LL] | PART_JOINTS[RL] | PART_JOINTS[TORSO] | {0}:
        assert sm.joints[j] == "b"
    assert sm.translation == "b"
    assert len(result.motion) == 60


def test_incompatible_raises():
    walk = labeled(30, seed=5, action="walk", parts={LL, RL, GLOBAL})
    kick = labeled(30, seed=6, action="kick with the right leg", parts={RL})
    with pytest.raises(Incompatible):
        compose_strict(walk, kick)


def test_strict_rejects_empty_parts():
    a = labeled(10, seed=7, action="a", parts={LA})
    empty = labeled(10, seed=8, action="b", parts=set())
    with pytest.raises(EmptyPartSet):
        compose_strict(a, empty)
    with pytest.raises(EmptyPartSet):
        compose_strict(empty, a)


def test_single_leg_pulls_whole_lower_body():
    arms = labeled(40, seed=9, action="wave both", parts={LA, RA})
    kick = labeled(40, seed=10, action="kick", parts={RL})
    result = compose_strict(arms, kick)
    sm = result.source_map
    for j in PART_JOINTS[LL] | PART_JOINTS[RL] | {0}:
        assert sm.joints[j] == "b"
    assert sm.translation == "b"


def test_500_random_instances_match_oracle():
    assert run_oracle_check(500) == 500


def test_determinism():
    a = labeled(25, seed=11, action="x", parts={TORSO})
    b = labeled(30, seed=12, action="y", parts={RA})
    r1 = compose_strict(a, b)
    r2 = compose_strict(a, b)
    np.testing.assert_array_equal(r1.motion.rotations, r2.motion.rotations)
    np.testing.assert_array_equal(r1.motion.translations, r2.motion.translations)
    assert r1.source_map == r2.source_map


def test_fps_mismatch_rejected():
    a = labeled(10, seed=13, action="x", parts={LA})
    slow = MotionSequence(id="slow", fps=24.0, rotations=a.motion.rotations,
                          translations=a.motion.translations)
    b = LabeledMotion(motion=slow, action="y", parts=frozenset({RA}))
    with pytest.raises(ShapeMismatch):
        compose_strict(a, b)


# ---------------------------------------------------------------------------
# override composition


def test_override_conflicting_slots_go_to_b():
    walk = labeled(30, seed=14, action="walk", parts={LL, RL, GLOBAL})
    kick = labeled(30, seed=15, action="kick", parts={RL})
    result = compose_override(walk, kick)
    sm = result.source_map
    # kick has fewer parts: it wins the conflict and drags the lower body
    for j in PART_JOINTS[RL] | PART_JOINTS[LL] | {0}:
        assert sm.joints[j] == "b"
    assert sm.translation == "b"


def test_override_on_disjoint_inputs_equals_strict():
    a = labeled(20, seed=16, action="a", parts={LA, TORSO})
    b = labeled(24, seed=17, action="b", parts={RL})
    strict = compose_strict(a, b)
    override = compose_override(a, b)
    assert strict.source_map == override.source_map
    np.testing.assert_array_equal(strict.motion.rotations, override.motion.rotations)


def test_override_same_motion_equals_b_trimmed():
    m = random_motion(frames=18, seed=18, id="m")
    a = LabeledMotion(motion=m, action="act", parts=frozenset({LA, RL}))
    result = compose_override(a, a)
    expected = trim_to(canonicalize(m), 18)
    np.testing.assert_allclose(result.motion.rotations, expected.rotations, atol=1e-12)
    np.testing.assert_allclose(result.motion.translations, expected.translations, atol=1e-12)


def test_override_accepts_empty_parts():
    a = labeled(10, seed=19, action="a", parts=set())
    b = labeled(12, seed=20, action="b", parts={RA})
    result = compose_override(a, b)
    # the empty set ends up on top making no claims, so b supplies everything
    assert set(result.source_map.joints) == {"b"}
    assert result.source_map.translation == "b"
    assert len(result.motion) == 10


# ---------------------------------------------------------------------------
# serialization


def test_save_composition_writes_motion_and_sidecar(tmp_path):
    a = labeled(12, seed=21, action="walk", parts={LL, RL, GLOBAL}, id="pa")
    b = labeled(10, seed=22, action="wave", parts={RA}, id="pb")
    result = compose_strict(a, b)
    motion_path = tmp_path / "out.json"
    side = save_composition(result, motion_path, parent_ids=("pa", "pb"),
                            description="walk while waving")
    assert side == sidecar_path(motion_path)
    payload = json.loads(side.read_text(encoding="utf-8"))
    assert payload["schema"] == "composition/1"
    assert payload["actions"] == ["walk", "wave"]
    assert payload["parent_ids"] == ["pa", "pb"]
    assert payload["description"] == "walk while waving"
    assert len(payload["source_map"]["joints"]) == 22
    assert motion_path.exists()
