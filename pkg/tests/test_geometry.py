import numpy as np
import pytest

from motionstitch.errors import (
    DegenerateRotation,
    InvalidMatrix,
    SchemaError,
    ShapeMismatch,
)
from motionstitch.geometry import (
    NUM_JOINTS,
    Skeleton,
    default_skeleton,
    forward_kinematics,
    load_skeleton,
    matrix_to_rot6d,
    rot6d_to_matrix,
    save_skeleton,
)

# ---------------------------------------------------------------------------
# Independent oracles (no calls into the module under test).


def quat_to_matrix_oracle(q):
    """Unit quaternion (w, x, y, z) -> rotation matrix, textbook formula."""
    w, x, y, z = q / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def axis_angle_to_matrix_oracle(axis, angle):
    """Rodrigues' formula."""
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    k = np.array(
        [
            [0.0, -axis[2], axis[1]],
            [axis[2], 0.0, -axis[0]],
            [-axis[1], axis[0], 0.0],
        ]
    )
    return np.eye(3) + np.sin(angle) * k + (1 - np.cos(angle)) * (k @ k)


def random_rotations(n, seed):
    """Uniform random rotations via normalized 4-D gaussians (uniform quaternions)."""
    rng = np.random.default_rng(seed)
    quats = rng.standard_normal((n, 4))
    return np.stack([quat_to_matrix_oracle(q) for q in quats])


# ---------------------------------------------------------------------------
# rot6d_to_matrix / matrix_to_rot6d


def test_identity_6d_gives_identity_matrix():
    np.testing.assert_allclose(
        rot6d_to_matrix([1, 0, 0, 0, 1, 0]), np.eye(3), atol=1e-12
    )


def test_rot6d_90deg_about_z_matches_axis_angle_oracle():
    expected = axis_angle_to_matrix_oracle([0, 0, 1], np.pi / 2)
    got = rot6d_to_matrix([0, 1, 0, -1, 0, 0])
    np.testing.assert_allclose(got, expected, atol=1e-12)


def test_positive_scaling_is_removed():
    np.testing.assert_allclose(
        rot6d_to_matrix([2, 0, 0, 0, 3, 0]), np.eye(3), atol=1e-12
    )


def test_degenerate_inputs_raise():
    with pytest.raises(DegenerateRotation):
        rot6d_to_matrix([0, 0, 0, 0, 1, 0])
    with pytest.raises(DegenerateRotation):
        rot6d_to_matrix([1, 0, 0, 2, 0, 0])
    with pytest.raises(DegenerateRotation):
        rot6d_to_matrix([1, 0, 0, np.nan, 1, 0])
    with pytest.raises(ShapeMismatch):
        rot6d_to_matrix([1, 0, 0, 0, 1])


def test_matrix_to_rot6d_identity_and_rz90():
    np.testing.assert_allclose(matrix_to_rot6d(np.eye(3)), [1, 0, 0, 0, 1, 0])
    rz90 = axis_angle_to_matrix_oracle([0, 0, 1], np.pi / 2)
    np.testing.assert_allclose(matrix_to_rot6d(rz90), [0, 1, 0, -1, 0, 0], atol=1e-12)


def test_matrix_to_rot6d_rejects_non_rotation():
    with pytest.raises(InvalidMatrix):
        matrix_to_rot6d(np.eye(3) * 1.01)
    with pytest.raises(InvalidMatrix):
        matrix_to_rot6d(np.diag([1.0, 1.0, -1.0]))  # det -1


def test_roundtrip_over_1000_quaternion_sampled_rotations():
    mats = random_rotations(1000, seed=2134)
    back = rot6d_to_matrix(matrix_to_rot6d(mats))
    assert np.max(np.abs(back - mats)) < 1e-9


def test_gram_schmidt_output_orthonormal_under_noise():
    mats = random_rotations(500, seed=42)
    six = matrix_to_rot6d(mats)
    rng = np.random.default_rng(7)
    noise = rng.uniform(-1, 1, six.shape)
    noise *= 0.1 / np.maximum(np.linalg.norm(noise, axis=-1, keepdims=True), 1e-9)
    out = rot6d_to_matrix(six + noise)
    gram = np.einsum("nji,njk->nik", out, out)
    assert np.max(np.abs(gram - np.eye(3))) < 1e-9
    assert np.max(np.abs(np.linalg.det(out) - 1.0)) < 1e-9


# ---------------------------------------------------------------------------
# Skeleton and forward kinematics


def chain_skeleton(offsets=None):
    """A 22-joint pure chain: joint j hangs from j-1."""
    if offsets is None:
        offsets = np.zeros((NUM_JOINTS, 3))
    names = tuple(f"j{i}" for i in range(NUM_JOINTS))
    parents = (-1,) + tuple(range(NUM_JOINTS - 1))
    return Skeleton(names, parents, np.asarray(offsets, dtype=float))


def identity_pose():
    return np.broadcast_to(np.eye(3), (NUM_JOINTS, 3, 3)).copy()


def test_default_skeleton_loads_and_is_a_tree():
    skel = default_skeleton()
    assert len(skel.joint_names) == NUM_JOINTS
    assert skel.parent_index[0] == -1
    assert skel.joint_names[0] == "pelvis"


def test_identity_pose_yields_cumulative_offsets():
    skel = default_skeleton()
    pos = forward_kinematics(skel, identity_pose(), np.zeros(3))
    expected = np.zeros((NUM_JOINTS, 3))
    for j in range(1, NUM_JOINTS):
        expected[j] = expected[skel.parent_index[j]] + skel.bone_offsets[j]
    np.testing.assert_allclose(pos, expected, atol=1e-12)


def test_single_child_rotated_root():
    # child at offset (1,0,0); root rotated 90 deg about z moves it to (0,1,0)
    offsets = np.zeros((NUM_JOINTS, 3))
    offsets[1] = [1.0, 0.0, 0.0]
    skel = chain_skeleton(offsets)
    pose = identity_pose()
    pose[0] = axis_angle_to_matrix_oracle([0, 0, 1], np.pi / 2)
    pos = forward_kinematics(skel, pose, np.zeros(3))
    np.testing.assert_allclose(pos[1], [0.0, 1.0, 0.0], atol=1e-12)


def test_translation_equivariance():
    skel = default_skeleton()
    rng = np.random.default_rng(3)
    pose = rot6d_to_matrix(matrix_to_rot6d(random_rotations(NUM_JOINTS, seed=5)))
    t = rng.standard_normal(3)
    base = forward_kinematics(skel, pose, np.zeros(3))
    moved = forward_kinematics(skel, pose, t)
    np.testing.assert_allclose(moved, base + t, atol=1e-12)


def test_global_rotation_equivariance():
    skel = default_skeleton()
    pose = random_rotations(NUM_JOINTS, seed=11)
    t = np.array([0.3, -1.2, 0.9])
    q = axis_angle_to_matrix_oracle([1, 2, 3], 1.1)
    rotated_pose = pose.copy()
    rotated_pose[0] = q @ pose[0]
    base = forward_kinematics(skel, pose, t)
    rotated = forward_kinematics(skel, rotated_pose, q @ t)
    np.testing.assert_allclose(rotated, base @ q.T, atol=1e-9)


def test_fk_shape_mismatch():
    skel = default_skeleton()
    with pytest.raises(ShapeMismatch):
        forward_kinematics(skel, np.zeros((21, 3, 3)), np.zeros(3))
    with pytest.raises(ShapeMismatch):
        forward_kinematics(skel, identity_pose(), np.zeros(2))


def test_fk_vectorized_over_frames_matches_per_frame():
    skel = default_skeleton()
    frames = 4
    poses = random_rotations(frames * NUM_JOINTS, seed=8).reshape(
        frames, NUM_JOINTS, 3, 3
    )
    trans = np.random.default_rng(9).standard_normal((frames, 3))
    batched = forward_kinematics(skel, poses, trans)
    for f in range(frames):
        single = forward_kinematics(skel, poses[f], trans[f])
        np.testing.assert_allclose(batched[f], single, atol=1e-12)


def test_skeleton_file_roundtrip(tmp_path):
    skel = default_skeleton()
    path = tmp_path / "skel.json"
    save_skeleton(skel, path)
    loaded = load_skeleton(path)
    assert loaded.joint_names == skel.joint_names
    assert loaded.parent_index == skel.parent_index
    np.testing.assert_array_equal(loaded.bone_offsets, skel.bone_offsets)


def test_skeleton_validation():
    names = tuple(f"j{i}" for i in range(NUM_JOINTS))
    with pytest.raises(SchemaError):
        Skeleton(names, (0,) * NUM_JOINTS, np.zeros((NUM_JOINTS, 3)))  # root not -1
    with pytest.raises(ShapeMismatch):
        Skeleton(names[:-1], (-1,) + (0,) * 20, np.zeros((21, 3)))
    bad_parents = (-1,) + tuple(range(NUM_JOINTS - 1))
    bad_parents = bad_parents[:5] + (6,) + bad_parents[6:]  # 5 -> 6 -> 5 cycle
    with pytest.raises(SchemaError):
        Skeleton(names, bad_parents[:NUM_JOINTS], np.zeros((NUM_JOINTS, 3)))


def test_skeleton_bad_schema(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"schema": "nope"}', encoding="utf-8")
    with pytest.raises(SchemaError):
        load_skeleton(path)
