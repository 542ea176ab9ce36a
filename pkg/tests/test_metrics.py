import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from posechain.camera import CameraIntrinsics, project_points
from posechain.errors import DegenerateGeometry, EmptyInput, GroupTooSmall, MissingPose, NoSharedFrames
from posechain.metrics import (
    absolute_pose_error,
    apply_similarity_to_camera,
    chain_camera_pose,
    discrepancy,
    repeatability_stats,
    rmsr,
    rmst,
    rrms,
    umeyama_align,
)
from posechain.observations import CalibrationShot, CalibrationTarget
from posechain.se3 import RigidTransform, SimilarityTransform, rotation_angle
from posechain.trajectory import Trajectory

from conftest import random_pose


def _trajectory(rng, n=20):
    return Trajectory((f"f{k:02d}", random_pose(rng)) for k in range(n))


def test_rmst_rmsr_hand_values():
    d = [RigidTransform.from_translation([0.003, 0, 0]), RigidTransform.from_rotvec([0, 0, math.radians(2)], [0, 0.004, 0])]
    assert rmst(d) == pytest.approx(1000 * math.sqrt((0.003**2 + 0.004**2) / 2))
    assert rmsr(d) == pytest.approx(math.sqrt(2.0))
    with pytest.raises(EmptyInput):
        rmst([])
    with pytest.raises(EmptyInput):
        rmsr([])


def test_discrepancy_identity_on_consistent_chain(rng):
    X, Y, B = random_pose(rng), random_pose(rng), random_pose(rng)
    C = chain_camera_pose(B, X, Y)
    D = discrepancy(C, B, X, Y)
    assert rotation_angle(D) < 1e-14 and np.linalg.norm(D.translation) < 1e-14
    # chain identity: b_from_w = b_from_t . t_from_c . c_from_w
    np.testing.assert_allclose((B @ X @ C).as_matrix(), Y.as_matrix(), atol=1e-14)


def test_rrms_hand_value():
    intr = CameraIntrinsics(fx=100.0, fy=100.0, cx=0.0, cy=0.0)
    target = CalibrationTarget.grid(2, 2, 0.1)
    pose = RigidTransform.from_translation([0, 0, 1.0])
    uv = project_points(pose.apply(target.points), intr)
    offsets = np.array([[3.0, 4.0], [0, 0], [0, 0], [0, 0]])
    a = CalibrationShot("a", None, target.point_ids, uv + offsets)
    b = CalibrationShot("b", None, target.point_ids, uv)
    # shot a: mean squared length 25/4; shot b: 0
    assert rrms([a, b], {"a": pose, "b": pose}, intr, target) == pytest.approx(math.sqrt(25 / 8))
    with pytest.raises(MissingPose):
        rrms([a], {}, intr, target)
    with pytest.raises(EmptyInput):
        rrms([], {}, intr, target)


def test_umeyama_matches_scikit_image(rng):
    transform = pytest.importorskip("skimage.transform")
    src = _trajectory(rng)
    truth = SimilarityTransform(1.7, random_pose(rng))
    ref = src.map(lambda p: apply_similarity_to_camera(p, truth))
    noisy = Trajectory((i, RigidTransform(p.rotation, p.translation + rng.normal(0, 0.01, 3))) for i, p in ref)
    est = umeyama_align(src, noisy, with_scale=True)
    sk = transform.SimilarityTransform(dimensionality=3)
    sk.estimate(np.array([p.center for p in src.poses]), np.array([p.center for p in noisy.poses]))
    np.testing.assert_allclose(est.as_matrix(), sk.params, atol=1e-10)


def test_rigid_alignment_has_unit_scale(rng):
    src = _trajectory(rng)
    truth = random_pose(rng)
    ref = src.map(lambda p: apply_similarity_to_camera(p, SimilarityTransform(1.0, truth)))
    est = umeyama_align(src, ref)
    assert est.scale == 1.0
    np.testing.assert_allclose(est.rigid.as_matrix(), truth.as_matrix(), atol=1e-12)


def test_umeyama_degenerate(rng):
    line = Trajectory((f"{k}", RigidTransform.from_translation([k, 0, 0]).inverse()) for k in range(5))
    with pytest.raises(DegenerateGeometry, match="collinear"):
        umeyama_align(line, line)
    two = Trajectory(list(_trajectory(rng, 2)))
    with pytest.raises(DegenerateGeometry):
        umeyama_align(two, two)


def test_ape_hand_values():
    a = Trajectory([("x", RigidTransform.identity()), ("y", RigidTransform.from_translation([1, 0, 0]))])
    shifted = RigidTransform.from_translation([0, 0, -0.002])  # center moves by +2 mm in z
    turned = RigidTransform.from_rotvec([0, math.radians(3), 0]) @ a["y"]
    b = Trajectory([("x", shifted), ("y", turned)])
    rep = absolute_pose_error(a, b)
    assert rep.per_frame[0][1] == pytest.approx(2.0)
    assert rep.per_frame[0][2] == pytest.approx(0.0, abs=1e-12)
    assert rep.per_frame[1][2] == pytest.approx(3.0)
    assert rep.mre == pytest.approx(1.5)
    d = rep.to_dict()
    assert d["frames"] == 2 and d["per_frame"][0]["frame_id"] == "x"


def test_ape_requires_shared_frames(rng):
    with pytest.raises(NoSharedFrames):
        absolute_pose_error(Trajectory([("a", RigidTransform.identity())]), Trajectory([("b", RigidTransform.identity())]))


def test_repeatability_hand_values():
    g1 = [RigidTransform.from_translation([x, 0, 0]) for x in (0.0, 0.002)]
    g2 = [RigidTransform.from_rotvec([0, 0, a]) for a in (-0.01, 0.01)]
    st_, sr = repeatability_stats([g1, g2])
    # group 1: deviations ±1 mm, sample std sqrt(2)/1 mm; group 2: 0
    assert st_ == pytest.approx((math.sqrt(2e-6) * 1000 + 0.0) / 2)
    assert sr == pytest.approx((0.0 + math.degrees(math.sqrt(2 * 0.01**2)))/ 2)
    with pytest.raises(GroupTooSmall):
        repeatability_stats([[RigidTransform.identity()]])
    with pytest.raises(EmptyInput):
        repeatability_stats([])


@given(st.floats(0.1, 10.0), st.integers(0, 2**32 - 1))
def test_alignment_recovers_any_similarity(scale, seed):
    rng = np.random.default_rng(seed)
    src = _trajectory(rng, 8)
    truth = SimilarityTransform(scale, random_pose(rng))
    ref = src.map(lambda p: apply_similarity_to_camera(p, truth))
    est = umeyama_align(src, ref, with_scale=True)
    assert est.scale == pytest.approx(scale, rel=1e-9)
    rep = absolute_pose_error(src, ref, est)
    assert rep.mte < 1e-6 * scale and rep.mre < 1e-6
