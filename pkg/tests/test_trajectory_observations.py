import numpy as np
import pytest

from posechain.errors import UnknownPointId
from posechain.observations import CalibrationShot, CalibrationTarget
from posechain.se3 import RigidTransform
from posechain.trajectory import Trajectory

from conftest import random_pose


def test_trajectory_order_and_lookup(rng):
    poses = [random_pose(rng) for _ in range(3)]
    t = Trajectory(zip(["b", "a", "c"], poses))
    assert t.frame_ids == ["b", "a", "c"]
    assert t["a"] is poses[1]
    assert "c" in t and "z" not in t
    assert t.get("z") is None
    assert len(t) == 3
    with pytest.raises(KeyError):
        t["z"]


def test_trajectory_rejects_duplicates():
    with pytest.raises(ValueError, match="duplicate"):
        Trajectory([("a", RigidTransform.identity()), ("a", RigidTransform.identity())])


def test_trajectory_shared_ids_keep_own_order(rng):
    a = Trajectory((k, random_pose(rng)) for k in "abcd")
    b = Trajectory((k, random_pose(rng)) for k in "dcx")
    assert a.shared_ids(b) == ["c", "d"]


def test_trajectory_json_round_trip(rng):
    t = Trajectory((f"f{k}", random_pose(rng)) for k in range(5))
    u = Trajectory.from_json(t.to_json())
    assert u.frame_ids == t.frame_ids
    for (_, p), (_, q) in zip(t, u):
        np.testing.assert_allclose(p.as_matrix(), q.as_matrix(), atol=1e-15)


def test_grid_target():
    t = CalibrationTarget.grid(3, 4, 0.01)
    assert len(t) == 12 and t.is_planar
    np.testing.assert_allclose(t.points.mean(axis=0), 0, atol=1e-17)
    assert t.point_ids[0] == "p000" and t.point_ids[-1] == "p011"
    np.testing.assert_array_equal(t.indices(["p005", "p000"]), [5, 0])
    with pytest.raises(UnknownPointId):
        t.indices(["nope"])


def test_target_validation():
    with pytest.raises(ValueError, match="unique"):
        CalibrationTarget(("a", "a", "b", "c"), np.eye(4, 3))
    with pytest.raises(ValueError, match="collinear"):
        CalibrationTarget(tuple("abcd"), np.c_[np.arange(4.0), np.zeros(4), np.zeros(4)])
    with pytest.raises(ValueError, match="at least 4"):
        CalibrationTarget(tuple("abc"), np.eye(3))


def test_target_json_round_trip():
    t = CalibrationTarget(tuple("abcd"), np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1.0]]))
    u = CalibrationTarget.from_json(t.to_json())
    assert u.point_ids == t.point_ids and not u.is_planar
    np.testing.assert_array_equal(u.points, t.points)


def test_shot_validation():
    with pytest.raises(ValueError, match="fewer than 4"):
        CalibrationShot("f", None, ("a", "b", "c"), np.zeros((3, 2)))
    with pytest.raises(ValueError, match="duplicate"):
        CalibrationShot("f", None, ("a", "a", "b", "c"), np.zeros((4, 2)))
    s = CalibrationShot.from_pairs("f", None, [(p, (1.0, 2.0)) for p in "abcd"])
    assert len(s) == 4 and s.robot_pose is None
    assert s.with_robot_pose(RigidTransform.identity()).robot_pose is not None
