import math
import warnings

import numpy as np
import pytest

from posechain import handeye
from posechain.camera import CameraIntrinsics, project_points
from posechain.errors import DegenerateConfiguration, InsufficientMotion, NoConvergence
from posechain.handeye import (
    CalibrationProblem,
    CalibrationResult,
    CalibrationState,
    RefineOptions,
    initialize,
    pnp_pose,
    refine,
    solve_ax_xb,
)
from posechain.kinematics import batch_fk
from posechain.observations import CalibrationShot, CalibrationTarget
from posechain.se3 import RigidTransform, invert, rotation_angle
from posechain.synth import DEFAULT_INTRINSICS, SyntheticRigConfig, generate

from conftest import random_pose
from oracles import central_difference, max_relative_error


@pytest.fixture(scope="module")
def rig():
    cfg = SyntheticRigConfig(seed=3, capture=None)
    ds = generate(cfg)
    robot = batch_fk(cfg.chain, ds.calib_joints)
    shots = [s.with_robot_pose(robot[s.frame_id]) for s in ds.calib_shots]
    return cfg, ds, shots


def _pose_error(a, b):
    d = invert(a) @ b
    return float(np.linalg.norm(d.translation)), rotation_angle(d)


# --- AX = XB -----------------------------------------------------------------


def test_ax_xb_exact_motions(rng):
    X = random_pose(rng, t_scale=0.1)
    B = [random_pose(rng) for _ in range(6)]
    A = [X @ b @ invert(X) for b in B]
    t_err, r_err = _pose_error(solve_ax_xb(A, B), X)
    assert t_err < 1e-12 and r_err < 1e-12


def test_ax_xb_single_axis_is_rejected(rng):
    X = random_pose(rng)
    B = [RigidTransform.from_rotvec([0, 0, a], rng.normal(size=3)) for a in (0.3, 0.7, 1.1)]
    A = [X @ b @ invert(X) for b in B]
    with pytest.raises(InsufficientMotion):
        solve_ax_xb(A, B)
    with pytest.raises(InsufficientMotion):
        solve_ax_xb([RigidTransform.identity()] * 3, [RigidTransform.identity()] * 3)


# --- resection -----------------------------------------------------------------


def _view(rng, target, intr, noise=0.0):
    from posechain.planner import look_at

    pos = np.r_[rng.uniform(-0.1, 0.1, 2), rng.uniform(0.25, 0.4)]
    pose = look_at(pos, rng.uniform(-0.01, 0.01, 3) * [1, 1, 0], (0, 1, 0))
    uv = project_points(pose.apply(target.points), intr) + rng.normal(0, noise, (len(target), 2))
    return pose, CalibrationShot("v", None, target.point_ids, uv)


def test_pnp_exact_planar_and_3d(rng):
    planar = CalibrationTarget.grid(4, 5, 0.02)
    cube = CalibrationTarget(tuple(f"c{k}" for k in range(8)), np.array(np.meshgrid([0, .05], [0, .05], [0, .05])).reshape(3, -1).T - 0.025)
    for target in (planar, cube):
        for _ in range(5):
            pose, shot = _view(rng, target, DEFAULT_INTRINSICS)
            res = pnp_pose(shot, target, DEFAULT_INTRINSICS)
            t_err, r_err = _pose_error(res.pose, pose)
            assert t_err < 1e-10 and r_err < 1e-10 and res.rrms < 1e-8


def test_pnp_matches_opencv_on_noisy_data(rng):
    cv2 = pytest.importorskip("cv2")
    target = CalibrationTarget.grid(5, 5, 0.025)
    i = DEFAULT_INTRINSICS
    K = np.array([[i.fx, 0, i.cx], [0, i.fy, i.cy], [0, 0, 1.0]])
    dist = np.array([i.k1, i.k2, i.p1, i.p2, i.k3])
    for _ in range(5):
        _, shot = _view(rng, target, i, noise=0.5)
        ours = pnp_pose(shot, target, i).pose
        ok, rvec, tvec = cv2.solvePnP(target.points, shot.pixels, K, dist, flags=cv2.SOLVEPNP_ITERATIVE)
        ok, rvec, tvec = cv2.solvePnP(target.points, shot.pixels, K, dist, rvec, tvec, True, cv2.SOLVEPNP_ITERATIVE)
        ref = RigidTransform.from_rotvec(rvec.ravel(), tvec.ravel())
        t_err, r_err = _pose_error(ours, ref)
        assert t_err < 1e-6 and r_err < 1e-5


def test_pnp_needs_six_points():
    target = CalibrationTarget.grid(2, 3, 0.02)
    shot = CalibrationShot("s", None, target.point_ids[:5], np.zeros((5, 2)) + 100)
    with pytest.raises(DegenerateConfiguration):
        pnp_pose(shot, target, DEFAULT_INTRINSICS)


# --- joint refinement -------------------------------------------------------


def test_calibration_jacobian_matches_differences(rig):
    cfg, ds, shots = rig
    problem = CalibrationProblem(shots[:6], ds.target)
    state = CalibrationState(cfg.hand_eye, cfg.world_base, DEFAULT_INTRINSICS.as_vector())
    _, J = problem.evaluate(state, True)
    steps = np.r_[np.full(12, 1e-4), 1e-3 * np.maximum(np.abs(state.intrinsics), 1.0)]
    Jn = central_difference(lambda d: problem.evaluate(problem.retract(state, d), False)[0], np.zeros(problem.n_params), steps)
    assert max_relative_error(J, Jn, floor=1e-4) < 1e-5


def test_noiseless_recovery(rig):
    cfg, ds, shots = rig
    res = handeye.calibrate(shots, ds.target, cfg.nominal())
    t_err, r_err = _pose_error(res.hand_eye, cfg.hand_eye)
    assert t_err < 1e-7 and r_err < 1e-7
    assert res.rrms < 1e-8 and res.converged
    np.testing.assert_allclose(res.intrinsics.as_vector(), cfg.intrinsics.as_vector(), rtol=1e-7, atol=1e-9)
    assert all(b <= a for a, b in zip(res.cost_history, res.cost_history[1:]))


def test_fixed_intrinsics_are_left_alone(rig):
    cfg, ds, shots = rig
    init = initialize(shots, ds.target, cfg.intrinsics)
    res = refine(shots, ds.target, init, RefineOptions(estimate=()))
    assert res.intrinsics == cfg.intrinsics
    assert res.rrms < 1e-8


def test_zero_weight_removes_outlier_shot(rig):
    cfg, ds, shots = rig
    bad = shots[0]
    corrupted = [CalibrationShot(bad.frame_id, bad.robot_pose, bad.point_ids, bad.pixels + 40.0)] + shots[1:]
    init = initialize(shots[1:], ds.target, cfg.nominal())
    opts = RefineOptions(weight=lambda fid, pid: 0.0 if fid == bad.frame_id else 1.0)
    res = refine(corrupted, ds.target, init, opts)
    t_err, _ = _pose_error(res.hand_eye, cfg.hand_eye)
    assert t_err < 1e-7


def test_iteration_cap_warns(rig):
    cfg, ds, shots = rig
    init = initialize(shots, ds.target, cfg.nominal())
    with pytest.warns(RuntimeWarning, match="stopped after 1"):
        res = refine(shots, ds.target, init, RefineOptions(max_iter=1))
    assert not res.converged and res.iterations == 1


def test_unknown_intrinsic_name():
    with pytest.raises(ValueError):
        RefineOptions(estimate=("fx", "skew"))


def test_shots_need_robot_poses(rig):
    cfg, ds, _ = rig
    with pytest.raises(ValueError, match="without robot pose"):
        initialize(ds.calib_shots, ds.target, cfg.nominal())


def test_result_json_and_summary(rig):
    cfg, _, _ = rig
    r = CalibrationResult(cfg.hand_eye, cfg.world_base, cfg.intrinsics, 0.11, 0.028, 1.0, 7, True)
    assert r.summary() == "RMST=0.11 mm, RMSR=0.028°, RRMS=1.00 px"
    back = CalibrationResult.from_json(r.to_json())
    np.testing.assert_allclose(back.hand_eye.as_matrix(), r.hand_eye.as_matrix(), atol=1e-16)
    assert back.intrinsics == r.intrinsics and back.rmst == 0.11
    empty = CalibrationResult.from_poses(cfg.hand_eye, cfg.world_base, cfg.intrinsics).to_json()
    assert empty["rmst"] is None and math.isnan(CalibrationResult.from_json(empty).rmst)
