"""Pose accuracy statistics.

Chain discrepancies with their RMS translation/rotation, reprojection RMS,
similarity alignment of camera trajectories, absolute pose error and robot
repeatability. Inputs are in meters/radians; reports are in millimeters,
degrees and pixels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .camera import CameraIntrinsics, project_points
from .errors import (
    DegenerateGeometry,
    EmptyInput,
    GroupTooSmall,
    MissingPose,
    NoSharedFrames,
)
from .observations import CalibrationShot, CalibrationTarget
from .se3 import (
    RigidTransform,
    SimilarityTransform,
    invert,
    matrix_to_quat,
    mean_rotation,
    quat_to_matrix,
    rotation_angle,
    translation_norm,
)
from .trajectory import Trajectory


def chain_camera_pose(robot_pose: RigidTransform, hand_eye: RigidTransform, world_base: RigidTransform) -> RigidTransform:
    """``c_from_w = (t_from_c)⁻¹ · (b_from_t)⁻¹ · b_from_w``."""
    return invert(hand_eye) @ invert(robot_pose) @ world_base


def discrepancy(
    camera_pose: RigidTransform,
    robot_pose: RigidTransform,
    hand_eye: RigidTransform,
    world_base: RigidTransform,
) -> RigidTransform:
    """Closure error between an observed camera pose and the robot chain.

    Returns ``(c_from_t · t_from_b · b_from_w)⁻¹ · c_from_w``, which is the
    identity when the chain closes exactly.
    """
    return invert(chain_camera_pose(robot_pose, hand_eye, world_base)) @ camera_pose


def rmst(discrepancies: Sequence[RigidTransform]) -> float:
    """Root mean square translation length of the discrepancies, in mm."""
    if len(discrepancies) == 0:
        raise EmptyInput("rmst of an empty list")
    sq = [translation_norm(d) ** 2 for d in discrepancies]
    return 1000.0 * math.sqrt(math.fsum(sq) / len(sq))


def rmsr(discrepancies: Sequence[RigidTransform]) -> float:
    """Root mean square rotation angle of the discrepancies, in degrees."""
    if len(discrepancies) == 0:
        raise EmptyInput("rmsr of an empty list")
    sq = [rotation_angle(d) ** 2 for d in discrepancies]
    return math.degrees(math.sqrt(math.fsum(sq) / len(sq)))


def shot_residuals(
    shot: CalibrationShot, camera_pose: RigidTransform, intrinsics: CameraIntrinsics, target: CalibrationTarget
) -> np.ndarray:
    """Observed minus projected pixels for one shot, shape ``(K, 2)``."""
    pts = target.points[target.indices(shot.point_ids)]
    return shot.pixels - project_points(camera_pose.apply(pts), intrinsics)


def rrms(
    shots: Sequence[CalibrationShot],
    camera_poses: Mapping[str, RigidTransform] | Trajectory,
    intrinsics: CameraIntrinsics,
    target: CalibrationTarget,
) -> float:
    """Reprojection RMS in pixels.

    The squared term is the squared length of the 2D residual vector; it is
    averaged over the points of each shot, then over shots, then rooted.
    """
    if len(shots) == 0:
        raise EmptyInput("rrms needs at least one shot")
    per_shot = []
    for shot in shots:
        pose = camera_poses.get(shot.frame_id)
        if pose is None:
            raise MissingPose(f"no camera pose for frame {shot.frame_id!r}")
        r = shot_residuals(shot, pose, intrinsics, target)
        per_shot.append(float(np.mean(np.sum(r * r, axis=1))))
    return math.sqrt(math.fsum(per_shot) / len(per_shot))


@dataclass
class PoseErrorReport:
    """Absolute pose error summary; ``mte`` in mm, ``mre`` in degrees."""

    mte: float
    mre: float
    per_frame: list = field(default_factory=list)
    alignment: SimilarityTransform = field(default_factory=SimilarityTransform.identity)

    def to_dict(self) -> dict:
        return {
            "mte_mm": self.mte,
            "mre_deg": self.mre,
            "frames": len(self.per_frame),
            "alignment": self.alignment.to_dict(),
            "per_frame": [
                {"frame_id": f, "translation_error_mm": te, "rotation_error_deg": re} for f, te, re in self.per_frame
            ],
        }


def _centers(traj: Trajectory, ids: Sequence[str]) -> np.ndarray:
    return np.array([traj[i].center for i in ids])


def umeyama_align(source: Trajectory, reference: Trajectory, with_scale: bool = False) -> SimilarityTransform:
    """Least-squares similarity mapping source camera centers onto reference centers.

    Closed form (Umeyama 1991). With ``with_scale=False`` the scale is fixed
    to 1 and the result is rigid.

    Raises:
        DegenerateGeometry: fewer than 3 shared frames, or collinear centers.
    """
    ids = source.shared_ids(reference)
    if len(ids) < 3:
        raise DegenerateGeometry(f"alignment needs >= 3 shared frames, got {len(ids)}")
    X = _centers(source, ids)
    Y = _centers(reference, ids)
    mx, my = X.mean(axis=0), Y.mean(axis=0)
    Xc, Yc = X - mx, Y - my
    for name, P in (("source", Xc), ("reference", Yc)):
        sv = np.linalg.svd(P, compute_uv=False)
        if sv[0] == 0.0 or sv[1] <= 1e-10 * sv[0]:
            raise DegenerateGeometry(f"{name} camera centers are collinear")

    n = len(ids)
    cov = Yc.T @ Xc / n
    U, D, Vt = np.linalg.svd(cov)
    S = np.eye(3)
    if np.linalg.det(U) * np.linalg.det(Vt) < 0:
        S[2, 2] = -1.0
    R = U @ S @ Vt
    scale = float(np.trace(np.diag(D) @ S) / (np.sum(Xc * Xc) / n)) if with_scale else 1.0
    t = my - scale * R @ mx
    return SimilarityTransform(scale, RigidTransform.from_rt(R, t))


def apply_similarity_to_camera(pose: RigidTransform, sim: SimilarityTransform) -> RigidTransform:
    """Move a ``c_from_w`` pose by a world-frame similarity.

    The center maps through ``sim`` and the orientation rotates with it; the
    result is again a rigid world-to-camera pose.
    """
    center = sim.apply(pose.center)
    R_wc = sim.rigid.R @ pose.R.T
    R_cw = R_wc.T
    return RigidTransform.from_rt(R_cw, -R_cw @ center)


def absolute_pose_error(
    source: Trajectory, reference: Trajectory, alignment: SimilarityTransform | None = None
) -> PoseErrorReport:
    """Per-frame center distance and relative rotation angle after alignment."""
    ids = source.shared_ids(reference)
    if not ids:
        raise NoSharedFrames("source and reference have no frame ids in common")
    if alignment is None:
        alignment = SimilarityTransform.identity()
    R_align = alignment.rigid.R
    per_frame = []
    for i in ids:
        s, r = source[i], reference[i]
        te = float(np.linalg.norm(alignment.apply(s.center) - r.center))
        # world-from-camera orientations, source carried into the reference frame
        E = r.R @ R_align @ s.R.T
        q = matrix_to_quat(E)
        re = 2.0 * math.atan2(float(np.linalg.norm(q[1:])), abs(float(q[0])))
        per_frame.append((i, 1000.0 * te, math.degrees(re)))
    mte = math.fsum(p[1] for p in per_frame) / len(per_frame)
    mre = math.fsum(p[2] for p in per_frame) / len(per_frame)
    return PoseErrorReport(mte, mre, per_frame, alignment)


def repeatability_stats(groups: Sequence[Sequence[RigidTransform]]) -> tuple[float, float]:
    """Mean spread of repeated visits to commanded poses.

    Each group holds ``b_from_t`` poses reached when revisiting one commanded
    pose. Per group, the translation spread is the sample (n-1) standard
    deviation of the tool positions about their mean, and the rotation spread
    that of the angles to the chordal mean rotation. Returns the means over
    groups as ``(sigma_t in mm, sigma_R in degrees)``.
    """
    if len(groups) == 0:
        raise EmptyInput("no pose groups")
    sig_t, sig_r = [], []
    for k, group in enumerate(groups):
        if len(group) < 2:
            raise GroupTooSmall(f"group {k} has {len(group)} pose(s); at least 2 are needed")
        pos = np.array([p.translation for p in group])
        dev = pos - pos.mean(axis=0)
        sig_t.append(math.sqrt(float(np.sum(dev * dev)) / (len(group) - 1)))
        R_mean = quat_to_matrix(mean_rotation(p.rotation for p in group))
        ang = [rotation_angle(RigidTransform.from_rt(R_mean.T @ p.R)) for p in group]
        sig_r.append(math.sqrt(math.fsum(a * a for a in ang) / (len(group) - 1)))
    return 1000.0 * float(np.mean(sig_t)), math.degrees(float(np.mean(sig_r)))
