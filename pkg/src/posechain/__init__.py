"""Camera poses from robot kinematics, hand-eye calibration and view-synthesis evaluation.

Pose convention: ``RigidTransform`` values named ``b_from_a`` map points
from frame ``a`` into frame ``b``. Camera poses are world-to-camera
(``c_from_w``), robot poses are tool-to-base (``b_from_t``), the hand-eye
pose is camera-to-tool (``t_from_c``) and the world-base pose is
world-to-base (``b_from_w``).
"""

from importlib.metadata import PackageNotFoundError, version as _version

from .camera import CameraIntrinsics, project, project_points, projection_jacobian, undistort
from .errors import PosechainError
from .handeye import CalibrationResult, calibrate, initialize, pnp_pose, refine, solve_ax_xb
from .kernels import BACKEND
from .kinematics import DHChain, JointState, batch_fk, forward_kinematics
from .metrics import absolute_pose_error, discrepancy, repeatability_stats, rmsr, rmst, rrms, umeyama_align
from .observations import CalibrationShot, CalibrationTarget
from .planner import HemispherePlan, hemisphere_poses, look_at
from .se3 import RigidTransform, SimilarityTransform, compose, invert
from .trajectory import Trajectory

try:
    __version__ = _version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CalibrationResult",
    "CalibrationShot",
    "CalibrationTarget",
    "CameraIntrinsics",
    "DHChain",
    "HemispherePlan",
    "JointState",
    "PosechainError",
    "RigidTransform",
    "SimilarityTransform",
    "Trajectory",
    "absolute_pose_error",
    "batch_fk",
    "calibrate",
    "compose",
    "discrepancy",
    "forward_kinematics",
    "hemisphere_poses",
    "initialize",
    "invert",
    "look_at",
    "pnp_pose",
    "project",
    "project_points",
    "projection_jacobian",
    "refine",
    "repeatability_stats",
    "rmsr",
    "rmst",
    "rrms",
    "solve_ax_xb",
    "umeyama_align",
    "undistort",
]
