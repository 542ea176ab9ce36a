"""Synthetic robot/camera rig with exactly known ground truth.

Observations are rendered analytically with the camera model, joint logs
come from numerically inverting the arm's forward kinematics, and seeded
noise can be injected at the pixel, joint and tool-pose level. Noise
magnitudes are RMS lengths of the displacement vector: a 2D pixel noise of
``pixel_sigma`` draws each axis with ``pixel_sigma / sqrt(2)``, a tool
translation noise ``pose_sigma_t`` each axis with ``pose_sigma_t / sqrt(3)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

import json
import numpy as np

from . import kernels
from .camera import CameraIntrinsics, project_points
from .errors import ConfigError
from .kinematics import DHChain, JointState, batch_fk
from .metrics import chain_camera_pose
from .observations import CalibrationShot, CalibrationTarget
from .planner import HemispherePlan, hemisphere_poses, look_at, tool_pose
from .se3 import RigidTransform
from .trajectory import Trajectory


def load_chain(name: str = "ur5e") -> DHChain:
    """Nominal DH table shipped in ``posechain/data`` (manufacturer values, not ground truth)."""
    data = json.loads(resources.files("posechain").joinpath(f"data/{name}_dh.json").read_text())
    return DHChain.from_json(data["joints"] if isinstance(data, dict) else data)


DEFAULT_INTRINSICS = CameraIntrinsics(
    fx=2550.0,
    fy=2551.5,
    cx=1431.2,
    cy=1419.8,
    k1=-0.085,
    k2=0.11,
    k3=-0.02,
    p1=2.0e-4,
    p2=-1.5e-4,
    width=2855,
    height=2848,
)


@dataclass
class SyntheticRigConfig:
    """Ground truth and noise settings for :func:`generate`.

    Poses: ``hand_eye`` is ``t_from_c`` and ``world_base`` is ``b_from_w``.
    Noise: ``pixel_sigma`` in px, ``joint_sigma`` in rad, ``pose_sigma_t`` in
    mm and ``pose_sigma_r`` in degrees, each the RMS length of the random
    displacement vector.
    """

    seed: int = 0
    chain: DHChain = field(default_factory=load_chain)
    hand_eye: RigidTransform = field(
        default_factory=lambda: RigidTransform.from_rotvec([0.03, -0.02, 1.58], [0.012, -0.055, 0.045])
    )
    world_base: RigidTransform = field(
        default_factory=lambda: RigidTransform.from_rotvec([0.0, 0.0, 0.35], [0.0, 0.45, -0.05])
    )
    intrinsics: CameraIntrinsics = DEFAULT_INTRINSICS
    nominal_intrinsics: Optional[CameraIntrinsics] = None
    target_rows: int = 5
    target_cols: int = 5
    target_spacing: float = 0.025
    n_shots: int = 32
    shot_radius: tuple = (0.22, 0.30)
    shot_elevation: tuple = (45.0, 80.0)
    shot_roll: float = 30.0
    capture: Optional[HemispherePlan] = field(default_factory=HemispherePlan)
    pixel_sigma: float = 0.0
    joint_sigma: float = 0.0
    pose_sigma_t: float = 0.0
    pose_sigma_r: float = 0.0

    def __post_init__(self):
        for name in ("pixel_sigma", "joint_sigma", "pose_sigma_t", "pose_sigma_r"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v >= 0):
                raise ConfigError(f"{name} must be a finite non-negative number, got {v!r}")
        if self.n_shots < 3:
            raise ConfigError("n_shots must be at least 3")
        if self.target_rows * self.target_cols < 6:
            raise ConfigError("target needs at least 6 points")
        if not 0 < self.shot_radius[0] <= self.shot_radius[1]:
            raise ConfigError("shot_radius must be an increasing positive range")
        if not 0 < self.shot_elevation[0] <= self.shot_elevation[1] <= 90:
            raise ConfigError("shot_elevation must be an increasing range within (0, 90]")

    def nominal(self) -> CameraIntrinsics:
        """Starting intrinsics: given explicitly, else datasheet-like values
        (true focal lengths, image-center principal point, no distortion)."""
        if self.nominal_intrinsics is not None:
            return self.nominal_intrinsics
        i = self.intrinsics
        return CameraIntrinsics(
            fx=round(i.fx),
            fy=round(i.fx),
            cx=(i.width - 1) / 2,
            cy=(i.height - 1) / 2,
            width=i.width,
            height=i.height,
        )

    # -- JSON -------------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "dh": self.chain.to_json(),
            "hand_eye": self.hand_eye.to_list(),
            "world_base": self.world_base.to_list(),
            "intrinsics": self.intrinsics.to_dict(),
            "nominal_intrinsics": None if self.nominal_intrinsics is None else self.nominal_intrinsics.to_dict(),
            "target": {"rows": self.target_rows, "cols": self.target_cols, "spacing": self.target_spacing},
            "calibration_shots": {
                "count": self.n_shots,
                "radius": list(self.shot_radius),
                "elevation": list(self.shot_elevation),
                "roll": self.shot_roll,
            },
            "capture": None if self.capture is None else self.capture.to_json(),
            "noise": {
                "pixel_sigma": self.pixel_sigma,
                "joint_sigma": self.joint_sigma,
                "pose_sigma_t": self.pose_sigma_t,
                "pose_sigma_r": self.pose_sigma_r,
            },
        }

    @classmethod
    def from_json(cls, d: dict) -> SyntheticRigConfig:
        """Build from a (possibly partial) JSON config; omitted keys keep defaults."""
        known = {"seed", "dh", "hand_eye", "world_base", "intrinsics", "nominal_intrinsics",
                 "target", "calibration_shots", "capture", "noise"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kw = {}
        try:
            if "seed" in d:
                kw["seed"] = int(d["seed"])
            if "dh" in d:
                dh = d["dh"]
                kw["chain"] = DHChain.from_json(dh["joints"] if isinstance(dh, dict) else dh)
            for key in ("hand_eye", "world_base"):
                if key in d:
                    kw[key] = RigidTransform.from_matrix(d[key])
            if "intrinsics" in d:
                kw["intrinsics"] = CameraIntrinsics.from_dict(d["intrinsics"])
            if d.get("nominal_intrinsics") is not None:
                kw["nominal_intrinsics"] = CameraIntrinsics.from_dict(d["nominal_intrinsics"])
            t = d.get("target", {})
            kw.update({k2: t[k1] for k1, k2 in
                       (("rows", "target_rows"), ("cols", "target_cols"), ("spacing", "target_spacing")) if k1 in t})
            s = d.get("calibration_shots", {})
            if "count" in s:
                kw["n_shots"] = int(s["count"])
            if "radius" in s:
                kw["shot_radius"] = tuple(s["radius"])
            if "elevation" in s:
                kw["shot_elevation"] = tuple(s["elevation"])
            if "roll" in s:
                kw["shot_roll"] = float(s["roll"])
            if "capture" in d:
                kw["capture"] = None if d["capture"] is None else HemispherePlan.from_json(d["capture"])
            kw.update(d.get("noise", {}))
            return cls(**kw)
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid synthetic rig config: {exc}") from exc


@dataclass
class SyntheticDataset:
    """Everything :func:`generate` produces.

    ``calib_shots`` carry no robot pose; the pipeline recovers it from
    ``calib_joints`` by forward kinematics. Ground-truth camera poses are
    ``c_from_w``.
    """

    config: SyntheticRigConfig
    target: CalibrationTarget
    calib_joints: list
    calib_shots: list
    calib_cameras: Trajectory
    capture_joints: list
    capture_cameras: Trajectory


# ---------------------------------------------------------------------------
# numerical inverse kinematics (synthetic data only)

_IK_SEEDS = (
    (0.0, -1.5707963267948966, 1.5707963267948966, -1.5707963267948966, -1.5707963267948966, 0.0),
    (1.5707963267948966, -1.2, 1.4, -1.7707963267948966, -1.5707963267948966, 0.0),
    (-1.5707963267948966, -1.9, 1.9, -1.5707963267948966, -1.5707963267948966, 0.0),
    (3.141592653589793, -1.5707963267948966, 1.5707963267948966, -1.5707963267948966, -1.5707963267948966, 0.0),
)


def _pose_errors(Hs: np.ndarray, goal: np.ndarray) -> np.ndarray:
    """Position and rotation-matrix entry differences, shape ``(m, 12)``.

    Matrix entries rather than a sine-based axis error, because the latter
    also vanishes at a 180° orientation flip and traps the solver there.
    """
    m = Hs.shape[0]
    return np.concatenate([goal[:3, 3] - Hs[:, :3, 3], (goal[:3, :3] - Hs[:, :3, :3]).reshape(m, 9)], axis=1)


def _ik(chain: DHChain, goal: RigidTransform, seeds, tol: float = 1e-13, max_iter: int = 200) -> Optional[np.ndarray]:
    """Damped least-squares IK with a finite-difference Jacobian; ``None`` if no seed converges."""
    G = goal.as_matrix()
    n = chain.joint_count
    h = 1e-7
    for seed in seeds:
        q = np.array(seed[:n], dtype=float)
        if q.shape[0] < n:
            q = np.concatenate([q, np.zeros(n - q.shape[0])])
        lam = 1e-3
        for _ in range(max_iter):
            batch = np.vstack([q, q + h * np.eye(n)])
            E = _pose_errors(kernels.dh_chain(chain.params, batch), G)
            e = E[0]
            if np.max(np.abs(e)) < tol:
                return (q + np.pi) % (2 * np.pi) - np.pi
            J = (e - E[1:]).T / h
            step = np.linalg.solve(J.T @ J + lam * np.eye(n), J.T @ e)
            q = q + step
            lam = max(lam * 0.3, 1e-12)
    return None


# ---------------------------------------------------------------------------


def _random_rotvec(rng: np.random.Generator, rms: float) -> np.ndarray:
    return rng.normal(0.0, rms / math.sqrt(3.0), 3)


def _perturb_pose(pose: RigidTransform, rng, sigma_t_m: float, sigma_r_rad: float) -> RigidTransform:
    if sigma_t_m == 0 and sigma_r_rad == 0:
        return pose
    delta = RigidTransform.from_rotvec(_random_rotvec(rng, sigma_r_rad), _random_rotvec(rng, sigma_t_m))
    return pose @ delta


def _shot_camera_poses(cfg: SyntheticRigConfig, rng, center: np.ndarray, count: int) -> list:
    poses = []
    while len(poses) < count:
        r = rng.uniform(*cfg.shot_radius)
        el = math.radians(rng.uniform(*cfg.shot_elevation))
        lon = rng.uniform(0.0, 2 * math.pi)
        pos = center + r * np.array([math.cos(el) * math.cos(lon), math.cos(el) * math.sin(lon), math.sin(el)])
        aim = center + rng.uniform(-0.01, 0.01, 3) * np.array([1.0, 1.0, 0.0])
        cam = look_at(pos, aim, (0.0, 0.0, 1.0), roll180=True)
        roll = math.radians(rng.uniform(-cfg.shot_roll, cfg.shot_roll))
        poses.append(RigidTransform.from_rotvec([0.0, 0.0, roll]) @ cam)
    return poses


def _joint_log(cfg: SyntheticRigConfig, rng, ids, cameras, seeds) -> tuple[list, list]:
    """IK for each camera pose; returns (logged joint states, true tool poses)."""
    log, truth = [], []
    prev = None
    for fid, cam in zip(ids, cameras):
        goal = tool_pose(cam, cfg.hand_eye, cfg.world_base)
        trial = ((prev,) if prev is not None else ()) + tuple(seeds)
        q = _ik(cfg.chain, goal, trial)
        if q is None:
            raise ConfigError(f"synthetic pose {fid!r} is not reachable by the configured arm")
        prev = q
        true_pose = batch_fk(cfg.chain, [JointState(fid, q)])[fid]
        true_pose = _perturb_pose(true_pose, rng, cfg.pose_sigma_t / 1000.0, math.radians(cfg.pose_sigma_r))
        q_log = q + (rng.normal(0.0, cfg.joint_sigma, q.shape) if cfg.joint_sigma > 0 else 0.0)
        log.append(JointState(fid, q_log))
        truth.append(true_pose)
    return log, truth


def generate(cfg: SyntheticRigConfig) -> SyntheticDataset:
    """Deterministic synthetic calibration and capture data for ``cfg.seed``."""
    rng = np.random.default_rng(cfg.seed)
    target = CalibrationTarget.grid(cfg.target_rows, cfg.target_cols, cfg.target_spacing)
    center = np.zeros(3)
    intr = cfg.intrinsics

    ids = [f"calib_{k:03d}" for k in range(cfg.n_shots)]
    planned = _shot_camera_poses(cfg, rng, center, cfg.n_shots)
    calib_joints, calib_tools = _joint_log(cfg, rng, ids, planned, _IK_SEEDS)

    shots, cams = [], []
    for fid, tool in zip(ids, calib_tools):
        cam = chain_camera_pose(tool, cfg.hand_eye, cfg.world_base)
        uv = project_points(cam.apply(target.points), intr)
        if cfg.pixel_sigma > 0:
            uv = uv + rng.normal(0.0, cfg.pixel_sigma / math.sqrt(2.0), uv.shape)
        inside = (uv[:, 0] >= 0) & (uv[:, 0] <= intr.width - 1) & (uv[:, 1] >= 0) & (uv[:, 1] <= intr.height - 1)
        if inside.sum() < 6:
            raise ConfigError(f"shot {fid!r} sees fewer than 6 target points")
        pids = tuple(p for p, ok in zip(target.point_ids, inside) if ok)
        shots.append(CalibrationShot(fid, None, pids, uv[inside]))
        cams.append((fid, cam))

    capture_joints, capture_cams = [], Trajectory()
    if cfg.capture is not None:
        plan = hemisphere_poses(cfg.capture)
        cap_log, cap_tools = _joint_log(cfg, rng, plan.camera_poses.frame_ids, plan.camera_poses.poses, _IK_SEEDS)
        capture_joints = cap_log
        capture_cams = Trajectory(
            (js.frame_id, chain_camera_pose(t, cfg.hand_eye, cfg.world_base)) for js, t in zip(cap_log, cap_tools)
        )

    return SyntheticDataset(cfg, target, calib_joints, shots, Trajectory(cams), capture_joints, capture_cams)
