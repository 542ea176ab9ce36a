"""Hand-eye calibration by reprojection-error minimization.

Unknowns are the hand-eye pose ``t_from_c``, the world-base pose
``b_from_w`` and the camera intrinsics. For robot pose ``b_from_t,j`` the
camera pose follows from the transformation chain

    c_from_w,j = (t_from_c)⁻¹ · (b_from_t,j)⁻¹ · b_from_w

and every observed target point contributes a 2D reprojection residual.
Starting values come from single-image resection plus a linear AX = XB
solve; :func:`refine` then runs Levenberg-Marquardt on all parameters.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import kernels
from .camera import PARAM_NAMES, CameraIntrinsics, undistort_points
from .errors import DegenerateConfiguration, InsufficientMotion, NoConvergence
from .lm import LMOptions, levenberg_marquardt
from .metrics import chain_camera_pose, discrepancy, rmsr, rmst, rrms, shot_residuals
from .observations import CalibrationShot, CalibrationTarget
from .se3 import RigidTransform, invert, mean_rotation, quat_multiply, _quat_from_rotvec

log = logging.getLogger(__name__)

MIN_RESECTION_POINTS = 6


def _skew(v: np.ndarray) -> np.ndarray:
    """Batched cross-product matrices, ``(..., 3) -> (..., 3, 3)``."""
    z = np.zeros(v.shape[:-1])
    x, y, w = v[..., 0], v[..., 1], v[..., 2]
    return np.stack(
        [np.stack([z, -w, y], -1), np.stack([w, z, -x], -1), np.stack([-y, x, z], -1)],
        axis=-2,
    )


def _perturb(T: RigidTransform, delta: np.ndarray) -> RigidTransform:
    """Left-multiply the rotation by ``exp(delta[:3])`` and shift by ``delta[3:]``."""
    return RigidTransform(quat_multiply(_quat_from_rotvec(delta[:3]), T.rotation), T.translation + delta[3:6])


# ---------------------------------------------------------------------------
# single-image resection


@dataclass
class Resection:
    """Camera pose ``c_from_w`` of one shot and its reprojection RMS in px."""

    pose: RigidTransform
    rrms: float
    iterations: int


def _hartley(points: np.ndarray) -> np.ndarray:
    """Similarity that centers points and scales their mean distance to sqrt(dim)."""
    dim = points.shape[1]
    c = points.mean(axis=0)
    s = np.mean(np.linalg.norm(points - c, axis=1))
    if s == 0.0:
        raise DegenerateConfiguration("all points coincide")
    T = np.eye(dim + 1)
    T[:dim, :dim] *= math.sqrt(dim) / s
    T[:dim, dim] = -c * math.sqrt(dim) / s
    return T


def _null_vector(M: np.ndarray, what: str) -> np.ndarray:
    _, sv, Vt = np.linalg.svd(M)
    if sv[-2] <= 1e-10 * sv[0]:
        raise DegenerateConfiguration(f"rank-deficient {what} system")
    return Vt[-1]


def _nearest_rotation(M: np.ndarray) -> np.ndarray:
    U, _, Vt = np.linalg.svd(M)
    R = U @ Vt
    if np.linalg.det(R) < 0:
        U[:, -1] *= -1
        R = U @ Vt
    return R


def _dlt_pose(world: np.ndarray, xy: np.ndarray) -> RigidTransform:
    """Linear resection from non-coplanar points and normalized image points."""
    T = _hartley(world)
    Xh = (T @ np.c_[world, np.ones(len(world))].T).T
    n = len(world)
    A = np.zeros((2 * n, 12))
    A[0::2, 0:4] = Xh
    A[0::2, 8:12] = -xy[:, :1] * Xh
    A[1::2, 4:8] = Xh
    A[1::2, 8:12] = -xy[:, 1:] * Xh
    P = _null_vector(A, "DLT").reshape(3, 4) @ T
    M = P[:, :3]
    det = np.linalg.det(M)
    lam = math.copysign(1.0 / abs(det) ** (1.0 / 3.0), det)
    R = _nearest_rotation(lam * M)
    return RigidTransform.from_rt(R, lam * P[:, 3])


def _planar_pose(world: np.ndarray, xy: np.ndarray) -> RigidTransform:
    """Resection from coplanar points via a plane-to-image homography."""
    origin = world.mean(axis=0)
    _, _, Vt = np.linalg.svd(world - origin)
    e1, e2 = Vt[0], Vt[1]
    L = np.stack([e1, e2, np.cross(e1, e2)], axis=1)  # local plane frame -> world
    ab = (world - origin) @ L[:, :2]

    Tp = _hartley(ab)
    Ti = _hartley(xy)
    abh = (Tp @ np.c_[ab, np.ones(len(ab))].T).T
    xyh = (Ti @ np.c_[xy, np.ones(len(xy))].T).T
    n = len(ab)
    A = np.zeros((2 * n, 9))
    A[0::2, 0:3] = abh
    A[0::2, 6:9] = -xyh[:, :1] * abh
    A[1::2, 3:6] = abh
    A[1::2, 6:9] = -xyh[:, 1:2] * abh
    H = np.linalg.solve(Ti, _null_vector(A, "homography").reshape(3, 3) @ Tp)

    lam = 2.0 / (np.linalg.norm(H[:, 0]) + np.linalg.norm(H[:, 1]))
    if H[2, 2] < 0:  # plane origin must lie in front of the camera
        lam = -lam
    r1, r2, t = lam * H[:, 0], lam * H[:, 1], lam * H[:, 2]
    R_local = _nearest_rotation(np.stack([r1, r2, np.cross(r1, r2)], axis=1))
    R = R_local @ L.T
    return RigidTransform.from_rt(R, t - R @ origin)


def _linear_resection(world: np.ndarray, xy: np.ndarray) -> RigidTransform:
    sv = np.linalg.svd(world - world.mean(axis=0), compute_uv=False)
    if sv[1] <= 1e-9 * sv[0]:
        raise DegenerateConfiguration("observed target points are collinear")
    if sv[2] <= 1e-9 * sv[0]:
        return _planar_pose(world, xy)
    return _dlt_pose(world, xy)


def _pose_problem(world: np.ndarray, pixels: np.ndarray, intr_vec: np.ndarray):
    def evaluate(pose: RigidTransform, with_jac: bool):
        pc = pose.apply(world)
        uv, Jp = kernels.project_points(pc, intr_vec, jacobian=with_jac)
        r = (uv - pixels).reshape(-1)
        if not with_jac:
            return r, None
        Jpt = Jp[:, :, :3]
        # d(pc)/d(omega) = -[R p_w]x, d(pc)/d(v) = I
        J = np.concatenate([-Jpt @ _skew(pc - pose.translation), Jpt], axis=2)
        return r, J.reshape(-1, 6)

    return evaluate


def pnp_pose(
    shot: CalibrationShot,
    target: CalibrationTarget,
    intrinsics: CameraIntrinsics,
    options: LMOptions | None = None,
) -> Resection:
    """Camera pose of a single shot by spatial resection.

    A linear solution (DLT for 3D targets, homography for planar ones) on
    undistorted rays is refined by minimizing the reprojection error.

    Raises:
        DegenerateConfiguration: fewer than 6 observations or a rank-deficient
            linear system.
    """
    if len(shot) < MIN_RESECTION_POINTS:
        raise DegenerateConfiguration(
            f"shot {shot.frame_id!r}: resection needs >= {MIN_RESECTION_POINTS} observations, got {len(shot)}"
        )
    world = target.points[target.indices(shot.point_ids)]
    xy = undistort_points(shot.pixels, intrinsics)
    pose0 = _linear_resection(world, xy)
    try:
        res = levenberg_marquardt(
            _pose_problem(world, shot.pixels, intrinsics.as_vector()), _perturb, pose0, options
        )
    except Exception as exc:  # e.g. a linear start with points behind the camera
        raise DegenerateConfiguration(f"shot {shot.frame_id!r}: resection failed ({exc})") from exc
    r = shot_residuals(shot, res.state, intrinsics, target)
    return Resection(res.state, math.sqrt(float(np.mean(np.sum(r * r, axis=1)))), res.iterations)


# ---------------------------------------------------------------------------
# initialization


def solve_ax_xb(A: Sequence[RigidTransform], B: Sequence[RigidTransform]) -> RigidTransform:
    """Least-squares ``X`` with ``A_i X = X B_i``.

    Rotation from the stacked Kronecker system, translation from the linear
    equations ``(R_A - I) t_X = R_X t_B - t_A``.

    Raises:
        InsufficientMotion: rotation axes of ``A`` do not span two directions.
    """
    axes = []
    for a in A:
        rv = a.as_rotvec()
        ang = float(np.linalg.norm(rv))
        if ang > 1e-3:
            axes.append(rv / ang)
    if len(axes) < 2:
        raise InsufficientMotion("fewer than two relative motions with significant rotation")
    sv = np.linalg.svd(np.array(axes), compute_uv=False)
    if sv[1] < 1e-2 * sv[0]:
        raise InsufficientMotion("all relative rotations share one axis")

    I3 = np.eye(3)
    K = np.concatenate([np.kron(I3, a.R) - np.kron(b.R.T, I3) for a, b in zip(A, B)])
    _, _, Vt = np.linalg.svd(K)
    Rx = Vt[-1].reshape(3, 3, order="F")
    if np.linalg.det(Rx) < 0:
        Rx = -Rx
    Rx = _nearest_rotation(Rx)

    C = np.concatenate([a.R - I3 for a in A])
    d = np.concatenate([Rx @ b.translation - a.translation for a, b in zip(A, B)])
    tx, *_ = np.linalg.lstsq(C, d, rcond=None)
    return RigidTransform.from_rt(Rx, tx)


@dataclass
class InitialEstimate:
    hand_eye: RigidTransform
    world_base: RigidTransform
    intrinsics: CameraIntrinsics
    camera_poses: dict = field(default_factory=dict)


def _require_robot_poses(shots: Sequence[CalibrationShot]) -> None:
    missing = [s.frame_id for s in shots if s.robot_pose is None]
    if missing:
        raise ValueError(f"shots without robot pose: {missing[:5]}")


def initialize(
    shots: Sequence[CalibrationShot],
    target: CalibrationTarget,
    nominal_intrinsics: CameraIntrinsics,
) -> InitialEstimate:
    """Starting values for :func:`refine`.

    Per-shot resection gives ``c_from_w,j``; all shot pairs feed the AX = XB
    solve for the hand-eye pose, and the world-base pose is the mean of the
    chain closures ``b_from_t,j · t_from_c · c_from_w,j``.
    """
    _require_robot_poses(shots)
    if len(shots) < 3:
        raise InsufficientMotion(f"need >= 3 shots, got {len(shots)}")
    cams = [pnp_pose(s, target, nominal_intrinsics).pose for s in shots]
    robots = [s.robot_pose for s in shots]

    A, B = [], []
    for i in range(len(shots)):
        for j in range(i + 1, len(shots)):
            A.append(invert(robots[j]) @ robots[i])
            B.append(cams[j] @ invert(cams[i]))
    X = solve_ax_xb(A, B)

    closures = [b @ X @ c for b, c in zip(robots, cams)]
    q = mean_rotation(c.rotation for c in closures)
    t = np.mean([c.translation for c in closures], axis=0)
    Y = RigidTransform(q, t)
    return InitialEstimate(X, Y, nominal_intrinsics, {s.frame_id: c for s, c in zip(shots, cams)})


# ---------------------------------------------------------------------------
# joint refinement


@dataclass
class RefineOptions:
    """Solver settings.

    Attributes:
        estimate: intrinsic parameter names to optimize; the rest stay fixed.
        weight: optional per-observation weight ``weight(frame_id, point_id)``.
            Residuals are scaled by its square root.
    """

    estimate: tuple = PARAM_NAMES
    weight: Optional[Callable[[str, str], float]] = None
    max_iter: int = 100
    initial_damping: float = 1e-4
    rtol: float = 1e-12

    def __post_init__(self):
        unknown = set(self.estimate) - set(PARAM_NAMES)
        if unknown:
            raise ValueError(f"unknown intrinsic parameters {sorted(unknown)}")
        # keep canonical order
        self.estimate = tuple(n for n in PARAM_NAMES if n in self.estimate)


@dataclass(frozen=True)
class CalibrationState:
    hand_eye: RigidTransform
    world_base: RigidTransform
    intrinsics: np.ndarray


class CalibrationProblem:
    """Stacked reprojection residuals over all shots and their Jacobian.

    The tangent vector is ``(ω_X, v_X, ω_Y, v_Y, free intrinsics)`` where
    ``X = t_from_c`` and ``Y = b_from_w`` are perturbed by :func:`_perturb`.
    Residuals are predicted minus observed pixels, stacked ``(u, v)`` per
    observation.
    """

    def __init__(
        self,
        shots: Sequence[CalibrationShot],
        target: CalibrationTarget,
        estimate: Sequence[str] = PARAM_NAMES,
        weight: Optional[Callable[[str, str], float]] = None,
    ):
        _require_robot_poses(shots)
        if not shots:
            raise ValueError("no calibration shots")
        self.shots = list(shots)
        self.target = target
        self.free = np.array([PARAM_NAMES.index(n) for n in estimate], dtype=np.intp)
        idx = [target.indices(s.point_ids) for s in self.shots]
        counts = np.array([len(i) for i in idx])
        self.world = target.points[np.concatenate(idx)]
        self.observed = np.concatenate([s.pixels for s in self.shots])
        inv_robot = [invert(s.robot_pose) for s in self.shots]
        self.R_tb = np.repeat(np.array([T.R for T in inv_robot]), counts, axis=0)
        self.t_tb = np.repeat(np.array([T.translation for T in inv_robot]), counts, axis=0)
        if weight is None:
            self.sqrt_w = None
        else:
            w = np.array([weight(s.frame_id, pid) for s in self.shots for pid in s.point_ids], dtype=float)
            if np.any(w < 0) or not np.all(np.isfinite(w)):
                raise ValueError("observation weights must be finite and non-negative")
            self.sqrt_w = np.repeat(np.sqrt(w), 2)

    @property
    def n_params(self) -> int:
        return 12 + len(self.free)

    def retract(self, state: CalibrationState, delta: np.ndarray) -> CalibrationState:
        intr = state.intrinsics.copy()
        intr[self.free] += delta[12:]
        return CalibrationState(_perturb(state.hand_eye, delta[0:6]), _perturb(state.world_base, delta[6:12]), intr)

    def evaluate(self, state: CalibrationState, with_jac: bool = True):
        X, Y = state.hand_eye, state.world_base
        RY_p = self.world @ Y.R.T
        q = RY_p + Y.translation
        s = np.einsum("nij,nj->ni", self.R_tb, q) + self.t_tb
        u = s - X.translation
        RXt = X.R.T
        pc = u @ RXt.T
        uv, Jproj = kernels.project_points(pc, state.intrinsics, jacobian=with_jac)
        r = (uv - self.observed).reshape(-1)
        if self.sqrt_w is not None:
            r = r * self.sqrt_w
        if not with_jac:
            return r, None

        Jp = Jproj[:, :, :3] @ RXt  # d(uv)/d(u), (n, 2, 3)
        JpM = Jp @ self.R_tb  # d(uv)/d(q)
        blocks = [
            Jp @ _skew(u),
            -Jp,
            -JpM @ _skew(RY_p),
            JpM,
            Jproj[:, :, 3 + self.free],
        ]
        J = np.concatenate(blocks, axis=2).reshape(-1, self.n_params)
        if self.sqrt_w is not None:
            J = J * self.sqrt_w[:, None]
        return r, J


def _finite_or_none(v: float):
    return v if math.isfinite(v) else None


def _float_or_nan(v) -> float:
    return float("nan") if v is None else float(v)


@dataclass
class CalibrationResult:
    """Calibrated poses and intrinsics with closure statistics.

    ``rmst`` is in mm, ``rmsr`` in degrees and ``rrms`` in pixels.
    """

    hand_eye: RigidTransform
    world_base: RigidTransform
    intrinsics: CameraIntrinsics
    rmst: float
    rmsr: float
    rrms: float
    iterations: int
    converged: bool
    initial_cost: float = float("nan")
    final_cost: float = float("nan")
    cost_history: list = field(default_factory=list, repr=False)

    def to_json(self) -> dict:
        return {
            "hand_eye": self.hand_eye.to_list(),
            "world_base": self.world_base.to_list(),
            "intrinsics": self.intrinsics.to_dict(),
            "rmst": _finite_or_none(self.rmst),
            "rmsr": _finite_or_none(self.rmsr),
            "rrms": _finite_or_none(self.rrms),
            "iterations": self.iterations,
            "converged": self.converged,
        }

    @classmethod
    def from_json(cls, d: dict) -> CalibrationResult:
        return cls(
            hand_eye=RigidTransform.from_matrix(d["hand_eye"]),
            world_base=RigidTransform.from_matrix(d["world_base"]),
            intrinsics=CameraIntrinsics.from_dict(d["intrinsics"]),
            rmst=_float_or_nan(d.get("rmst")),
            rmsr=_float_or_nan(d.get("rmsr")),
            rrms=_float_or_nan(d.get("rrms")),
            iterations=int(d.get("iterations", 0)),
            converged=bool(d.get("converged", True)),
        )

    @classmethod
    def from_poses(
        cls, hand_eye: RigidTransform, world_base: RigidTransform, intrinsics: CameraIntrinsics
    ) -> CalibrationResult:
        """Wrap known calibration values without statistics."""
        nan = float("nan")
        return cls(hand_eye, world_base, intrinsics, nan, nan, nan, 0, True)

    def summary(self) -> str:
        return f"RMST={self.rmst:.2f} mm, RMSR={self.rmsr:.3f}°, RRMS={self.rrms:.2f} px"


def closure_statistics(
    shots: Sequence[CalibrationShot],
    target: CalibrationTarget,
    hand_eye: RigidTransform,
    world_base: RigidTransform,
    intrinsics: CameraIntrinsics,
) -> tuple[float, float, float, list]:
    """RMST (mm), RMSR (deg) and RRMS (px) of a calibration, plus the discrepancies.

    Observed camera poses for the discrepancies come from resection with the
    given intrinsics; shots with fewer than 6 points are left out of RMST and
    RMSR.
    """
    chain = {s.frame_id: chain_camera_pose(s.robot_pose, hand_eye, world_base) for s in shots}
    rr = rrms(shots, chain, intrinsics, target)
    deltas = []
    for s in shots:
        if len(s) < MIN_RESECTION_POINTS:
            continue
        observed = pnp_pose(s, target, intrinsics).pose
        deltas.append(discrepancy(observed, s.robot_pose, hand_eye, world_base))
    if deltas:
        return rmst(deltas), rmsr(deltas), rr, deltas
    return float("nan"), float("nan"), rr, deltas


def refine(
    shots: Sequence[CalibrationShot],
    target: CalibrationTarget,
    initial: InitialEstimate,
    options: RefineOptions | None = None,
) -> CalibrationResult:
    """Jointly refine hand-eye pose, world-base pose and intrinsics.

    Accepted steps never increase the cost. When the iteration limit is
    reached first, a :class:`NoConvergence` warning is issued and the result
    comes back with ``converged=False``.

    Raises:
        SingularNormalEquations: the damped normal equations cannot be solved.
    """
    opt = options or RefineOptions()
    problem = CalibrationProblem(shots, target, opt.estimate, opt.weight)
    state = CalibrationState(initial.hand_eye, initial.world_base, initial.intrinsics.as_vector())
    res = levenberg_marquardt(
        problem.evaluate,
        problem.retract,
        state,
        LMOptions(max_iter=opt.max_iter, initial_damping=opt.initial_damping, rtol=opt.rtol),
    )
    if not res.converged:
        warnings.warn(NoConvergence(f"calibration stopped after {res.iterations} iterations"), RuntimeWarning)
    log.debug("refine: %s after %d iterations, cost %.3g -> %.3g", res.reason, res.iterations, res.initial_cost, res.cost)

    X, Y = res.state.hand_eye, res.state.world_base
    intr = initial.intrinsics.with_vector(res.state.intrinsics)
    t_rms, r_rms, rr, _ = closure_statistics(shots, target, X, Y, intr)
    return CalibrationResult(
        hand_eye=X,
        world_base=Y,
        intrinsics=intr,
        rmst=t_rms,
        rmsr=r_rms,
        rrms=rr,
        iterations=res.iterations,
        converged=res.converged,
        initial_cost=res.initial_cost,
        final_cost=res.cost,
        cost_history=res.cost_history,
    )


def calibrate(
    shots: Sequence[CalibrationShot],
    target: CalibrationTarget,
    nominal_intrinsics: CameraIntrinsics,
    options: RefineOptions | None = None,
) -> CalibrationResult:
    """:func:`initialize` followed by :func:`refine`."""
    return refine(shots, target, initialize(shots, target, nominal_intrinsics), options)


def apply_calibration(robot_pose: RigidTransform, result: CalibrationResult) -> RigidTransform:
    """Camera pose ``c_from_w`` for a robot pose ``b_from_t``."""
    return chain_camera_pose(robot_pose, result.hand_eye, result.world_base)
