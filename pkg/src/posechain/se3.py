"""Rigid and similarity transforms.

A :class:`RigidTransform` named ``b_from_a`` maps point coordinates from
frame ``a`` into frame ``b``. Rotations are stored as unit quaternions in
``(w, x, y, z)`` order; 4x4 matrices are used only at the serialization
boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "RigidTransform",
    "SimilarityTransform",
    "compose",
    "invert",
    "rotation_angle",
    "translation_norm",
    "quat_multiply",
    "quat_to_matrix",
    "matrix_to_quat",
    "mean_rotation",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def quat_multiply(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Hamilton product ``p ⊗ q`` of two ``(w, x, y, z)`` quaternions."""
    pw, px, py, pz = p
    qw, qx, qy, qz = q
    return np.array(
        [
            pw * qw - px * qx - py * qy - pz * qz,
            pw * qx + px * qw + py * qz - pz * qy,
            pw * qy - px * qz + py * qw + pz * qx,
            pw * qz + px * qy - py * qx + pz * qw,
        ]
    )


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_to_quat(R: np.ndarray) -> np.ndarray:
    """Shepperd's method; picks the largest pivot so it is stable near 180°."""
    R = np.asarray(R, dtype=float)
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    diag = (R[0, 0], R[1, 1], R[2, 2])
    k = int(np.argmax((tr,) + diag))
    if k == 0:
        s = 2.0 * math.sqrt(1.0 + tr)
        q = [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
    elif k == 1:
        s = 2.0 * math.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q = [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
    elif k == 2:
        s = 2.0 * math.sqrt(1.0 - R[0, 0] + R[1, 1] - R[2, 2])
        q = [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
    else:
        s = 2.0 * math.sqrt(1.0 - R[0, 0] - R[1, 1] + R[2, 2])
        q = [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
    q = np.array(q)
    if q[0] < 0:
        q = -q
    return q / np.linalg.norm(q)


def _quat_from_rotvec(rotvec: np.ndarray) -> np.ndarray:
    rotvec = np.asarray(rotvec, dtype=float).reshape(3)
    theta = float(np.linalg.norm(rotvec))
    if theta < 1e-8:
        # Taylor expansion of sin(θ/2)/θ
        k = 0.5 - theta * theta / 48.0
    else:
        k = math.sin(0.5 * theta) / theta
    return np.concatenate(([math.cos(0.5 * theta)], k * rotvec))


def _rotvec_from_quat(q: np.ndarray) -> np.ndarray:
    if q[0] < 0:
        q = -q
    v = q[1:]
    s = float(np.linalg.norm(v))
    if s < 1e-8:
        return (2.0 / q[0]) * v
    return (2.0 * math.atan2(s, q[0]) / s) * v


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """An element of SE(3): ``x ↦ R x + t``.

    Attributes:
        rotation: unit quaternion ``(w, x, y, z)``; re-normalized on construction.
        translation: translation vector in meters.
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        q = np.array(self.rotation, dtype=float).reshape(4)
        n = np.linalg.norm(q)
        if not np.isfinite(n) or n < 1e-12:
            raise ValueError("rotation quaternion must be finite and non-zero")
        t = np.array(self.translation, dtype=float).reshape(3)
        if not np.all(np.isfinite(t)):
            raise ValueError("translation must be finite")
        object.__setattr__(self, "rotation", _frozen(q / n))
        object.__setattr__(self, "translation", _frozen(t))

    # -- constructors -------------------------------------------------------

    @classmethod
    def identity(cls) -> RigidTransform:
        return cls(np.array([1.0, 0.0, 0.0, 0.0]), np.zeros(3))

    @classmethod
    def from_translation(cls, t: Sequence[float]) -> RigidTransform:
        return cls(np.array([1.0, 0.0, 0.0, 0.0]), t)

    @classmethod
    def from_rotvec(cls, rotvec: Sequence[float], translation: Sequence[float] = (0.0, 0.0, 0.0)) -> RigidTransform:
        """Axis-angle vector (radians) plus translation."""
        return cls(_quat_from_rotvec(np.asarray(rotvec, dtype=float)), translation)

    @classmethod
    def from_rt(cls, R: np.ndarray, t: Sequence[float] = (0.0, 0.0, 0.0), *, atol: float = 1e-6) -> RigidTransform:
        R = np.asarray(R, dtype=float)
        if R.shape != (3, 3):
            raise ValueError(f"rotation matrix must be 3x3, got {R.shape}")
        if not np.allclose(R.T @ R, np.eye(3), atol=atol) or np.linalg.det(R) <= 0:
            raise ValueError("matrix is not a proper rotation")
        return cls(matrix_to_quat(R), t)

    @classmethod
    def from_matrix(cls, H: np.ndarray | Sequence[Sequence[float]], *, atol: float = 1e-6) -> RigidTransform:
        """Build from a 4x4 homogeneous matrix."""
        H = np.asarray(H, dtype=float)
        if H.shape != (4, 4):
            raise ValueError(f"homogeneous matrix must be 4x4, got {H.shape}")
        if not np.allclose(H[3], [0.0, 0.0, 0.0, 1.0], atol=atol):
            raise ValueError("bottom row of a rigid transform must be (0, 0, 0, 1)")
        return cls.from_rt(H[:3, :3], H[:3, 3], atol=atol)

    # -- conversions --------------------------------------------------------

    @property
    def R(self) -> np.ndarray:
        return quat_to_matrix(self.rotation)

    @property
    def t(self) -> np.ndarray:
        return self.translation

    def as_matrix(self) -> np.ndarray:
        H = np.eye(4)
        H[:3, :3] = self.R
        H[:3, 3] = self.translation
        return H

    def as_rotvec(self) -> np.ndarray:
        return _rotvec_from_quat(self.rotation)

    def to_list(self) -> list[list[float]]:
        """Row-major 4x4 nested list, the JSON pose convention."""
        return self.as_matrix().tolist()

    # -- algebra ------------------------------------------------------------

    def __matmul__(self, other: RigidTransform) -> RigidTransform:
        if not isinstance(other, RigidTransform):
            return NotImplemented
        return compose(self, other)

    def inverse(self) -> RigidTransform:
        return invert(self)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform one ``(3,)`` point or an ``(N, 3)`` array of points."""
        p = np.asarray(points, dtype=float)
        return p @ self.R.T + self.translation

    @property
    def center(self) -> np.ndarray:
        """Destination-frame origin expressed in the source frame, ``-Rᵀ t``.

        For a camera pose ``c_from_w`` this is the camera center in world
        coordinates.
        """
        return -self.R.T @ self.translation

    def __repr__(self) -> str:
        q = np.array2string(self.rotation, precision=6)
        t = np.array2string(self.translation, precision=6)
        return f"RigidTransform(rotation={q}, translation={t})"


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Return ``a ∘ b``: apply ``b`` first, then ``a``."""
    q = quat_multiply(a.rotation, b.rotation)
    return RigidTransform(q, a.R @ b.translation + a.translation)


def invert(t: RigidTransform) -> RigidTransform:
    q = t.rotation * np.array([1.0, -1.0, -1.0, -1.0])
    return RigidTransform(q, -(quat_to_matrix(q) @ t.translation))


def rotation_angle(t: RigidTransform) -> float:
    """Angle of the rotation part in radians, in ``[0, π]``."""
    q = t.rotation
    return 2.0 * math.atan2(float(np.linalg.norm(q[1:])), abs(float(q[0])))


def translation_norm(t: RigidTransform) -> float:
    return float(np.linalg.norm(t.translation))


def mean_rotation(quats: Iterable[np.ndarray]) -> np.ndarray:
    """Chordal L2 mean of unit quaternions after aligning their signs to the first."""
    qs = np.array([np.asarray(q, dtype=float) for q in quats])
    if len(qs) == 0:
        raise ValueError("mean of an empty set of rotations")
    signs = np.where(qs @ qs[0] < 0.0, -1.0, 1.0)
    m = (qs * signs[:, None]).sum(axis=0)
    return m / np.linalg.norm(m)


@dataclass(frozen=True, eq=False)
class SimilarityTransform:
    """``x ↦ s R x + t`` with ``s > 0``."""

    scale: float
    rigid: RigidTransform

    def __post_init__(self):
        s = float(self.scale)
        if not (s > 0.0 and math.isfinite(s)):
            raise ValueError(f"similarity scale must be positive, got {self.scale}")
        object.__setattr__(self, "scale", s)

    @classmethod
    def identity(cls) -> SimilarityTransform:
        return cls(1.0, RigidTransform.identity())

    def apply(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        return self.scale * (p @ self.rigid.R.T) + self.rigid.translation

    def as_matrix(self) -> np.ndarray:
        H = np.eye(4)
        H[:3, :3] = self.scale * self.rigid.R
        H[:3, 3] = self.rigid.translation
        return H

    def to_dict(self) -> dict:
        return {"scale": self.scale, "transform_matrix": self.rigid.to_list()}
