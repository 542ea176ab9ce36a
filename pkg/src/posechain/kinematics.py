"""Forward kinematics of serial arms in the standard (distal) DH convention.

Each joint contributes ``Rz(q + theta_offset) · Tz(d) · Tx(a) · Rx(alpha)``.
Lengths are meters and angles radians everywhere, including files.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .errors import DimensionMismatch
from .se3 import RigidTransform
from .trajectory import Trajectory

DH_FIELDS = ("a", "alpha", "d", "theta_offset")


@dataclass(frozen=True, eq=False)
class DHChain:
    """Per-joint ``(a, alpha, d, theta_offset)`` rows, base to tool."""

    params: np.ndarray

    def __post_init__(self):
        p = np.array(self.params, dtype=float)
        if p.ndim != 2 or p.shape[1] != 4 or p.shape[0] < 1:
            raise ValueError(f"DH table must have shape (n>=1, 4), got {p.shape}")
        if not np.all(np.isfinite(p)):
            raise ValueError("DH parameters must be finite")
        p.setflags(write=False)
        object.__setattr__(self, "params", p)

    @property
    def joint_count(self) -> int:
        return self.params.shape[0]

    def to_json(self) -> list[dict]:
        return [dict(zip(DH_FIELDS, map(float, row))) for row in self.params]

    @classmethod
    def from_json(cls, data: list[dict]) -> DHChain:
        rows = []
        for k, joint in enumerate(data):
            try:
                rows.append([float(joint[f]) for f in DH_FIELDS])
            except KeyError as exc:
                raise ValueError(f"DH joint {k} is missing field {exc.args[0]!r}") from None
        return cls(np.array(rows).reshape(-1, 4))


@dataclass(frozen=True, eq=False)
class JointState:
    frame_id: str
    q: np.ndarray

    def __post_init__(self):
        q = np.array(self.q, dtype=float).reshape(-1)
        q.setflags(write=False)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "frame_id", str(self.frame_id))


def _check(chain: DHChain, joints: JointState) -> None:
    if joints.q.shape[0] != chain.joint_count:
        raise DimensionMismatch(
            f"frame {joints.frame_id!r}: {joints.q.shape[0]} joint angles for a {chain.joint_count}-joint chain"
        )


def forward_kinematics(chain: DHChain, joints: JointState | Sequence[float]) -> RigidTransform:
    """Tool pose in the base frame (``b_from_t``) for one joint vector."""
    if not isinstance(joints, JointState):
        joints = JointState("", joints)
    _check(chain, joints)
    H = kernels.dh_chain(chain.params, joints.q[None, :])[0]
    return RigidTransform.from_matrix(H)


def batch_fk(chain: DHChain, log: Sequence[JointState]) -> Trajectory:
    """Forward kinematics for a whole joint log, preserving order and ids."""
    if len(log) == 0:
        return Trajectory()
    for js in log:
        _check(chain, js)
    H = kernels.dh_chain(chain.params, np.stack([js.q for js in log]))
    return Trajectory((js.frame_id, RigidTransform.from_matrix(h)) for js, h in zip(log, H))
