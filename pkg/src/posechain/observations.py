"""Calibration target geometry and per-shot image observations."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .camera import PixelPoint
from .errors import UnknownPointId
from .se3 import RigidTransform


@dataclass(frozen=True, eq=False)
class CalibrationTarget:
    """Known 3D points of the calibration object, in world coordinates (meters)."""

    point_ids: tuple
    points: np.ndarray

    def __post_init__(self):
        ids = tuple(str(i) for i in self.point_ids)
        pts = np.array(self.points, dtype=float).reshape(-1, 3)
        if len(ids) != pts.shape[0]:
            raise ValueError(f"{len(ids)} ids for {pts.shape[0]} points")
        if len(set(ids)) != len(ids):
            raise ValueError("target point ids must be unique")
        if len(ids) < 4:
            raise ValueError("a calibration target needs at least 4 points")
        if not np.all(np.isfinite(pts)):
            raise ValueError("target points must be finite")
        sv = np.linalg.svd(pts - pts.mean(axis=0), compute_uv=False)
        if sv[1] <= 1e-9 * max(sv[0], 1e-300):
            raise ValueError("target points are collinear")
        pts.setflags(write=False)
        object.__setattr__(self, "point_ids", ids)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "_index", {pid: k for k, pid in enumerate(ids)})

    def __len__(self) -> int:
        return len(self.point_ids)

    def indices(self, point_ids: Iterable[str]) -> np.ndarray:
        try:
            return np.array([self._index[str(p)] for p in point_ids], dtype=np.intp)
        except KeyError as exc:
            raise UnknownPointId(f"point id {exc.args[0]!r} is not on the target") from None

    @property
    def is_planar(self) -> bool:
        sv = np.linalg.svd(self.points - self.points.mean(axis=0), compute_uv=False)
        return sv[2] <= 1e-9 * sv[0]

    def to_json(self) -> list[dict]:
        return [
            {"point_id": pid, "x": float(p[0]), "y": float(p[1]), "z": float(p[2])}
            for pid, p in zip(self.point_ids, self.points)
        ]

    @classmethod
    def from_json(cls, data: list[dict]) -> CalibrationTarget:
        return cls(
            tuple(str(d["point_id"]) for d in data),
            np.array([[d["x"], d["y"], d["z"]] for d in data], dtype=float).reshape(-1, 3),
        )

    @classmethod
    def grid(cls, rows: int, cols: int, spacing: float) -> CalibrationTarget:
        """Planar ``rows x cols`` grid in the world ``z = 0`` plane, centered on the origin."""
        ids, pts = [], []
        for r in range(rows):
            for c in range(cols):
                ids.append(f"p{r * cols + c:03d}")
                pts.append([(c - (cols - 1) / 2) * spacing, (r - (rows - 1) / 2) * spacing, 0.0])
        return cls(tuple(ids), np.array(pts))


@dataclass(frozen=True, eq=False)
class CalibrationShot:
    """One robot pose with the target points observed in its image.

    ``robot_pose`` is ``b_from_t``; it may be ``None`` for pure resection.
    """

    frame_id: str
    robot_pose: Optional[RigidTransform]
    point_ids: tuple
    pixels: np.ndarray

    def __post_init__(self):
        ids = tuple(str(i) for i in self.point_ids)
        px = np.array(self.pixels, dtype=float).reshape(-1, 2)
        if len(ids) != px.shape[0]:
            raise ValueError(f"shot {self.frame_id!r}: {len(ids)} ids for {px.shape[0]} pixels")
        if len(set(ids)) != len(ids):
            raise ValueError(f"shot {self.frame_id!r}: duplicate point ids")
        if len(ids) < 4:
            raise ValueError(f"shot {self.frame_id!r} has fewer than 4 observations")
        if not np.all(np.isfinite(px)):
            raise ValueError(f"shot {self.frame_id!r}: non-finite pixel coordinates")
        px.setflags(write=False)
        object.__setattr__(self, "frame_id", str(self.frame_id))
        object.__setattr__(self, "point_ids", ids)
        object.__setattr__(self, "pixels", px)

    @classmethod
    def from_pairs(
        cls, frame_id: str, robot_pose: Optional[RigidTransform], observations: Sequence[tuple[str, PixelPoint]]
    ) -> CalibrationShot:
        ids = [pid for pid, _ in observations]
        px = np.array([[p[0], p[1]] for _, p in observations], dtype=float).reshape(-1, 2)
        return cls(frame_id, robot_pose, tuple(ids), px)

    def with_robot_pose(self, pose: RigidTransform) -> CalibrationShot:
        return CalibrationShot(self.frame_id, pose, self.point_ids, self.pixels)

    def __len__(self) -> int:
        return len(self.point_ids)
