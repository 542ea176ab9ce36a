"""Ordered, id-keyed pose sequences."""

from __future__ import annotations

from typing import Iterable, Iterator

from .se3 import RigidTransform


class Trajectory:
    """Ordered ``(frame_id, RigidTransform)`` pairs with unique ids.

    Camera trajectories hold world-to-camera poses (``c_from_w``); robot
    trajectories hold tool-to-base poses (``b_from_t``).
    """

    def __init__(self, entries: Iterable[tuple[str, RigidTransform]] = ()):
        self._ids: list[str] = []
        self._poses: dict[str, RigidTransform] = {}
        for frame_id, pose in entries:
            frame_id = str(frame_id)
            if frame_id in self._poses:
                raise ValueError(f"duplicate frame_id {frame_id!r}")
            if not isinstance(pose, RigidTransform):
                raise TypeError(f"pose for {frame_id!r} is not a RigidTransform")
            self._ids.append(frame_id)
            self._poses[frame_id] = pose

    @property
    def frame_ids(self) -> list[str]:
        return list(self._ids)

    @property
    def poses(self) -> list[RigidTransform]:
        return [self._poses[i] for i in self._ids]

    def __len__(self) -> int:
        return len(self._ids)

    def __iter__(self) -> Iterator[tuple[str, RigidTransform]]:
        for i in self._ids:
            yield i, self._poses[i]

    def __getitem__(self, frame_id: str) -> RigidTransform:
        return self._poses[frame_id]

    def __contains__(self, frame_id) -> bool:
        return frame_id in self._poses

    def get(self, frame_id, default=None):
        return self._poses.get(frame_id, default)

    def shared_ids(self, other: Trajectory) -> list[str]:
        """Frame ids present in both, in this trajectory's order."""
        return [i for i in self._ids if i in other]

    def map(self, fn) -> Trajectory:
        return Trajectory((i, fn(p)) for i, p in self)

    def to_json(self) -> list[dict]:
        return [{"frame_id": i, "transform_matrix": p.to_list()} for i, p in self]

    @classmethod
    def from_json(cls, data: list[dict]) -> Trajectory:
        return cls((d["frame_id"], RigidTransform.from_matrix(d["transform_matrix"])) for d in data)

    def __repr__(self) -> str:
        return f"Trajectory({len(self)} frames)"
