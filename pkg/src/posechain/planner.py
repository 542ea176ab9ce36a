"""Hemispherical capture plans and their robot tool poses."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateUp, EmptyRange
from .se3 import RigidTransform, invert
from .trajectory import Trajectory

_GRID_EPS = 1e-9


@dataclass(frozen=True)
class HemispherePlan:
    """Camera positions on a sphere around ``center``; angles in degrees.

    Elevation is measured up from the world xy-plane, longitude
    counter-clockwise from the world x-axis.
    """

    radius: float = 0.2
    d_lat: float = 5.0
    d_lon: float = 5.0
    elevation_min: float = 55.0
    elevation_max: float = 85.0
    center: tuple = (0.0, 0.0, 0.0)
    upside_down: bool = True

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if not (self.d_lat > 0 and self.d_lon > 0):
            raise ValueError("sampling intervals must be positive")
        for e in (self.elevation_min, self.elevation_max):
            if not 0.0 < e <= 90.0:
                raise ValueError(f"elevation {e} outside (0, 90]")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    def elevations(self) -> list[float]:
        span = self.elevation_max - self.elevation_min
        if span < 0:
            return []
        n = int(math.floor(span / self.d_lat + _GRID_EPS)) + 1
        return [self.elevation_min + k * self.d_lat for k in range(n)]

    def longitudes(self) -> list[float]:
        n = int(math.floor(360.0 / self.d_lon + _GRID_EPS))
        return [k * self.d_lon for k in range(n)]

    def to_json(self) -> dict:
        d = asdict(self)
        d["center"] = list(self.center)
        return d

    @classmethod
    def from_json(cls, d: dict) -> HemispherePlan:
        fields = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        if "center" in fields:
            fields["center"] = tuple(fields["center"])
        return cls(**fields)


@dataclass
class ViewPlan:
    """Planned ``c_from_w`` camera poses and, once calibrated, ``b_from_t`` tool poses."""

    camera_poses: Trajectory
    tool_poses: Optional[Trajectory] = None

    def __post_init__(self):
        if self.tool_poses is not None and len(self.tool_poses) != len(self.camera_poses):
            raise ValueError("tool and camera pose counts differ")


def look_at(
    position: Sequence[float],
    target: Sequence[float],
    up_hint: Sequence[float] = (0.0, 0.0, 1.0),
    roll180: bool = False,
) -> RigidTransform:
    """World-to-camera pose whose +z optical axis passes through ``target``.

    The image y-axis (pointing down in the image) is opposite to ``up_hint``
    projected onto the image plane; ``roll180`` flips x and y.

    Raises:
        DegenerateUp: ``position == target`` or ``up_hint`` parallel to the
            viewing direction.
    """
    pos = np.asarray(position, dtype=float)
    z = np.asarray(target, dtype=float) - pos
    dist = np.linalg.norm(z)
    if dist < 1e-12:
        raise DegenerateUp("camera position coincides with the look-at target")
    z = z / dist
    up = np.asarray(up_hint, dtype=float)
    y = -(up - (up @ z) * z)
    ny = np.linalg.norm(y)
    if ny < 1e-9 * max(np.linalg.norm(up), 1e-300):
        raise DegenerateUp("up hint is parallel to the viewing direction")
    y = y / ny
    x = np.cross(y, z)
    if roll180:
        x, y = -x, -y
    R = np.stack([x, y, z])  # rows: camera axes in world coordinates
    return RigidTransform.from_rt(R, -R @ pos)


def frame_id(elevation: float, longitude: float) -> str:
    return f"r{elevation:g}_c{longitude:g}"


def hemisphere_poses(plan: HemispherePlan) -> ViewPlan:
    """One view per (elevation, longitude) grid node, elevation-major order.

    Elevations step by ``d_lat`` including both bounds; longitudes step by
    ``d_lon`` over ``[0°, 360°)``.

    Raises:
        EmptyRange: the grid has no nodes.
    """
    elevations, longitudes = plan.elevations(), plan.longitudes()
    if not elevations or not longitudes:
        raise EmptyRange("hemisphere plan produces no views")
    c = np.array(plan.center)
    entries = []
    for el in elevations:
        cel, sel = math.cos(math.radians(el)), math.sin(math.radians(el))
        up = (1.0, 0.0, 0.0) if abs(cel) < 1e-9 else (0.0, 0.0, 1.0)
        for lon in longitudes:
            clon, slon = math.cos(math.radians(lon)), math.sin(math.radians(lon))
            pos = c + plan.radius * np.array([cel * clon, cel * slon, sel])
            entries.append((frame_id(el, lon), look_at(pos, c, up, plan.upside_down)))
    return ViewPlan(Trajectory(entries))


def tool_pose(camera_pose: RigidTransform, hand_eye: RigidTransform, world_base: RigidTransform) -> RigidTransform:
    """``b_from_t = b_from_w · (c_from_w)⁻¹ · (t_from_c)⁻¹``."""
    return world_base @ invert(camera_pose) @ invert(hand_eye)


def tool_poses(plan: ViewPlan, hand_eye: RigidTransform, world_base: RigidTransform) -> Trajectory:
    """Robot poses that put the camera at each planned pose."""
    return plan.camera_poses.map(lambda c: tool_pose(c, hand_eye, world_base))
