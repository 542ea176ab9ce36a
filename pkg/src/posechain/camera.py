"""Pinhole camera with Brown-Conrady distortion.

Projection pipeline: perspective division to normalized coordinates, radial
(k1, k2, k3) and tangential (p1, p2) distortion in normalized coordinates,
then the affine pixel map ``u = fx * xd + cx``, ``v = fy * yd + cy``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace
from typing import NamedTuple

import numpy as np

from . import kernels
from .errors import NoConvergence

PARAM_NAMES = ("fx", "fy", "cx", "cy", "k1", "k2", "k3", "p1", "p2")

# Column labels of projection_jacobian: camera-frame point, then intrinsics.
JACOBIAN_COLUMNS = ("X", "Y", "Z") + PARAM_NAMES

UNDISTORT_MAX_ITER = 50
UNDISTORT_TOL_PX = 1e-8

# intrinsics keys of the dataset manifest
_MANIFEST_KEYS = {
    "fx": "fl_x",
    "fy": "fl_y",
    "cx": "cx",
    "cy": "cy",
    "k1": "k1",
    "k2": "k2",
    "k3": "k3",
    "p1": "p1",
    "p2": "p2",
    "width": "w",
    "height": "h",
}


class PixelPoint(NamedTuple):
    u: float
    v: float


@dataclass(frozen=True)
class CameraIntrinsics:
    """Interior orientation: focal lengths and principal point in pixels,
    dimensionless distortion coefficients, image size in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    k1: float = 0.0
    k2: float = 0.0
    k3: float = 0.0
    p1: float = 0.0
    p2: float = 0.0
    width: int = 1
    height: int = 1

    def __post_init__(self):
        for name in PARAM_NAMES:
            value = float(getattr(self, name))
            if not np.isfinite(value):
                raise ValueError(f"intrinsic {name} must be finite")
            object.__setattr__(self, name, value)
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if int(self.width) <= 0 or int(self.height) <= 0:
            raise ValueError("image size must be positive")
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "height", int(self.height))

    def as_vector(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in PARAM_NAMES])

    def with_vector(self, vec) -> CameraIntrinsics:
        return replace(self, **dict(zip(PARAM_NAMES, (float(v) for v in vec))))

    @property
    def has_distortion(self) -> bool:
        return any(getattr(self, n) != 0.0 for n in ("k1", "k2", "k3", "p1", "p2"))

    def to_dict(self) -> dict:
        """Manifest-style block: ``fl_x, fl_y, cx, cy, k1..k3, p1, p2, w, h``."""
        d = asdict(self)
        return {_MANIFEST_KEYS[k]: d[k] for k in _MANIFEST_KEYS}

    @classmethod
    def from_dict(cls, d: dict) -> CameraIntrinsics:
        missing = [v for v in ("fl_x", "fl_y", "cx", "cy", "w", "h") if v not in d]
        if missing:
            raise KeyError(f"intrinsics block is missing {missing}")
        kwargs = {k: d[v] for k, v in _MANIFEST_KEYS.items() if v in d}
        return cls(**kwargs)


def distort(xy: np.ndarray, intrinsics: CameraIntrinsics) -> np.ndarray:
    """Apply lens distortion to normalized coordinates, shape ``(..., 2)``."""
    xy = np.asarray(xy, dtype=float)
    x, y = xy[..., 0], xy[..., 1]
    k1, k2, k3, p1, p2 = intrinsics.k1, intrinsics.k2, intrinsics.k3, intrinsics.p1, intrinsics.p2
    r2 = x * x + y * y
    radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3))
    xd = x * radial + 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x)
    yd = y * radial + p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y
    return np.stack([xd, yd], axis=-1)


def project_points(points_camera: np.ndarray, intrinsics: CameraIntrinsics) -> np.ndarray:
    """Project an ``(N, 3)`` array of camera-frame points to ``(N, 2)`` pixels.

    Raises:
        NonPositiveDepth: if any ``z <= 1e-12``.
    """
    uv, _ = kernels.project_points(points_camera, intrinsics.as_vector())
    return uv


def project(point_camera, intrinsics: CameraIntrinsics) -> PixelPoint:
    uv = project_points(np.asarray(point_camera, dtype=float).reshape(1, 3), intrinsics)
    return PixelPoint(float(uv[0, 0]), float(uv[0, 1]))


def projection_jacobian(point_camera, intrinsics: CameraIntrinsics) -> np.ndarray:
    """Return the 2x12 derivative of ``(u, v)``.

    Columns follow :data:`JACOBIAN_COLUMNS`: the three camera-frame
    coordinates, then ``fx, fy, cx, cy, k1, k2, k3, p1, p2``.
    """
    _, J = kernels.project_points(
        np.asarray(point_camera, dtype=float).reshape(1, 3), intrinsics.as_vector(), jacobian=True
    )
    return J[0]


def undistort_points(pixels: np.ndarray, intrinsics: CameraIntrinsics) -> np.ndarray:
    """Invert distortion for ``(N, 2)`` pixels, returning normalized coordinates.

    Fixed-point iteration starting from the distorted normalized point.

    Raises:
        NoConvergence: if the re-distortion error is still >= 1e-8 px after
            50 iterations.
    """
    pix = np.asarray(pixels, dtype=float).reshape(-1, 2)
    target = np.stack(
        [(pix[:, 0] - intrinsics.cx) / intrinsics.fx, (pix[:, 1] - intrinsics.cy) / intrinsics.fy], axis=1
    )
    if not intrinsics.has_distortion:
        return target

    scale = np.array([intrinsics.fx, intrinsics.fy])
    k1, k2, k3, p1, p2 = intrinsics.k1, intrinsics.k2, intrinsics.k3, intrinsics.p1, intrinsics.p2
    xy = target.copy()
    err = np.inf
    for _ in range(UNDISTORT_MAX_ITER):
        x, y = xy[:, 0], xy[:, 1]
        r2 = x * x + y * y
        radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3))
        dx = 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x)
        dy = p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y
        xy = np.stack([(target[:, 0] - dx) / radial, (target[:, 1] - dy) / radial], axis=1)
        err = float(np.max(np.abs((distort(xy, intrinsics) - target) * scale), initial=0.0))
        if not np.isfinite(err):
            break
        if err < 1e-3 * UNDISTORT_TOL_PX:
            return xy
    if not err < UNDISTORT_TOL_PX:
        raise NoConvergence(f"undistortion did not converge (residual {err:.3g} px)")
    return xy


def undistort(pixel, intrinsics: CameraIntrinsics) -> np.ndarray:
    return undistort_points(np.asarray(pixel, dtype=float).reshape(1, 2), intrinsics)[0]
