"""Per-pixel statistics of an ensemble of rendered images.

A stack is ``M`` member images of identical shape ``(H, W, C)`` (gray
images are treated as ``C = 1``). Output maps are single-channel ``(H, W)``
arrays in color units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyStack, StackTooSmall

DENSITY_EPSILON = 1e-6


def as_stack(members) -> np.ndarray:
    """``(M, H, W, C)`` float64 array from a list of images or a 3/4-D array.

    Raises:
        EmptyStack: no members.
        DimensionMismatch: members differ in shape.
    """
    if isinstance(members, np.ndarray):
        if members.ndim not in (3, 4):
            raise DimensionMismatch(f"stack must be (M, H, W) or (M, H, W, C), got {members.shape}")
        stack = members.astype(np.float64)
    else:
        members = [np.asarray(m, dtype=np.float64) for m in members]
        if not members:
            raise EmptyStack("ensemble has no members")
        shape = members[0].shape
        for k, m in enumerate(members):
            if m.shape != shape:
                raise DimensionMismatch(f"member {k} has shape {m.shape}, member 0 has {shape}")
        stack = np.stack(members)
    if stack.shape[0] == 0:
        raise EmptyStack("ensemble has no members")
    if stack.ndim == 3:
        stack = stack[..., None]
    return stack


def _as_hwc(image) -> np.ndarray:
    a = np.asarray(image, dtype=np.float64)
    return a[..., None] if a.ndim == 2 else a


def _mean(stack: np.ndarray) -> np.ndarray:
    # offsets from the first member: identical members give that member back bit for bit
    return stack[0] + (stack - stack[0]).mean(axis=0)


def ensemble_mean(members) -> np.ndarray:
    """Per-pixel, per-channel arithmetic mean, shape ``(H, W, C)``."""
    return _mean(as_stack(members))


def ensemble_std(members) -> np.ndarray:
    """Channel-aggregated population standard deviation, shape ``(H, W)``.

    ``sigma = sqrt( sum_m sum_i (c_mi - mean_i)^2 / (C * M) )``: every member
    and channel contributes one sample, normalized by the sample count rather
    than count - 1.

    Raises:
        StackTooSmall: fewer than two members.
    """
    stack = as_stack(members)
    m, c = stack.shape[0], stack.shape[3]
    if m < 2:
        raise StackTooSmall(f"standard deviation needs at least 2 members, got {m}")
    dev = stack - _mean(stack)
    return np.sqrt(np.sum(dev * dev, axis=(0, 3)) / (c * m))


def residual_magnitude(prediction, reference) -> np.ndarray:
    """Euclidean norm over channels of ``prediction - reference``, shape ``(H, W)``."""
    p, r = _as_hwc(prediction), _as_hwc(reference)
    if p.shape != r.shape:
        raise DimensionMismatch(f"prediction shape {p.shape} differs from reference {r.shape}")
    return np.sqrt(np.sum((p - r) ** 2, axis=2))


def density_augmented_uncertainty(std, accumulated_density, epsilon: float = DENSITY_EPSILON) -> np.ndarray:
    """``sqrt(std^2 + (1 / max(density, epsilon))^2)`` per pixel.

    Low accumulated density marks rays that saw little geometry; the inverse
    term raises their uncertainty.
    """
    s = np.asarray(std, dtype=np.float64)
    d = np.asarray(accumulated_density, dtype=np.float64)
    if s.ndim == 3 and s.shape[2] == 1:
        s = s[..., 0]
    if d.ndim == 3 and d.shape[2] == 1:
        d = d[..., 0]
    if s.shape != d.shape:
        raise DimensionMismatch(f"std map {s.shape} and density map {d.shape} differ")
    if np.any(d < 0):
        raise ValueError("accumulated density must be non-negative")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    inv = 1.0 / np.maximum(d, epsilon)
    return np.sqrt(s * s + inv * inv)


def pearson(a, b) -> Optional[float]:
    """Pearson correlation of two flattened maps; ``None`` when either is constant."""
    x = np.asarray(a, dtype=np.float64).ravel()
    y = np.asarray(b, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise DimensionMismatch(f"maps have {x.size} and {y.size} values")
    xc, yc = x - x.mean(), y - y.mean()
    sxx, syy = float(xc @ xc), float(yc @ yc)
    if sxx == 0.0 or syy == 0.0:
        return None
    return float(np.clip((xc @ yc) / math.sqrt(sxx * syy), -1.0, 1.0))


@dataclass
class UncertaintyMaps:
    mean: np.ndarray
    std: np.ndarray
    residual: np.ndarray
    density_weighted: Optional[np.ndarray] = None


@dataclass
class UQReport:
    """Maps plus the std/residual correlation; ``zero_variance`` marks an undefined correlation."""

    maps: UncertaintyMaps
    correlation: Optional[float]
    zero_variance: bool
    members: int

    def to_dict(self) -> dict:
        d = {
            "members": self.members,
            "correlation": self.correlation,
            "zero_variance": self.zero_variance,
            "std_mean": float(self.maps.std.mean()),
            "std_max": float(self.maps.std.max()),
            "residual_mean": float(self.maps.residual.mean()),
            "residual_max": float(self.maps.residual.max()),
        }
        if self.maps.density_weighted is not None:
            d["density_weighted_mean"] = float(self.maps.density_weighted.mean())
        return d


def uq_report(members, reference, density=None, epsilon: float = DENSITY_EPSILON) -> UQReport:
    """All maps for one view and the Pearson correlation between std and residual."""
    stack = as_stack(members)
    mean = _mean(stack)
    std = ensemble_std(stack)
    residual = residual_magnitude(mean, reference)
    weighted = None if density is None else density_augmented_uncertainty(std, density, epsilon)
    corr = pearson(std, residual)
    return UQReport(UncertaintyMaps(mean, std, residual, weighted), corr, corr is None, stack.shape[0])


def planted_stack(
    rng: np.random.Generator,
    shape: tuple[int, int] = (64, 64),
    members: int = 5,
    region: Optional[Sequence[slice]] = None,
    base_noise: float = 0.01,
    region_noise: float = 0.15,
) -> tuple[np.ndarray, np.ndarray]:
    """Synthetic ``(members, reference)`` with one hard region.

    Members share a smooth RGB scene. Inside ``region`` (default the central
    quarter) each member draws a large independent deviation, so both the
    spread and the error of the ensemble mean are high there; elsewhere all
    members stay within ``base_noise`` of the reference.
    """
    h, w = shape
    if region is None:
        region = (slice(h // 4, 3 * h // 4), slice(w // 4, 3 * w // 4))
    yy, xx = np.mgrid[0:h, 0:w] / max(h, w)
    ref = np.stack([0.5 + 0.3 * np.sin(3 * xx), 0.5 + 0.3 * np.cos(2 * yy), 0.4 + 0.2 * xx * yy], axis=2)
    out = ref[None] + rng.normal(0.0, base_noise, (members, h, w, 3))
    out[(slice(None),) + tuple(region)] += rng.normal(0.0, region_noise, (members,) + ref[tuple(region)].shape)
    return np.clip(out, 0.0, 1.0), ref
