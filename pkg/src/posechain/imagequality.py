"""Full-reference image quality: PSNR, Gaussian-window SSIM, per-set aggregation.

Images are float arrays in [0, 1], shaped ``(H, W)`` or ``(H, W, C)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionMismatch, EmptyInput, ImageTooSmall

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
DATA_RANGE = 1.0


def as_image(data) -> np.ndarray:
    """Float64 copy clamped to [0, 1]; rejects non-finite values and bad shapes."""
    a = np.asarray(data, dtype=np.float64)
    if a.ndim not in (2, 3) or (a.ndim == 3 and a.shape[2] not in (1, 3)):
        raise DimensionMismatch(f"expected (H, W), (H, W, 1) or (H, W, 3), got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("image contains non-finite values")
    return np.clip(a, 0.0, 1.0)


def _pair(image, reference) -> tuple[np.ndarray, np.ndarray]:
    a, b = as_image(image), as_image(reference)
    if a.shape != b.shape:
        raise DimensionMismatch(f"image shape {a.shape} differs from reference {b.shape}")
    return a, b


def psnr(image, reference) -> float:
    """``10 log10(1 / MSE)`` in dB over all pixels and channels; ``inf`` when identical."""
    a, b = _pair(image, reference)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(DATA_RANGE**2 / mse)


def _gaussian_taps() -> np.ndarray:
    r = SSIM_WINDOW // 2
    x = np.arange(-r, r + 1, dtype=np.float64)
    w = np.exp(-0.5 * (x / SSIM_SIGMA) ** 2)
    return w / w.sum()


_TAPS = _gaussian_taps()


def _blur_valid(x: np.ndarray) -> np.ndarray:
    """Separable Gaussian filter keeping only positions where the window fits."""
    rows = sliding_window_view(x, SSIM_WINDOW, axis=0) @ _TAPS
    return sliding_window_view(rows, SSIM_WINDOW, axis=1) @ _TAPS


def ssim_map(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Local SSIM of two single-channel images over the valid window positions."""
    c1 = (SSIM_K1 * DATA_RANGE) ** 2
    c2 = (SSIM_K2 * DATA_RANGE) ** 2
    mx, my = _blur_valid(x), _blur_valid(y)
    vx = _blur_valid(x * x) - mx * mx
    vy = _blur_valid(y * y) - my * my
    cxy = _blur_valid(x * y) - mx * my
    num = (2.0 * mx * my + c1) * (2.0 * cxy + c2)
    den = (mx * mx + my * my + c1) * (vx + vy + c2)
    return num / den


def ssim(image, reference) -> float:
    """Mean local SSIM (11x11 Gaussian window, sigma 1.5), averaged over channels.

    Raises:
        DimensionMismatch: shapes differ.
        ImageTooSmall: either side is shorter than the window.
    """
    a, b = _pair(image, reference)
    if min(a.shape[0], a.shape[1]) < SSIM_WINDOW:
        raise ImageTooSmall(f"SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {a.shape[1]}x{a.shape[0]}")
    if a.ndim == 2:
        return float(ssim_map(a, b).mean())
    return float(np.mean([ssim_map(a[:, :, c], b[:, :, c]).mean() for c in range(a.shape[2])]))


@dataclass
class QualityReport:
    """Mean and sample standard deviation of PSNR (dB) and SSIM over an image set.

    Infinite PSNR values (identical pairs) are left out of the PSNR
    statistics and counted in ``n_infinite``. With a single contributing
    value the standard deviation is reported as 0.
    """

    psnr_mean: float
    psnr_std: float
    ssim_mean: float
    ssim_std: float
    n: int
    n_infinite: int = 0
    per_image: list = field(default_factory=list)
    skipped: list = field(default_factory=list)

    @property
    def single(self) -> bool:
        return self.n == 1

    def format(self) -> str:
        if math.isinf(self.psnr_mean):
            p = "inf"
        else:
            p = f"{self.psnr_mean:.1f}±{self.psnr_std:.1f}"
        return f"{p} / {self.ssim_mean:.3f}±{self.ssim_std:.3f}"

    def to_dict(self) -> dict:
        def finite_or_none(v):
            return None if not math.isfinite(v) else v

        return {
            "psnr_mean": finite_or_none(self.psnr_mean),
            "psnr_std": finite_or_none(self.psnr_std),
            "psnr_infinite": math.isinf(self.psnr_mean),
            "ssim_mean": self.ssim_mean,
            "ssim_std": self.ssim_std,
            "n": self.n,
            "n_infinite": self.n_infinite,
            "single_image": self.single,
            "skipped": list(self.skipped),
            "per_image": [
                {"name": name, "psnr": finite_or_none(p), "psnr_infinite": math.isinf(p), "ssim": s}
                for name, p, s in self.per_image
            ],
            "summary": self.format(),
        }


def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    v = np.asarray(values, dtype=np.float64)
    if v.size == 1:
        return float(v[0]), 0.0
    return float(v.mean()), float(v.std(ddof=1))


def aggregate(per_image: Sequence) -> QualityReport:
    """Summarize ``(psnr, ssim)`` or ``(name, psnr, ssim)`` entries.

    Raises:
        EmptyInput: no entries.
    """
    if len(per_image) == 0:
        raise EmptyInput("no images to aggregate")
    rows = []
    for k, entry in enumerate(per_image):
        if len(entry) == 2:
            rows.append((str(k), float(entry[0]), float(entry[1])))
        else:
            rows.append((str(entry[0]), float(entry[1]), float(entry[2])))
    finite = [p for _, p, _ in rows if math.isfinite(p)]
    if finite:
        p_mean, p_std = _mean_std(finite)
    else:
        p_mean, p_std = math.inf, 0.0
    s_mean, s_std = _mean_std([s for _, _, s in rows])
    return QualityReport(p_mean, p_std, s_mean, s_std, len(rows), len(rows) - len(finite), rows)
