"""Filter-bank stand-in for a learned multiscale oriented contour detector."""
from __future__ import annotations

import math

import numpy as np
from scipy.ndimage import gaussian_filter

from .watershed import DEFAULT_BINS

DEFAULT_SIGMAS = (1.0, 2.0, 4.0)
TRUNCATE = 4.0
# responses below this fraction of the image maximum are filter round-off
NOISE_FLOOR = 1e-6


def oriented_responses(image, sigma: float, bins: int = DEFAULT_BINS) -> np.ndarray:
    """Rectified oriented Gaussian-derivative responses, ``(bins, H, W)`` in [0, 1].

    Channel ``k`` measures edges whose tangent has angle ``k*pi/bins``: the
    Gaussian derivative is steered along that tangent's normal.
    """
    img = np.asarray(image, dtype=np.float64)
    gy = gaussian_filter(img, sigma, order=(1, 0), mode="nearest", truncate=TRUNCATE)
    gx = gaussian_filter(img, sigma, order=(0, 1), mode="nearest", truncate=TRUNCATE)
    gy_up = -gy
    out = np.empty((bins,) + img.shape)
    for k in range(bins):
        normal = k * math.pi / bins + math.pi / 2
        out[k] = np.abs(math.cos(normal) * gx + math.sin(normal) * gy_up)
    peak = out.max()
    if peak <= 0:
        return np.zeros_like(out)
    out /= peak
    out[out < NOISE_FLOOR] = 0.0
    return out


def multiscale_oriented_contours(image, sigmas=DEFAULT_SIGMAS, bins: int = DEFAULT_BINS):
    """Per scale, ``(strength, stack)`` with strength the max over orientations."""
    sigmas = list(sigmas)
    if not sigmas:
        raise ValueError("at least one scale is required")
    if any(s <= 0 for s in sigmas) or sigmas != sorted(sigmas):
        raise ValueError("sigmas must be positive and ascending")
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 3 and img.shape[0] == 1:
        img = img[0]
    if img.ndim != 2 or img.size == 0:
        raise ValueError(f"image must be a non-empty 2-D map, got {img.shape}")
    result = []
    for s in sigmas:
        stack = oriented_responses(img, s, bins)
        result.append((stack.max(axis=0), stack))
    return result
