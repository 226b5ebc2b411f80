"""Built-in parametric blur and smoothing kernels.

Stand-ins for external benchmark kernel sets: isotropic Gaussians of
std 1/2/3 (truncated to at most 25x25), straight-line motion kernels, and
the Dirac identity kernel.  All are normalized to unit sum.
"""

from __future__ import annotations

import numpy as np

from .buffer import ImageBuffer
from .errors import ConfigError


def dirac_kernel(size: int = 1) -> ImageBuffer:
    if size % 2 == 0:
        raise ConfigError("kernel size must be odd")
    k = np.zeros((size, size))
    k[size // 2, size // 2] = 1.0
    return ImageBuffer(k)


def gaussian_kernel(std: float, size: int | None = None) -> ImageBuffer:
    if std <= 0:
        raise ConfigError("gaussian std must be positive")
    if size is None:
        size = min(25, 2 * int(np.ceil(3.0 * std)) + 1)
    if size % 2 == 0:
        raise ConfigError("kernel size must be odd")
    half = size // 2
    coords = np.arange(-half, half + 1)
    g = np.exp(-(coords ** 2) / (2.0 * std ** 2))
    k = np.outer(g, g)
    return ImageBuffer(k / k.sum())


def motion_kernel(length: int, angle_deg: float) -> ImageBuffer:
    """Straight-line motion blur, rendered by supersampled line rasterization."""
    if length < 1:
        raise ConfigError("motion length must be >= 1")
    size = length if length % 2 == 1 else length + 1
    half = size // 2
    k = np.zeros((size, size))
    theta = np.deg2rad(angle_deg)
    dx, dy = np.cos(theta), -np.sin(theta)  # image rows grow downward
    samples = 16 * max(length, 2)
    ts = np.linspace(-(length - 1) / 2.0, (length - 1) / 2.0, samples)
    for t in ts:
        r = half + t * dy
        c = half + t * dx
        ri, ci = int(np.floor(r)), int(np.floor(c))
        fr, fc = r - ri, c - ci
        for (rr, cc, wgt) in ((ri, ci, (1 - fr) * (1 - fc)), (ri + 1, ci, fr * (1 - fc)),
                              (ri, ci + 1, (1 - fr) * fc), (ri + 1, ci + 1, fr * fc)):
            if 0 <= rr < size and 0 <= cc < size:
                k[rr, cc] += wgt
    return ImageBuffer(k / k.sum())


_NAMED = {
    "dirac": lambda: dirac_kernel(),
    "gaussian:1": lambda: gaussian_kernel(1.0),
    "gaussian:2": lambda: gaussian_kernel(2.0),
    "gaussian:3": lambda: gaussian_kernel(3.0),
    "motion:5:0": lambda: motion_kernel(5, 0.0),
    "motion:5:45": lambda: motion_kernel(5, 45.0),
    "motion:9:0": lambda: motion_kernel(9, 0.0),
    "motion:9:45": lambda: motion_kernel(9, 45.0),
}


def kernel_by_name(name: str) -> ImageBuffer:
    """Resolve a parametric kernel name like 'gaussian:2.5' or 'motion:9:45'."""
    if name in _NAMED:
        return _NAMED[name]()
    parts = name.split(":")
    try:
        if parts[0] == "gaussian" and len(parts) == 2:
            return gaussian_kernel(float(parts[1]))
        if parts[0] == "motion" and len(parts) == 3:
            return motion_kernel(int(parts[1]), float(parts[2]))
    except ValueError as exc:
        raise ConfigError(f"bad kernel spec {name!r}: {exc}") from None
    raise ConfigError(f"unknown kernel {name!r} (try dirac, gaussian:STD, motion:LEN:ANGLE)")
