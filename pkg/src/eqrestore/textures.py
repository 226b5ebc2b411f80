"""Seeded synthetic textures for self-contained benchmarks.

Band-limited noise, oriented gratings and soft blobs mixed into a [0, 1]
image; deterministic from the generator state, so benchmark runs are
reproducible without shipping datasets.
"""

from __future__ import annotations

import numpy as np

from .buffer import ImageBuffer
from .errors import ConfigError
from .rng import Rng


def synthetic_texture(height: int, width: int, rng: Rng, channels: int = 1,
                      kind: str = "mix") -> ImageBuffer:
    if kind not in ("mix", "noise", "grating", "blobs"):
        raise ConfigError(f"unknown texture kind {kind!r}")
    chans = []
    for _ in range(channels):
        layers = []
        if kind in ("mix", "noise"):
            layers.append(_bandlimited_noise(height, width, rng))
        if kind in ("mix", "grating"):
            layers.append(_grating(height, width, rng))
        if kind in ("mix", "blobs"):
            layers.append(_blobs(height, width, rng))
        img = sum(layers) / len(layers)
        lo, hi = img.min(), img.max()
        chans.append((img - lo) / (hi - lo) if hi > lo else np.full_like(img, 0.5))
    return ImageBuffer(np.stack(chans, axis=-1))


def _bandlimited_noise(h: int, w: int, rng: Rng) -> np.ndarray:
    white = rng.normal((h, w))
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.fftfreq(w)[None, :]
    radius = np.sqrt(fy * fy + fx * fx)
    gain = 1.0 / (1.0 + (radius / 0.08) ** 2)
    return np.real(np.fft.ifft2(np.fft.fft2(white) * gain))


def _grating(h: int, w: int, rng: Rng) -> np.ndarray:
    theta = float(rng.uniform()) * np.pi
    freq = 0.05 + 0.15 * float(rng.uniform())
    phase = float(rng.uniform()) * 2 * np.pi
    yy, xx = np.mgrid[0:h, 0:w]
    carrier = np.cos(2 * np.pi * freq * (np.cos(theta) * xx + np.sin(theta) * yy) + phase)
    return 0.5 + 0.5 * carrier


def _blobs(h: int, w: int, rng: Rng) -> np.ndarray:
    out = np.zeros((h, w))
    yy, xx = np.mgrid[0:h, 0:w]
    n = 6
    for _ in range(n):
        cy = float(rng.uniform()) * h
        cx = float(rng.uniform()) * w
        rad = (0.05 + 0.2 * float(rng.uniform())) * min(h, w)
        amp = 0.3 + 0.7 * float(rng.uniform())
        # periodic distance so blobs respect the torus used by the operators
        dy = np.minimum(np.abs(yy - cy), h - np.abs(yy - cy))
        dx = np.minimum(np.abs(xx - cx), w - np.abs(xx - cx))
        out += amp * np.exp(-(dy * dy + dx * dx) / (2 * rad * rad))
    return out / n
