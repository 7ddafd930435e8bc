"""Deterministic synthetic test images.

Smooth random fields (sums of gradients, low-frequency sinusoids, and
Gaussian blobs) whose neighboring latent tokens correlate, so context
prediction and concealment have something to work with.  Every image is
a pure function of its seed.
"""

from __future__ import annotations

import numpy as np


def synthetic_image(seed: int, height: int = 96, width: int = 112,
                    planes: int = 1) -> np.ndarray:
    """Smooth pseudo-random uint8 image, deterministic in the seed."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width]
    yn = yy / height
    xn = xx / width
    out = np.empty((height, width, planes))
    for p in range(planes):
        img = 128.0 + 40.0 * (rng.uniform(-1, 1) * xn + rng.uniform(-1, 1) * yn)
        for _ in range(3):
            fy, fx = rng.uniform(0.5, 3.0, size=2)
            phase = rng.uniform(0, 2 * np.pi)
            img += rng.uniform(5, 25) * np.sin(
                2 * np.pi * (fy * yn + fx * xn) + phase
            )
        for _ in range(4):
            cy, cx = rng.uniform(0, 1, size=2)
            sy = rng.uniform(0.08, 0.3)
            sx = rng.uniform(0.08, 0.3)
            img += rng.uniform(-50, 50) * np.exp(
                -(((yn - cy) / sy) ** 2 + ((xn - cx) / sx) ** 2)
            )
        out[:, :, p] = img
    out = np.clip(np.rint(out), 0, 255).astype(np.uint8)
    return out[:, :, 0] if planes == 1 else out


def synthetic_corpus(n: int, height: int = 96, width: int = 112,
                     planes: int = 1, base_seed: int = 1000) -> list:
    return [
        synthetic_image(base_seed + i, height, width, planes) for i in range(n)
    ]
