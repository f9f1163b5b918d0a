"""Static raster renders of stimuli, kernels and matrices.

Arrays returned here are floats in [0, 1]; :func:`neurogeom.io.write_pnm`
turns them into PGM/PPM files.
"""
from __future__ import annotations

import math
from typing import Collection, Optional

import numpy as np

from .kernel import KernelGrid, xy_projection
from .lifting import StimulusSet


def _segment_coverage(shape, x0, y0, x1, y1, half_width: float) -> tuple[slice, slice, np.ndarray]:
    rows, cols = shape
    pad = half_width + 1.5
    c0 = max(0, int(math.floor(min(x0, x1) - pad)))
    c1 = min(cols, int(math.ceil(max(x0, x1) + pad)) + 1)
    r0 = max(0, int(math.floor(min(y0, y1) - pad)))
    r1 = min(rows, int(math.ceil(max(y0, y1) + pad)) + 1)
    if c0 >= c1 or r0 >= r1:
        return slice(0, 0), slice(0, 0), np.zeros((0, 0))
    yy, xx = np.mgrid[r0:r1, c0:c1].astype(float)
    dx, dy = x1 - x0, y1 - y0
    L2 = dx * dx + dy * dy
    t = np.clip(((xx - x0) * dx + (yy - y0) * dy) / L2, 0.0, 1.0) if L2 > 0 else 0.0
    d = np.hypot(xx - (x0 + t * dx), yy - (y0 + t * dy))
    # coverage falls off linearly over one pixel at the stroke edge
    return slice(r0, r1), slice(c0, c1), np.clip(half_width + 0.5 - d, 0.0, 1.0)


def render_stimulus(stimulus: StimulusSet, size: int = 400, bar_length: float = 2.0,
                    highlight: Optional[Collection[int]] = None,
                    bounds: Optional[tuple[float, float, float, float]] = None,
                    half_width: float = 0.9) -> np.ndarray:
    """Oriented bars on a black background as an RGB image.

    Highlighted elements are drawn in the red channel only, the others in
    gray. ``bar_length`` is in stimulus units; ``bounds`` defaults to the
    bounding box of the elements plus one bar length.
    """
    xyt = stimulus.as_array()
    if bounds is None:
        if len(xyt):
            lo = xyt[:, :2].min(axis=0) - bar_length
            hi = xyt[:, :2].max(axis=0) + bar_length
        else:
            lo, hi = np.array([-1.0, -1.0]), np.array([1.0, 1.0])
        bounds = (lo[0], hi[0], lo[1], hi[1])
    xmin, xmax, ymin, ymax = bounds
    scale = (size - 1) / max(xmax - xmin, ymax - ymin)
    rows = int(round((ymax - ymin) * scale)) + 1
    cols = int(round((xmax - xmin) * scale)) + 1
    img = np.zeros((rows, cols, 3))
    hl = set(highlight or ())
    for i, (x, y, th) in enumerate(xyt):
        px = (x - xmin) * scale
        py = (ymax - y) * scale  # y up
        hx = 0.5 * bar_length * scale * math.cos(th)
        hy = -0.5 * bar_length * scale * math.sin(th)
        rs, cs, cov = _segment_coverage((rows, cols), px - hx, py - hy, px + hx, py + hy, half_width)
        if i in hl:
            img[rs, cs, 0] = np.maximum(img[rs, cs, 0], cov)
        else:
            for ch in range(3):
                img[rs, cs, ch] = np.maximum(img[rs, cs, ch], 0.75 * cov)
    return img


def render_matrix(M: np.ndarray, pixel: int = 3) -> np.ndarray:
    """Gray heat image of a nonnegative matrix, brightest at its maximum."""
    M = np.asarray(M, dtype=float)
    top = M.max() if M.size else 0.0
    img = M / top if top > 0 else np.zeros_like(M)
    return np.kron(img, np.ones((pixel, pixel)))


def render_kernel_projection(grid: KernelGrid, gamma: float = 0.5) -> np.ndarray:
    """The kernel summed over angles, y up, with a power-law contrast."""
    P = xy_projection(grid)
    top = P.max()
    img = (P / top) ** gamma if top > 0 else P
    return img.T[::-1]


def render_spectrum(eigenvalues, height: int = 200, bar: int = 4) -> np.ndarray:
    """Bar chart of eigenvalues in the given order."""
    vals = np.asarray(eigenvalues, dtype=float)
    img = np.zeros((height, max(1, len(vals)) * bar))
    top = vals.max() if len(vals) and vals.max() > 0 else 1.0
    for k, v in enumerate(vals):
        h = int(round(max(v, 0.0) / top * (height - 1)))
        if h:
            img[height - h:, k * bar:(k + 1) * bar - 1] = 1.0
    return img
