"""Group operations on the roto-translation space R^2 x S^1.

Points are stored as :class:`CorticalPoint` triples ``(x, y, theta)`` with the
angle normalized to ``[0, 2*pi)``. The vectorized helpers at the bottom of the
module operate on plain arrays and are what the kernel and affinity code use
in their inner loops.
"""
from __future__ import annotations

import enum
import math
from typing import NamedTuple

import numpy as np

TWO_PI = 2.0 * math.pi


class AngleMode(enum.Enum):
    """Angular period of the orientation variable."""

    FULL = "full"  # directed elements, period 2*pi
    HALF = "half"  # undirected segments, period pi

    @property
    def period(self) -> float:
        return TWO_PI if self is AngleMode.FULL else math.pi

    @classmethod
    def parse(cls, value) -> "AngleMode":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


def wrap_angle(theta, period: float = TWO_PI):
    """Map angles to ``[0, period)``. Works on scalars and arrays."""
    out = np.mod(theta, period)
    # np.mod can return `period` itself for tiny negative inputs
    out = np.where(out >= period, 0.0, out)
    if np.ndim(out) == 0:
        return float(out)
    return out


class CorticalPoint(NamedTuple):
    """A position-orientation pair ``(x, y, theta)``."""

    x: float
    y: float
    theta: float

    @classmethod
    def make(cls, x: float, y: float, theta: float) -> "CorticalPoint":
        x, y = float(x), float(y)
        if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(theta)):
            raise ValueError(f"non-finite cortical point ({x}, {y}, {theta})")
        return cls(x, y, wrap_angle(float(theta)))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta])


IDENTITY = CorticalPoint(0.0, 0.0, 0.0)


def rotate(theta: float, x: float, y: float) -> tuple[float, float]:
    c, s = math.cos(theta), math.sin(theta)
    return c * x - s * y, s * x + c * y


def compose(g: CorticalPoint, h: CorticalPoint) -> CorticalPoint:
    """Group product ``g . h = (R_{theta_g} (x_h, y_h) + (x_g, y_g), theta_g + theta_h)``."""
    rx, ry = rotate(g.theta, h.x, h.y)
    return CorticalPoint.make(rx + g.x, ry + g.y, g.theta + h.theta)


def inverse(g: CorticalPoint) -> CorticalPoint:
    rx, ry = rotate(-g.theta, g.x, g.y)
    return CorticalPoint.make(-rx, -ry, -g.theta)


def reflect(p: CorticalPoint) -> CorticalPoint:
    """Reflection across the x axis, ``(x, y, theta) -> (x, -y, -theta)``."""
    return CorticalPoint.make(p.x, -p.y, -p.theta)


def relative_displacement(p_from: CorticalPoint, p_to: CorticalPoint) -> CorticalPoint:
    """Displacement ``p_from^{-1} . p_to``, the argument of a left-invariant kernel."""
    dx, dy = p_to.x - p_from.x, p_to.y - p_from.y
    rx, ry = rotate(-p_from.theta, dx, dy)
    return CorticalPoint.make(rx, ry, p_to.theta - p_from.theta)


def angle_distance(theta1: float, theta2: float, mode: AngleMode = AngleMode.FULL) -> float:
    """Shortest angular separation under the period of ``mode``; lies in ``[0, period/2]``."""
    period = AngleMode.parse(mode).period
    d = wrap_angle(theta1 - theta2, period)
    return min(d, period - d)


# -- array versions ---------------------------------------------------------


def relative_displacement_arrays(from_xyt: np.ndarray, to_xyt: np.ndarray) -> np.ndarray:
    """Broadcasting version of :func:`relative_displacement` on ``(..., 3)`` arrays.

    The angle is wrapped to ``[0, 2*pi)``.
    """
    from_xyt = np.asarray(from_xyt, dtype=float)
    to_xyt = np.asarray(to_xyt, dtype=float)
    dx = to_xyt[..., 0] - from_xyt[..., 0]
    dy = to_xyt[..., 1] - from_xyt[..., 1]
    c = np.cos(from_xyt[..., 2])
    s = np.sin(from_xyt[..., 2])
    out = np.empty(np.broadcast_shapes(dx.shape, c.shape) + (3,))
    out[..., 0] = c * dx + s * dy
    out[..., 1] = -s * dx + c * dy
    out[..., 2] = np.mod(to_xyt[..., 2] - from_xyt[..., 2], TWO_PI)
    return out


def inverse_arrays(eta: np.ndarray) -> np.ndarray:
    """Group inverse applied row-wise to ``(..., 3)`` arrays."""
    eta = np.asarray(eta, dtype=float)
    c = np.cos(eta[..., 2])
    s = np.sin(eta[..., 2])
    out = np.empty_like(eta)
    out[..., 0] = -(c * eta[..., 0] + s * eta[..., 1])
    out[..., 1] = -(-s * eta[..., 0] + c * eta[..., 1])
    out[..., 2] = np.mod(-eta[..., 2], TWO_PI)
    return out


def act_arrays(g: CorticalPoint, xyt: np.ndarray) -> np.ndarray:
    """Left action ``g . p`` for every row ``p`` of an ``(n, 3)`` array."""
    xyt = np.asarray(xyt, dtype=float)
    c, s = math.cos(g.theta), math.sin(g.theta)
    out = np.empty_like(xyt)
    out[..., 0] = c * xyt[..., 0] - s * xyt[..., 1] + g.x
    out[..., 1] = s * xyt[..., 0] + c * xyt[..., 1] + g.y
    out[..., 2] = np.mod(xyt[..., 2] + g.theta, TWO_PI)
    return out
