"""Input domains on the lifted space.

Two ways of producing a :class:`StimulusSet` live here: synthetic
Field-Hayes-Hess style displays (a hidden smooth contour among randomly
oriented elements) and lifting of a grayscale image through a bank of rotated
odd Gabor filters.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import ndimage

from .se2 import TWO_PI, AngleMode, CorticalPoint, angle_distance

# two elements closer than this in every coordinate are considered duplicates
DUPLICATE_TOL = 1e-9


@dataclass(frozen=True)
class StimulusSet:
    """The discrete input domain: the elements where the input equals ``c``."""

    elements: tuple[CorticalPoint, ...]
    input_level_c: float = 1.0
    angle_mode: AngleMode = AngleMode.FULL
    labels: Optional[tuple[int, ...]] = None

    def __post_init__(self):
        elements = tuple(CorticalPoint.make(*e) for e in self.elements)
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "angle_mode", AngleMode.parse(self.angle_mode))
        if not self.input_level_c > 0:
            raise ValueError("input level c must be positive")
        if self.labels is not None:
            labels = tuple(int(v) for v in self.labels)
            if len(labels) != len(elements):
                raise ValueError("labels must match elements one to one")
            object.__setattr__(self, "labels", labels)
        _check_distinct(self.as_array(), self.angle_mode)

    def __len__(self) -> int:
        return len(self.elements)

    def as_array(self) -> np.ndarray:
        """Elements as an ``(N, 3)`` float array."""
        if not self.elements:
            return np.zeros((0, 3))
        return np.array(self.elements, dtype=float)

    def label_array(self) -> np.ndarray:
        if self.labels is None:
            return np.zeros(len(self), dtype=int)
        return np.array(self.labels, dtype=int)

    def permuted(self, order: Sequence[int]) -> "StimulusSet":
        order = list(order)
        labels = None if self.labels is None else tuple(self.labels[i] for i in order)
        return StimulusSet(tuple(self.elements[i] for i in order), self.input_level_c,
                           self.angle_mode, labels)


def _check_distinct(xyt: np.ndarray, mode: AngleMode) -> None:
    if len(xyt) < 2:
        return
    # sort by x so only near neighbours need comparing
    order = np.argsort(xyt[:, 0], kind="stable")
    pts = xyt[order]
    for i in range(len(pts)):
        j = i + 1
        while j < len(pts) and pts[j, 0] - pts[i, 0] <= DUPLICATE_TOL:
            if (abs(pts[j, 1] - pts[i, 1]) <= DUPLICATE_TOL
                    and angle_distance(pts[i, 2], pts[j, 2], mode) <= DUPLICATE_TOL):
                raise ValueError(f"duplicate stimulus element at {tuple(pts[i])}")
            j += 1


# -- synthetic displays -------------------------------------------------------


@dataclass(frozen=True)
class ContourSpec:
    """A smooth path sampled at equal arc-length spacing.

    ``kind`` is ``"arc"`` (circle of ``radius`` centred on ``center``, starting
    at angle ``start_angle``), ``"line"`` (through ``center`` with direction
    ``start_angle``) or ``"none"``. Samples are placed ``spacing`` apart and the
    run is centred on the midpoint of the path.
    """

    kind: str = "arc"
    n_samples: int = 20
    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 60.0
    spacing: float = 5.0
    start_angle: float = 0.0

    def __post_init__(self):
        if self.kind not in ("arc", "line", "none"):
            raise ValueError(f"unknown contour kind {self.kind!r}")
        if self.n_samples < 0:
            raise ValueError("n_samples must be nonnegative")
        if self.kind == "arc" and self.radius <= 0:
            raise ValueError("arc radius must be positive")
        if self.spacing <= 0:
            raise ValueError("spacing must be positive")

    @property
    def count(self) -> int:
        return 0 if self.kind == "none" else self.n_samples

    def sample(self) -> np.ndarray:
        """Contour positions with analytic tangent orientations, shape ``(n, 3)``."""
        n = self.count
        if n == 0:
            return np.zeros((0, 3))
        s = (np.arange(n) - (n - 1) / 2.0) * self.spacing
        cx, cy = self.center
        if self.kind == "line":
            phi = self.start_angle
            x = cx + s * math.cos(phi)
            y = cy + s * math.sin(phi)
            theta = np.full(n, phi)
        else:
            # counter-clockwise traversal; the midpoint sits at start_angle
            phi = self.start_angle + s / self.radius
            x = cx + self.radius * np.cos(phi)
            y = cy + self.radius * np.sin(phi)
            theta = phi + math.pi / 2.0
        return np.column_stack([x, y, np.mod(theta, TWO_PI)])


def generate_fhh_stimulus(n_total: int, contour: ContourSpec | Sequence[ContourSpec] | None,
                          jitter: float = 0.0, seed: int = 0, *,
                          field_of_view: tuple[float, float, float, float] = (-50.0, 50.0, -50.0, 50.0),
                          min_spacing: float = 4.0, c: float = 1.0,
                          angle_mode: AngleMode | str = AngleMode.FULL) -> StimulusSet:
    """Random oriented elements hiding one or more smooth contours.

    Contour elements come first and are labelled ``1, 2, ...`` per contour;
    background elements are labelled 0 and are drawn uniformly in position and
    orientation over ``field_of_view = (xmin, xmax, ymin, ymax)``, rejecting
    draws closer than ``min_spacing`` to any element already placed.
    ``jitter`` is the standard deviation (radians) of Gaussian noise added to
    the contour orientations.
    """
    if contour is None:
        contours: list[ContourSpec] = []
    elif isinstance(contour, ContourSpec):
        contours = [contour]
    else:
        contours = list(contour)
    if jitter < 0:
        raise ValueError("jitter must be nonnegative")
    n_contour = sum(cs.count for cs in contours)
    if n_contour > n_total:
        raise ValueError(f"contour samples ({n_contour}) exceed n_total ({n_total})")
    mode = AngleMode.parse(angle_mode)
    rng = np.random.default_rng(seed)

    pts, labels = [], []
    for k, cs in enumerate(contours, start=1):
        xyt = cs.sample()
        if jitter > 0 and len(xyt):
            xyt[:, 2] = np.mod(xyt[:, 2] + rng.normal(0.0, jitter, len(xyt)), TWO_PI)
        pts.append(xyt)
        labels += [k] * len(xyt)
    placed = np.concatenate(pts) if pts else np.zeros((0, 3))

    xmin, xmax, ymin, ymax = field_of_view
    background = []
    attempts = 0
    max_attempts = 10_000 * max(1, n_total)
    while len(background) < n_total - n_contour:
        attempts += 1
        if attempts > max_attempts:
            raise ValueError("could not place background elements; field of view too crowded")
        x, y = rng.uniform(xmin, xmax), rng.uniform(ymin, ymax)
        theta = rng.uniform(0.0, TWO_PI)
        if len(placed) and np.min(np.hypot(placed[:, 0] - x, placed[:, 1] - y)) < min_spacing:
            continue
        row = np.array([[x, y, theta]])
        placed = np.concatenate([placed, row])
        background.append(row)
    labels += [0] * len(background)
    if mode is AngleMode.HALF:
        placed[:, 2] = np.mod(placed[:, 2], math.pi)
    return StimulusSet(tuple(CorticalPoint.make(*p) for p in placed), c, mode, tuple(labels))


def arc_through(midpoint: tuple[float, float], direction: float, radius: float,
                n_samples: int, spacing: float) -> ContourSpec:
    """Arc whose midpoint sits at ``midpoint`` with tangent ``direction`` there."""
    normal = direction - math.pi / 2.0
    center = (midpoint[0] - radius * math.cos(normal), midpoint[1] - radius * math.sin(normal))
    return ContourSpec("arc", n_samples, center, radius, spacing, normal)


def fhh_scene(seed: int = 0, n_total: int = 150, n_contour: int = 20, *, radius: float = 120.0,
              spacing: float = 3.0, direction: float = 0.0, jitter: float = 0.0,
              half_fov: float = 30.0, min_spacing: float = 2.5, c: float = 1.0,
              angle_mode: AngleMode | str = AngleMode.FULL) -> StimulusSet:
    """One gently curved contour through the centre of a square field of clutter."""
    contour = arc_through((0.0, 0.0), direction, radius, n_contour, spacing)
    return generate_fhh_stimulus(n_total, contour, jitter, seed,
                                 field_of_view=(-half_fov, half_fov, -half_fov, half_fov),
                                 min_spacing=min_spacing, c=c, angle_mode=angle_mode)


def two_unit_scene(seed: int = 0, n_total: int = 150, n_contour: int = 20, *,
                   n_second: Optional[int] = None, radius: float = 120.0, spacing: float = 3.0,
                   direction: float = 0.0, jitter: float = 0.0, half_fov: float = 30.0,
                   min_spacing: float = 2.5, c: float = 1.0,
                   angle_mode: AngleMode | str = AngleMode.FULL) -> StimulusSet:
    """A long arc (label 1) and a shorter straight run (label 2) in clutter.

    The arc sits in the upper-left part of the field and the line, of
    ``n_second`` elements (default ``2 * n_contour // 5``), in the lower right.
    """
    off = 0.3 * half_fov
    n_second = max(2, 2 * n_contour // 5) if n_second is None else n_second
    contours = [arc_through((-off, off), direction, radius, n_contour, spacing),
                ContourSpec("line", n_second, (off, -off), radius, spacing, direction + 0.6)]
    return generate_fhh_stimulus(n_total, contours, jitter, seed,
                                 field_of_view=(-half_fov, half_fov, -half_fov, half_fov),
                                 min_spacing=min_spacing, c=c, angle_mode=angle_mode)


# -- filter bank lifting --------------------------------------------------------


def odd_gabor(wavelength: float = 8.0, sigma: float = 3.0, support: int = 25,
              aspect: float = 1.0) -> np.ndarray:
    """Sine-phase Gabor tuned to edges running along the x axis.

    Rows index y (upwards from the centre row), columns index x. The profile is
    odd, hence exactly zero mean up to rounding.
    """
    if support % 2 == 0:
        raise ValueError("support must be odd so the profile has a centre pixel")
    r = np.arange(support) - support // 2
    u, v = np.meshgrid(r, r[::-1])  # u = x offset, v = y offset (row 0 is the top)
    env = np.exp(-(u ** 2 + (v / aspect) ** 2) / (2.0 * sigma ** 2))
    prof = env * np.sin(2.0 * math.pi * v / wavelength)
    return prof / np.sqrt(np.sum(prof ** 2))


@dataclass(frozen=True)
class FilterBank:
    """A mother profile and ``K`` rotated copies of it.

    Orientations are ``k * period / K``; ``period`` is ``2*pi`` (polarity
    aware) or ``pi``.
    """

    mother_profile: np.ndarray
    orientations: int = 8
    period: float = TWO_PI
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        prof = np.asarray(self.mother_profile, dtype=float)
        if prof.ndim != 2 or prof.shape[0] != prof.shape[1] or prof.shape[0] % 2 == 0:
            raise ValueError("mother profile must be a square array with odd side")
        if abs(prof.sum()) > 1e-10 * np.abs(prof).sum():
            raise ValueError("mother profile must have zero mean")
        if self.orientations < 4:
            raise ValueError("need at least 4 orientations")
        object.__setattr__(self, "mother_profile", prof)

    @classmethod
    def gabor(cls, wavelength: float = 8.0, sigma: float = 3.0, support: int = 25,
              orientations: int = 8, aspect: float = 1.0,
              period: float = TWO_PI) -> "FilterBank":
        return cls(odd_gabor(wavelength, sigma, support, aspect), orientations, period)

    @property
    def spatial_support(self) -> int:
        return self.mother_profile.shape[0]

    @property
    def angles(self) -> np.ndarray:
        return np.arange(self.orientations) * (self.period / self.orientations)

    def rotated(self, k: int) -> np.ndarray:
        if k not in self._cache:
            self._cache[k] = rotate_profile(self.mother_profile, float(self.angles[k]))
        return self._cache[k]


def rotate_profile(profile: np.ndarray, theta: float) -> np.ndarray:
    """Rotate a square profile counter-clockwise by ``theta`` about its centre pixel.

    Quarter turns are exact index permutations. The remaining angle, at most
    pi/4 in magnitude, is applied as three FFT shears on a zero-padded copy;
    each shear is unitary, so the L2 norm is kept up to what leaves the
    square and rotating back by ``-theta`` undoes the shears.
    """
    q = int(round(theta / (math.pi / 2.0)))
    phi = theta - q * (math.pi / 2.0)
    out = np.rot90(np.asarray(profile, dtype=float), q % 4)
    if abs(phi) < 1e-12:
        return out.copy()
    n = out.shape[0]
    pad = n // 2 + 1
    big = np.pad(out, pad)
    t, s = math.tan(phi / 2.0), math.sin(phi)
    big = _shear(big, -t, axis=1)
    big = _shear(big, s, axis=0)
    big = _shear(big, -t, axis=1)
    return big[pad:pad + n, pad:pad + n]


def _shear(img: np.ndarray, amount: float, axis: int) -> np.ndarray:
    """Apply the point map ``u -> u + amount * v`` (axis=1) or ``v -> v + amount * u`` (axis=0).

    ``u`` runs along columns, ``v`` upwards along rows; sub-pixel shifts are
    band-limited phase ramps.
    """
    n = img.shape[0]
    ctr = n // 2
    k = np.fft.fftfreq(n)
    coord = np.arange(n) - ctr
    if axis == 1:
        # row r sits at height v = ctr - r and moves right by amount * v
        shift = amount * (-coord)
        ramp = np.exp(-2j * math.pi * np.outer(shift, k))
        return np.real(np.fft.ifft(np.fft.fft(img, axis=1) * ramp, axis=1))
    # column c sits at u = c - ctr and moves up (towards lower row index) by amount * u
    shift = -amount * coord
    ramp = np.exp(-2j * math.pi * np.outer(k, shift))
    return np.real(np.fft.ifft(np.fft.fft(img, axis=0) * ramp, axis=0))


def gabor_at(point: CorticalPoint, bank: FilterBank,
             shape: Optional[tuple[int, int]] = None) -> np.ndarray:
    """Receptive profile of the cell at ``point``.

    Without ``shape`` this returns the mother profile rotated by ``theta`` on
    its own support (translation is irrelevant there). With ``shape`` the
    rotated profile is pasted into a zero image of that shape, centred on the
    pixel nearest ``(x, y)`` in the y-up pixel frame used by :func:`lift_image`.
    """
    taps = rotate_profile(bank.mother_profile, point.theta)
    if shape is None:
        return taps
    n_rows, n_cols = shape
    col = int(round(point.x))
    row = n_rows - 1 - int(round(point.y))
    if not (0 <= row < n_rows and 0 <= col < n_cols):
        raise ValueError("point lies outside the image")
    out = np.zeros(shape)
    h = taps.shape[0] // 2
    r0, r1 = row - h, row + h + 1
    c0, c1 = col - h, col + h + 1
    tr0, tc0 = max(0, -r0), max(0, -c0)
    tr1 = taps.shape[0] - max(0, r1 - n_rows)
    tc1 = taps.shape[1] - max(0, c1 - n_cols)
    out[max(r0, 0):min(r1, n_rows), max(c0, 0):min(c1, n_cols)] = taps[tr0:tr1, tc0:tc1]
    return out


def filter_responses(image: np.ndarray, bank: FilterBank) -> np.ndarray:
    """Responses ``h(x, y, theta_k)`` for every pixel, shape ``(K, rows, cols)``."""
    image = np.asarray(image, dtype=float)
    out = np.empty((bank.orientations,) + image.shape)
    for k in range(bank.orientations):
        out[k] = ndimage.correlate(image, bank.rotated(k), mode="nearest")
    return out


def lift_image(image: np.ndarray, bank: FilterBank, response_threshold: float, c: float = 1.0,
               *, nms_radius: float = 2.0, multi_orientation: bool = False,
               angle_mode: AngleMode | str | None = None) -> StimulusSet:
    """Lift a grayscale image to a sparse set of oriented elements.

    Pixel ``(row, col)`` maps to ``x = col``, ``y = rows - 1 - row``. At each
    pixel the strongest orientation is kept if its response exceeds
    ``response_threshold``; a greedy non-maximum suppression then keeps only
    pixels that are the strongest within ``nms_radius``. For a polarity aware
    bank (period ``2*pi``) the signed response picks the direction; for a
    ``pi`` bank the absolute response is used.
    """
    if not response_threshold > 0:
        raise ValueError("response threshold must be positive")
    mode = AngleMode.parse(angle_mode) if angle_mode is not None else (
        AngleMode.FULL if bank.period > math.pi + 1e-12 else AngleMode.HALF)
    resp = filter_responses(image, bank)
    if bank.period <= math.pi + 1e-12:
        resp = np.abs(resp)
    best = resp.max(axis=0)
    arg = resp.argmax(axis=0)
    n_rows = image.shape[0]
    angles = bank.angles

    rows, cols = np.nonzero(best > response_threshold)
    # strongest first; ties broken by raster order for determinism
    order = np.lexsort((cols, rows, -best[rows, cols]))
    kept: list[tuple[int, int]] = []
    taken = np.zeros(image.shape, dtype=bool)
    rad = int(math.floor(nms_radius))
    for idx in order:
        r, cc = rows[idx], cols[idx]
        if taken[r, cc]:
            continue
        kept.append((r, cc))
        r0, r1 = max(0, r - rad), min(image.shape[0], r + rad + 1)
        c0, c1 = max(0, cc - rad), min(image.shape[1], cc + rad + 1)
        rr, ccs = np.mgrid[r0:r1, c0:c1]
        taken[r0:r1, c0:c1] |= (rr - r) ** 2 + (ccs - cc) ** 2 <= nms_radius ** 2
    kept.sort()

    elements = []
    for r, cc in kept:
        x, y = float(cc), float(n_rows - 1 - r)
        if multi_orientation:
            ks = np.nonzero(resp[:, r, cc] > response_threshold)[0]
        else:
            ks = [arg[r, cc]]
        for k in ks:
            elements.append(CorticalPoint.make(x, y, angles[k]))
    if mode is AngleMode.HALF:
        elements = _dedupe_half(elements)
    return StimulusSet(tuple(elements), c, mode)


def _dedupe_half(elements: Iterable[CorticalPoint]) -> list[CorticalPoint]:
    seen, out = set(), []
    for e in elements:
        p = CorticalPoint.make(e.x, e.y, float(np.mod(e.theta, math.pi)))
        if p not in seen:
            seen.add(p)
            out.append(p)
    return out
