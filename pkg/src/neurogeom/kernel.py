"""Monte Carlo estimate of the Fokker-Planck connectivity kernel.

Random paths of the process ``(x, y, theta)' = (cos theta, sin theta, noise)``
are started at the group identity; counting their visits over volume elements
gives the fundamental solution ``Gamma`` on a grid of displacements. The
symmetrized kernel ``omega(eta) = (Gamma(eta) + Gamma(eta^-1)) / 2`` is stored
on the same grid and evaluated at arbitrary pairs of points by left
invariance.
"""
from __future__ import annotations

import dataclasses
import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .se2 import TWO_PI, AngleMode, CorticalPoint, inverse_arrays, relative_displacement_arrays

log = logging.getLogger(__name__)

RAW = "raw"
MAX_ONE = "max_one"


@dataclass(frozen=True)
class FPParams:
    """Parameters of the discretized stochastic path.

    ``sigma_diff`` is the standard deviation of the angular noise. By default
    the angle moves by ``step_ds * N(0, sigma_diff^2)`` per step; with
    ``diffusion_scaling`` it moves by ``sqrt(step_ds) * N(0, sigma_diff^2)``.
    The two coincide for ``step_ds = 1``.
    """

    sigma_diff: float = 0.08
    step_ds: float = 1.0
    n_steps: int = 100
    n_paths: int = 3000
    seed: int = 0
    diffusion_scaling: bool = False

    def __post_init__(self):
        if not self.sigma_diff > 0:
            raise ValueError("sigma_diff must be positive")
        if not self.step_ds > 0:
            raise ValueError("step_ds must be positive")
        if self.n_steps < 1 or self.n_paths < 1:
            raise ValueError("n_steps and n_paths must be at least 1")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")

    @property
    def angle_step_scale(self) -> float:
        if self.diffusion_scaling:
            return math.sqrt(self.step_ds) * self.sigma_diff
        return self.step_ds * self.sigma_diff

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


# -- path sampling --------------------------------------------------------------


def _path_noise(seed: int, index: int, n: int) -> np.ndarray:
    # counter-based stream per path: key = seed, high counter word = path index
    gen = np.random.Generator(np.random.Philox(key=seed, counter=[0, index, 0, 0]))
    return gen.standard_normal(n)


def sample_paths(params: FPParams, start: int = 0, stop: Optional[int] = None) -> np.ndarray:
    """Paths ``start .. stop-1`` as an array of shape ``(n, n_steps + 1, 3)``.

    Every path starts at the identity. Path ``i`` depends only on
    ``(params.seed, i)``, so any partition of the index range gives the same
    paths.
    """
    stop = params.n_paths if stop is None else min(stop, params.n_paths)
    n = max(0, stop - start)
    H = params.n_steps
    noise = np.empty((n, H))
    for k in range(n):
        noise[k] = _path_noise(params.seed, start + k, H)
    dtheta = params.angle_step_scale * noise
    theta = np.zeros((n, H + 1))
    np.cumsum(dtheta, axis=1, out=theta[:, 1:])
    ds = params.step_ds
    x = np.zeros((n, H + 1))
    y = np.zeros((n, H + 1))
    # position update uses the angle at the start of each step
    np.cumsum(ds * np.cos(theta[:, :-1]), axis=1, out=x[:, 1:])
    np.cumsum(ds * np.sin(theta[:, :-1]), axis=1, out=y[:, 1:])
    return np.stack([x, y, np.mod(theta, TWO_PI)], axis=-1)


# -- grids ----------------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    n_x: int = 101
    n_y: int = 101
    n_theta: int = 64
    x_range: tuple[float, float] = (-100.0, 100.0)
    y_range: tuple[float, float] = (-100.0, 100.0)
    theta_period: float = TWO_PI

    def __post_init__(self):
        if min(self.n_x, self.n_y, self.n_theta) < 2:
            raise ValueError("every grid axis needs at least 2 bins")
        if not (self.x_range[1] > self.x_range[0] and self.y_range[1] > self.y_range[0]):
            raise ValueError("grid ranges must be increasing")
        if not (math.isclose(self.theta_period, TWO_PI) or math.isclose(self.theta_period, math.pi)):
            raise ValueError("theta period must be 2*pi or pi")

    @classmethod
    def default_for(cls, params: FPParams, n_x: int = 101, n_y: int = 101,
                    n_theta: int = 64) -> "GridSpec":
        L = params.n_steps * params.step_ds
        return cls(n_x, n_y, n_theta, (-L, L), (-L, L), TWO_PI)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n_x, self.n_y, self.n_theta)

    @property
    def widths(self) -> tuple[float, float, float]:
        return ((self.x_range[1] - self.x_range[0]) / self.n_x,
                (self.y_range[1] - self.y_range[0]) / self.n_y,
                self.theta_period / self.n_theta)

    def bin_index(self, xyt: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Flat bin index of each point and a mask of points inside the spatial range."""
        wx, wy, wt = self.widths
        ix = np.floor((xyt[..., 0] - self.x_range[0]) / wx).astype(np.int64)
        iy = np.floor((xyt[..., 1] - self.y_range[0]) / wy).astype(np.int64)
        # theta bins are centred on multiples of the bin width
        it = np.floor(np.mod(xyt[..., 2], self.theta_period) / wt + 0.5).astype(np.int64) % self.n_theta
        inside = (ix >= 0) & (ix < self.n_x) & (iy >= 0) & (iy < self.n_y)
        flat = (ix * self.n_y + iy) * self.n_theta + it
        return flat, inside


@dataclass(frozen=True)
class KernelGrid:
    """Nonnegative kernel values on an ``(x, y, theta)`` grid of displacements.

    Spatial bin ``i`` is centred at ``x_range[0] + (i + 1/2) * width``; angular
    bin ``k`` is centred at ``k * theta_period / n_theta`` and the angle axis is
    cyclic.
    """

    values: np.ndarray
    x_range: tuple[float, float]
    y_range: tuple[float, float]
    theta_period: float = TWO_PI
    normalization: str = RAW
    provenance: Optional[FPParams] = None
    symmetrized: bool = False
    meta: dict = field(default_factory=dict, compare=False)
    _padded: Optional[np.ndarray] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 3:
            raise ValueError("kernel values must be a 3-d array")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("kernel values must be finite and nonnegative")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "x_range", tuple(map(float, self.x_range)))
        object.__setattr__(self, "y_range", tuple(map(float, self.y_range)))
        GridSpec(*v.shape, self.x_range, self.y_range, self.theta_period)

    @property
    def spec(self) -> GridSpec:
        return GridSpec(*self.values.shape, self.x_range, self.y_range, self.theta_period)

    @property
    def shape(self):
        return self.values.shape

    def centers(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        wx, wy, wt = self.spec.widths
        nx, ny, nt = self.values.shape
        return (self.x_range[0] + (np.arange(nx) + 0.5) * wx,
                self.y_range[0] + (np.arange(ny) + 0.5) * wy,
                np.arange(nt) * wt)

    @property
    def cell_volume(self) -> float:
        wx, wy, wt = self.spec.widths
        return wx * wy * wt

    def replace(self, **changes) -> "KernelGrid":
        return dataclasses.replace(self, **changes)

    def normalized(self) -> "KernelGrid":
        """Copy scaled so the maximum value is 1."""
        m = float(self.values.max())
        if m <= 0:
            raise ValueError("cannot normalize an all-zero kernel")
        return self.replace(values=self.values / m, normalization=MAX_ONE)

    def interpolate(self, eta: np.ndarray) -> np.ndarray:
        """Trilinear interpolation at displacements ``eta`` of shape ``(..., 3)``.

        The angle axis wraps. Beyond the outermost spatial bin centres the
        grid is padded with zeros, so values fall linearly to 0 within half a
        bin outside the range and are exactly 0 further out.
        """
        eta = np.asarray(eta, dtype=float)
        nx, ny, nt = self.values.shape
        wx, wy, wt = self.spec.widths
        fx = (eta[..., 0] - self.x_range[0]) / wx - 0.5
        fy = (eta[..., 1] - self.y_range[0]) / wy - 0.5
        ft = np.mod(eta[..., 2], self.theta_period) / wt
        ix = np.floor(fx)
        iy = np.floor(fy)
        it = np.floor(ft)
        tx, ty, tt = fx - ix, fy - iy, ft - it
        ok = (ix >= -1) & (ix <= nx - 1) & (iy >= -1) & (iy <= ny - 1)
        ix = np.where(ok, ix, -1).astype(np.int64) + 1
        iy = np.where(ok, iy, -1).astype(np.int64) + 1
        it0 = it.astype(np.int64) % nt
        it1 = (it0 + 1) % nt
        if self._padded is None:
            object.__setattr__(self, "_padded", np.pad(self.values, ((1, 1), (1, 1), (0, 0))))
        padded = self._padded
        out = np.zeros(np.shape(fx))
        for dx, wxs in ((0, 1.0 - tx), (1, tx)):
            for dy, wys in ((0, 1.0 - ty), (1, ty)):
                for itk, wts in ((it0, 1.0 - tt), (it1, tt)):
                    out = out + wxs * wys * wts * padded[ix + dx, iy + dy, itk]
        return np.where(ok, out, 0.0)


# -- estimation -------------------------------------------------------------------


def _count_visits(paths: np.ndarray, spec: GridSpec) -> tuple[np.ndarray, int]:
    flat, inside = spec.bin_index(paths.reshape(-1, 3))
    counts = np.bincount(flat[inside], minlength=spec.n_x * spec.n_y * spec.n_theta)
    return counts, int(np.count_nonzero(~inside))


def accumulate_gamma(paths: np.ndarray, spec: GridSpec, n_paths: Optional[int] = None,
                     provenance: Optional[FPParams] = None) -> KernelGrid:
    """Occupation histogram of all visits of all paths, divided by the path count.

    ``paths`` has shape ``(n_paths, n_steps + 1, 3)``. Warns when more than
    5% of the visits fall outside the spatial range.
    """
    paths = np.asarray(paths, dtype=float)
    n_paths = paths.shape[0] if n_paths is None else n_paths
    counts, outside = _count_visits(paths, spec)
    total = paths.shape[0] * paths.shape[1]
    return _grid_from_counts(counts, outside, total, n_paths, spec, provenance)


def _grid_from_counts(counts, outside, total, n_paths, spec, provenance) -> KernelGrid:
    frac = outside / total if total else 0.0
    if frac > 0.05:
        warnings.warn(f"{100 * frac:.1f}% of path visits fall outside the kernel grid",
                      RuntimeWarning, stacklevel=3)
    values = counts.reshape(spec.shape).astype(np.float64) / n_paths
    meta = {"visits": int(total), "out_of_range_visits": int(outside),
            "out_of_range_fraction": float(frac)}
    return KernelGrid(values, spec.x_range, spec.y_range, spec.theta_period, RAW,
                      provenance, False, meta)


def estimate_gamma(params: FPParams, spec: Optional[GridSpec] = None, n_workers: int = 1,
                   chunk_size: int = 2000) -> KernelGrid:
    """Sample ``params.n_paths`` paths in chunks and accumulate their visits.

    Chunks may run on several threads; integer visit counts are summed in
    chunk order, so the result does not depend on ``n_workers``.
    """
    spec = GridSpec.default_for(params) if spec is None else spec
    bounds = [(s, min(s + chunk_size, params.n_paths))
              for s in range(0, params.n_paths, chunk_size)]

    def work(b):
        return _count_visits(sample_paths(params, *b), spec)

    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(work, bounds))
    else:
        results = [work(b) for b in bounds]
    counts = np.zeros(spec.n_x * spec.n_y * spec.n_theta, dtype=np.int64)
    outside = 0
    for c, o in results:
        counts += c
        outside += o
    total = params.n_paths * (params.n_steps + 1)
    return _grid_from_counts(counts, outside, total, params.n_paths, spec, params)


def _smoothing_matrix(n: int, bandwidth: float, cyclic: bool) -> np.ndarray:
    """Column ``j`` holds the weights with which bin ``j`` spreads its mass.

    Gaussian taps truncated at 3 bandwidths, normalized to sum 1. Taps that
    leave a non-cyclic axis are reflected back (half-sample symmetric), so
    every column sums to 1.
    """
    if bandwidth <= 0:
        return np.eye(n)
    half = int(math.ceil(3.0 * bandwidth))
    offs = np.arange(-half, half + 1)
    taps = np.exp(-0.5 * (offs / bandwidth) ** 2)
    taps /= taps.sum()
    M = np.zeros((n, n))
    for j in range(n):
        for o, w in zip(offs, taps):
            i = j + o
            if cyclic:
                i %= n
            else:
                while i < 0 or i >= n:
                    i = -i - 1 if i < 0 else 2 * n - 1 - i
            M[i, j] += w
    return M


def smooth(grid: KernelGrid, bandwidth: Sequence[float] = (1.0, 1.0, 1.0)) -> KernelGrid:
    """Separable local weighted mean; bandwidths in bins, 0 disables an axis."""
    bx, by, bt = bandwidth
    if min(bx, by, bt) < 0:
        raise ValueError("bandwidths must be nonnegative")
    nx, ny, nt = grid.shape
    v = grid.values
    if bx > 0:
        v = np.tensordot(_smoothing_matrix(nx, bx, False), v, axes=(1, 0))
    if by > 0:
        v = np.einsum("ij,xjt->xit", _smoothing_matrix(ny, by, False), v)
    if bt > 0:
        v = np.einsum("ij,xyj->xyi", _smoothing_matrix(nt, bt, True), v)
    meta = dict(grid.meta)
    meta["smoothing_bandwidth"] = [float(bx), float(by), float(bt)]
    return grid.replace(values=np.maximum(v, 0.0), meta=meta)


def symmetrize(grid: KernelGrid) -> KernelGrid:
    """``omega(eta) = (Gamma(eta) + Gamma(eta^-1)) / 2`` at every grid node."""
    if not math.isclose(grid.theta_period, TWO_PI):
        raise ValueError("symmetrization needs a 2*pi-periodic angle axis")
    for lo, hi in (grid.x_range, grid.y_range):
        if not math.isclose(lo, -hi, rel_tol=1e-12, abs_tol=1e-12):
            raise ValueError("symmetrization needs ranges symmetric about 0")
    cx, cy, ct = grid.centers()
    X, Y, T = np.meshgrid(cx, cy, ct, indexing="ij")
    eta = np.stack([X, Y, T], axis=-1)
    back = grid.interpolate(inverse_arrays(eta))
    return grid.replace(values=0.5 * (grid.values + back), symmetrized=True, meta=dict(grid.meta))


def estimate_omega(params: FPParams, spec: Optional[GridSpec] = None,
                   bandwidth: Sequence[float] = (1.0, 1.0, 1.0),
                   n_workers: int = 1) -> tuple[KernelGrid, KernelGrid]:
    """Full pipeline: paths, occupation histogram, smoothing, symmetrization, max-one scaling.

    Returns ``(gamma, omega)`` where ``gamma`` is the smoothed raw estimate.
    """
    gamma = smooth(estimate_gamma(params, spec, n_workers), bandwidth)
    omega = symmetrize(gamma).normalized()
    return gamma, omega


# -- evaluation -----------------------------------------------------------------------


def _flip_variants(xyt: np.ndarray, mode: AngleMode) -> list[np.ndarray]:
    if mode is AngleMode.FULL:
        return [xyt]
    flipped = xyt.copy()
    flipped[..., 2] = np.mod(flipped[..., 2] + math.pi, TWO_PI)
    return [xyt, flipped]


def omega_pairs(grid: KernelGrid, a: np.ndarray, b: np.ndarray,
                mode: AngleMode | str = AngleMode.FULL) -> np.ndarray:
    """Kernel value for each pair of rows ``(a[k], b[k])`` (broadcasting).

    Both displacements ``b^-1 a`` and ``a^-1 b`` are looked up and averaged,
    which makes the result exactly symmetric in its arguments. In half-circle
    mode every element is tried in both directions and the maximum is kept.
    """
    mode = AngleMode.parse(mode)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    best = None
    for av in _flip_variants(a, mode):
        for bv in _flip_variants(b, mode):
            val = 0.5 * (grid.interpolate(relative_displacement_arrays(bv, av))
                         + grid.interpolate(relative_displacement_arrays(av, bv)))
            best = val if best is None else np.maximum(best, val)
    return best


def eval_omega(grid: KernelGrid, p_i: CorticalPoint, p_j: CorticalPoint,
               mode: AngleMode | str = AngleMode.FULL) -> float:
    """Kernel value between two cortical points; 0 when they are out of range."""
    return float(omega_pairs(grid, np.asarray(p_i, dtype=float), np.asarray(p_j, dtype=float), mode))


def omega_matrix(grid: KernelGrid, xyt: np.ndarray, mode: AngleMode | str = AngleMode.FULL,
                 others: Optional[np.ndarray] = None, block: int = 512) -> np.ndarray:
    """Kernel values between all rows of ``xyt`` (and ``others`` if given).

    Without ``others`` the result is symmetric by construction: each unordered
    pair is evaluated once and mirrored.
    """
    xyt = np.asarray(xyt, dtype=float).reshape(-1, 3)
    if others is not None:
        others = np.asarray(others, dtype=float).reshape(-1, 3)
        out = np.empty((len(xyt), len(others)))
        for s in range(0, len(xyt), block):
            out[s:s + block] = omega_pairs(grid, xyt[s:s + block, None, :], others[None, :, :], mode)
        return out
    n = len(xyt)
    out = np.zeros((n, n))
    iu, ju = np.triu_indices(n)
    step = block * block
    for s in range(0, len(iu), step):
        i, j = iu[s:s + step], ju[s:s + step]
        vals = omega_pairs(grid, xyt[i], xyt[j], mode)
        out[i, j] = vals
        out[j, i] = vals
    return out


def distance_estimate(omega_value: float, omega_max: float = 1.0) -> float:
    """Distance ``d`` with ``omega / omega_max = exp(-d^2)``."""
    if not omega_value > 0:
        raise ValueError("zero kernel value: the pair is disconnected at this resolution")
    if omega_value > omega_max:
        raise ValueError("kernel value exceeds its maximum")
    return math.sqrt(max(0.0, -math.log(omega_value / omega_max)))


# -- summaries ------------------------------------------------------------------------


def xy_projection(grid: KernelGrid) -> np.ndarray:
    """Kernel summed over the angle axis, indexed ``(x_bin, y_bin)``."""
    return grid.values.sum(axis=2)


def center_of_mass(grid: KernelGrid) -> tuple[float, float]:
    P = xy_projection(grid)
    cx, cy, _ = grid.centers()
    m = P.sum()
    return float((P.sum(axis=1) * cx).sum() / m), float((P.sum(axis=0) * cy).sum() / m)


def anisotropy_ratio(grid: KernelGrid, radius_fraction: float = 0.2) -> float:
    """Projected mass on the x axis over that on the y axis at equal radius.

    The radius is ``radius_fraction`` times the length of the x range; both
    signs of each axis are included.
    """
    P = xy_projection(grid)
    cx, cy, _ = grid.centers()
    r = radius_fraction * (grid.x_range[1] - grid.x_range[0])
    flat = KernelGrid(P[:, :, None].repeat(2, axis=2), grid.x_range, grid.y_range)
    pts = np.array([[r, 0, 0], [-r, 0, 0], [0, r, 0], [0, -r, 0]], dtype=float)
    vals = flat.interpolate(pts)
    along_x, along_y = vals[0] + vals[1], vals[2] + vals[3]
    if along_y == 0:
        return math.inf if along_x > 0 else float("nan")
    return float(along_x / along_y)


def summary(gamma: KernelGrid, omega: Optional[KernelGrid] = None) -> dict:
    mx, my = center_of_mass(gamma)
    out = {"mass": float(gamma.values.sum() * gamma.cell_volume),
           "total_value": float(gamma.values.sum()),
           "max": float(gamma.values.max()),
           "center_of_mass": [mx, my],
           "anisotropy_ratio": anisotropy_ratio(gamma),
           "out_of_range_fraction": float(gamma.meta.get("out_of_range_fraction", 0.0))}
    if omega is not None:
        out["omega_identity_value"] = float(omega.interpolate(np.zeros(3)))
    return out
