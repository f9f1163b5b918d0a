"""Affinity matrices over a stimulus and their spectral decomposition.

Perceptual units are read off the leading eigenvector of the affinity matrix:
the elements where it is large form a unit, they are removed, and the search
repeats on what is left.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .kernel import MAX_ONE, KernelGrid, omega_matrix
from .lifting import StimulusSet

SELF = "self"
ZERO = "zero"


class ConvergenceError(RuntimeError):
    """Power iteration stopped before reaching the requested residual."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class AffinityMatrix:
    """Symmetric nonnegative matrix ``A_ij = scale * omega(xi_i, xi_j)``.

    ``element_ids[r]`` is the stimulus index of row ``r``; it changes when
    rows are removed during unit extraction.
    """

    entries: np.ndarray
    element_ids: tuple[int, ...] = ()
    scale: float = 1.0
    diagonal: str = SELF

    def __post_init__(self):
        a = np.array(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("affinity matrix must be square")
        if not np.array_equal(a, a.T):
            raise ValueError("affinity matrix must be exactly symmetric")
        if np.any(a < 0):
            raise ValueError("affinity entries must be nonnegative")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)
        ids = tuple(int(i) for i in self.element_ids) if self.element_ids else tuple(range(len(a)))
        if len(ids) != len(a):
            raise ValueError("element_ids must match the matrix size")
        object.__setattr__(self, "element_ids", ids)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def kernel_matrix(self) -> np.ndarray:
        """The bare kernel values, with ``scale`` divided out."""
        if self.scale == 0:
            raise ValueError("scale is zero; kernel values cannot be recovered")
        return self.entries / self.scale

    def submatrix(self, keep: Sequence[int]) -> "AffinityMatrix":
        keep = np.asarray(keep, dtype=int)
        return AffinityMatrix(self.entries[np.ix_(keep, keep)],
                              tuple(self.element_ids[k] for k in keep), self.scale, self.diagonal)


def build_affinity(stimulus: StimulusSet, grid: KernelGrid, gamma: float = 1.0, mu: float = 1.0,
                   diagonal: str = SELF) -> AffinityMatrix:
    """``A_ij = gamma * mu * omega(xi_i, xi_j)`` over the stimulus elements.

    ``diagonal="self"`` keeps the kernel value at zero displacement on the
    diagonal; ``"zero"`` clears it.
    """
    if grid.normalization != MAX_ONE:
        raise ValueError("affinities need a max-one normalized kernel")
    if not grid.symmetrized:
        raise ValueError("affinities need a symmetrized kernel")
    if diagonal not in (SELF, ZERO):
        raise ValueError(f"unknown diagonal policy {diagonal!r}")
    scale = float(gamma) * float(mu)
    n = len(stimulus)
    if n == 0:
        return AffinityMatrix(np.zeros((0, 0)), (), scale, diagonal)
    W = omega_matrix(grid, stimulus.as_array(), stimulus.angle_mode)
    if diagonal == ZERO:
        np.fill_diagonal(W, 0.0)
    return AffinityMatrix(scale * W, tuple(range(n)), scale, diagonal)


# -- eigen solvers ----------------------------------------------------------------


def _as_array(A) -> np.ndarray:
    return A.entries if isinstance(A, AffinityMatrix) else np.asarray(A, dtype=float)


def _fix_sign(v: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(v)))
    return -v if v[k] < 0 else v


def top_eigenpair(A, tol: float = 1e-10, max_iter: int = 100_000) -> tuple[float, np.ndarray]:
    """Largest eigenvalue and its unit eigenvector by shifted power iteration.

    The matrix is shifted by a Gershgorin bound so that its spectrum is
    nonnegative, which makes the largest eigenvalue dominant in magnitude
    even when ``-lambda_1`` is also an eigenvalue (bipartite affinities).
    Converges when ``|A v - lambda v| <= tol * max(|lambda|, tiny)``.
    """
    M = _as_array(A)
    n = M.shape[0]
    if n == 0:
        raise ValueError("empty matrix")
    if n == 1:
        return float(M[0, 0]), np.ones(1)
    radii = np.abs(M).sum(axis=1) - np.abs(np.diag(M))
    shift = max(0.0, -float(np.min(np.diag(M) - radii)))
    # deterministic start with a positive overlap on the Perron vector
    v = np.ones(n) + 1e-3 * np.cos(np.arange(n) * 1.618)
    v /= np.linalg.norm(v)
    scale = max(float(np.abs(M).max()), np.finfo(float).tiny)
    lam, res = 0.0, math.inf
    for it in range(1, max_iter + 1):
        w = M @ v
        lam = float(v @ w)
        res = float(np.linalg.norm(w - lam * v))
        if res <= tol * max(abs(lam), 1e-300) or res <= 1e-15 * scale:
            return lam, _fix_sign(v)
        w = w + shift * v
        nrm = np.linalg.norm(w)
        if nrm == 0:
            break
        v = w / nrm
    raise ConvergenceError(f"power iteration did not converge (residual {res:.3e})", res, max_iter)


@dataclass(frozen=True)
class SpectralResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns, matching eigenvalues

    def pair(self, k: int) -> tuple[float, np.ndarray]:
        return float(self.eigenvalues[k]), self.eigenvectors[:, k]


def full_spectrum(A) -> SpectralResult:
    """All eigenpairs of a symmetric matrix, largest eigenvalue first."""
    M = _as_array(A)
    if M.shape[0] == 0:
        raise ValueError("empty matrix")
    vals, vecs = np.linalg.eigh(M)
    order = np.argsort(vals, kind="stable")[::-1]
    vecs = vecs[:, order]
    for k in range(vecs.shape[1]):
        vecs[:, k] = _fix_sign(vecs[:, k])
    return SpectralResult(vals[order], vecs)


def rank_one_approx(A, tol: float = 1e-12) -> np.ndarray:
    """Vector ``p`` minimizing ``||A - p p^T||_F``, namely ``sqrt(lambda_1) v_1``."""
    try:
        lam, v = top_eigenpair(A, tol=tol)
    except ConvergenceError:
        lam, v = full_spectrum(A).pair(0)
    if not lam > 0:
        raise ValueError("largest eigenvalue is not positive; no rank-one approximation")
    return math.sqrt(lam) * v


# -- perceptual units ---------------------------------------------------------------


@dataclass(frozen=True)
class PerceptualUnit:
    member_indices: frozenset[int]
    eigenvalue: float
    eigenvector: np.ndarray = field(repr=False)
    row_ids: tuple[int, ...] = field(default=(), repr=False)  # stimulus index per eigenvector entry

    def to_dict(self) -> dict:
        return {"eigenvalue": self.eigenvalue, "member_indices": sorted(self.member_indices)}


def _leading_pair(A: AffinityMatrix, tol: float, max_iter: int) -> tuple[float, np.ndarray]:
    try:
        return top_eigenpair(A, tol=tol, max_iter=max_iter)
    except ConvergenceError:
        # nearly degenerate leading pair; the dense solver still resolves it
        return full_spectrum(A).pair(0)


def extract_units(A: AffinityMatrix, eigen_stop: float = 0.1, member_threshold: float = 0.5,
                  max_units: int = 10, tol: float = 1e-10, max_iter: int = 20_000) -> list[PerceptualUnit]:
    """Peel off perceptual units one leading eigenvector at a time.

    Members of a unit are the rows where the leading eigenvector reaches
    ``member_threshold`` times its maximum. After each unit its rows and
    columns are deleted. Extraction stops when a later leading eigenvalue
    drops to ``eigen_stop`` times the first one, when a unit would be empty,
    or after ``max_units`` units.
    """
    if not 0 < member_threshold < 1:
        raise ValueError("member_threshold must lie in (0, 1)")
    if eigen_stop < 0:
        raise ValueError("eigen_stop must be nonnegative")
    units: list[PerceptualUnit] = []
    current = A
    first = None
    while current.n > 0 and len(units) < max_units:
        lam, v = _leading_pair(current, tol, max_iter)
        if first is None:
            first = lam
        elif lam <= eigen_stop * first:
            break
        if not lam > 0:
            break
        rows = np.nonzero(v >= member_threshold * v.max())[0]
        if len(rows) == 0:
            break
        members = frozenset(current.element_ids[r] for r in rows)
        units.append(PerceptualUnit(members, float(lam), v.copy(), current.element_ids))
        keep = np.setdiff1d(np.arange(current.n), rows)
        current = current.submatrix(keep)
    return units


def eigen_gap(A) -> float:
    """Ratio of the two largest eigenvalues."""
    vals = full_spectrum(A).eigenvalues
    if len(vals) < 2:
        return math.inf
    return float(vals[0] / vals[1]) if vals[1] > 0 else math.inf
