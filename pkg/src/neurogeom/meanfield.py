"""Mean-field population dynamics restricted to the stimulated domain.

The discretized activity equation is

    da_i/dt = -alpha a_i + transfer(sum_j mu W_ij a_j + h_i)

with ``W`` the kernel matrix over the stimulus elements and a piecewise
linear transfer function. In the linear regime it reduces to
``da/dt = -alpha a + gamma mu W a + beta`` whose homogeneous part governs the
stability of the stationary state.
"""
from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .kernel import KernelGrid, omega_matrix
from .lifting import StimulusSet
from .spectral import AffinityMatrix, ConvergenceError, full_spectrum, top_eigenpair


class ForcingForm(enum.Enum):
    PAPER_EQREM = "paper_eqrem"  # constant gamma * c
    LINEARIZED_SIGMOID = "linearized_sigmoid"  # constant 1/2

    @classmethod
    def parse(cls, value) -> "ForcingForm":
        return value if isinstance(value, cls) else cls(str(value).lower())


class NumericalError(FloatingPointError):
    """The integration produced NaN or Inf."""


@dataclass(frozen=True)
class MeanFieldParams:
    alpha: float = 1.0
    gamma_slope: float = 1.0
    c: float = 1.0
    mu: float = 0.0
    forcing_form: ForcingForm = ForcingForm.LINEARIZED_SIGMOID
    dt: Optional[float] = None  # defaults to 0.1 / alpha
    t_end: float = 50.0

    def __post_init__(self):
        object.__setattr__(self, "forcing_form", ForcingForm.parse(self.forcing_form))
        if not (self.alpha > 0 and self.gamma_slope > 0 and self.c > 0):
            raise ValueError("alpha, gamma_slope and c must be positive")
        if self.mu < 0:
            raise ValueError("mu must be nonnegative")
        if self.dt is None:
            object.__setattr__(self, "dt", 0.1 / self.alpha)
        if not 0 < self.dt < 2.0 / self.alpha:
            raise ValueError("dt must lie in (0, 2/alpha)")
        if self.t_end < 0:
            raise ValueError("t_end must be nonnegative")

    @property
    def lower_break(self) -> float:
        return self.c - 0.5 / self.gamma_slope

    @property
    def upper_break(self) -> float:
        return self.c + 0.5 / self.gamma_slope

    @property
    def forcing(self) -> float:
        """Constant term of the reduced equation."""
        if self.forcing_form is ForcingForm.PAPER_EQREM:
            return self.gamma_slope * self.c
        return 0.5

    def replace(self, **changes) -> "MeanFieldParams":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["forcing_form"] = self.forcing_form.value
        return d


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray  # (T,)
    states: np.ndarray  # (T, N)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def max_abs(self) -> float:
        return float(np.abs(self.states).max()) if self.states.size else 0.0


def transfer(s, p: MeanFieldParams):
    """Piecewise linear transfer: 0 below ``c - 1/(2 gamma)``, 1 above ``c + 1/(2 gamma)``."""
    out = np.clip(p.gamma_slope * (np.asarray(s, dtype=float) - p.c) + 0.5, 0.0, 1.0)
    return float(out) if np.ndim(out) == 0 else out


def kernel_matrix(A: Union[AffinityMatrix, np.ndarray]) -> np.ndarray:
    """Bare kernel matrix ``W``; an :class:`AffinityMatrix` has its scale divided out."""
    if isinstance(A, AffinityMatrix):
        return A.kernel_matrix
    W = np.asarray(A, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValueError("kernel matrix must be square")
    return W


def _rk4(rhs: Callable[[np.ndarray], np.ndarray], a0: np.ndarray, dt: float, t_end: float,
         stride: int) -> Trajectory:
    n_steps = int(math.ceil(t_end / dt - 1e-9))
    a = np.array(a0, dtype=float)
    if not np.all(np.isfinite(a)):
        raise NumericalError("initial state is not finite")
    times, states = [0.0], [a.copy()]
    for k in range(1, n_steps + 1):
        # overflow is caught by the finiteness check below
        with np.errstate(over="ignore", invalid="ignore"):
            k1 = rhs(a)
            k2 = rhs(a + 0.5 * dt * k1)
            k3 = rhs(a + 0.5 * dt * k2)
            k4 = rhs(a + dt * k3)
            a = a + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(a)):
            raise NumericalError(f"non-finite activity at t={k * dt:g}; reduce dt")
        if k % stride == 0 or k == n_steps:
            times.append(k * dt)
            states.append(a.copy())
    return Trajectory(np.array(times), np.array(states))


def simulate_nonlinear(A, h, a0, p: MeanFieldParams, stride: int = 1) -> Trajectory:
    """Integrate ``da/dt = -alpha a + transfer(mu W a + h)`` with fixed-step RK4."""
    W = kernel_matrix(A)
    h = np.broadcast_to(np.asarray(h, dtype=float), (W.shape[0],))
    muW = p.mu * W

    def rhs(a):
        return -p.alpha * a + transfer(muW @ a + h, p)

    return _rk4(rhs, _initial(a0, W), p.dt, p.t_end, stride)


def simulate_reduced(A, p: MeanFieldParams, a0, homogeneous: bool = False,
                     stride: int = 1) -> Trajectory:
    """Integrate the linear-regime equation ``da/dt = -alpha a + gamma mu W a + beta``.

    ``beta`` follows ``p.forcing_form``; ``homogeneous=True`` drops it and
    gives the dynamics of a perturbation of the stationary state.
    """
    W = kernel_matrix(A)
    L = p.gamma_slope * p.mu * W
    beta = 0.0 if homogeneous else p.forcing

    def rhs(a):
        return -p.alpha * a + L @ a + beta

    return _rk4(rhs, _initial(a0, W), p.dt, p.t_end, stride)


def _initial(a0, W) -> np.ndarray:
    n = W.shape[0]
    if a0 is None:
        return np.zeros(n)
    return np.array(np.broadcast_to(np.asarray(a0, dtype=float), (n,)))


@dataclass(frozen=True)
class StationaryState:
    values: np.ndarray
    argument: np.ndarray  # mu W a + c on each element
    in_linear_regime: bool
    violations: tuple[int, ...]


def stationary_state(A, p: MeanFieldParams) -> StationaryState:
    """Solve ``(alpha I - gamma mu W) a = beta`` and certify the linear regime a posteriori."""
    W = kernel_matrix(A)
    n = W.shape[0]
    M = p.alpha * np.eye(n) - p.gamma_slope * p.mu * W
    smallest = float(np.min(np.abs(np.linalg.eigvalsh(M)))) if n else 1.0
    if smallest <= 1e-12 * p.alpha:
        raise np.linalg.LinAlgError(f"stationary system is singular at mu={p.mu:g} (critical value)")
    a = np.linalg.solve(M, np.full(n, p.forcing))
    arg = p.mu * (W @ a) + p.c
    tol = 1e-12 * max(1.0, abs(p.c))
    bad = np.nonzero((arg < p.lower_break - tol) | (arg > p.upper_break + tol))[0]
    return StationaryState(a, arg, len(bad) == 0, tuple(int(i) for i in bad))


@dataclass(frozen=True)
class WeakConnectivityReport:
    passed: bool
    lhs: float
    bound: float
    slack: float
    reason: str = ""

    def to_dict(self) -> dict:
        return {"lhs": self.lhs, "bound": self.bound, "pass": bool(self.passed),
                "slack": self.slack, "reason": self.reason}


def weak_connectivity_bound(p: MeanFieldParams) -> float:
    return p.alpha * min(0.5 / p.gamma_slope, p.c - 0.5 / p.gamma_slope)


def check_weak_connectivity(kernel, p: MeanFieldParams) -> WeakConnectivityReport:
    """Compare ``mu * max_i sum_j W_ij`` (or ``mu`` times the kernel integral) with the bound.

    ``kernel`` is an affinity/kernel matrix or a :class:`KernelGrid`; for a
    grid the integral of the invariant kernel is the same at every point and
    is approximated by the cell sum.
    """
    if isinstance(kernel, KernelGrid):
        total = float(kernel.values.sum() * kernel.cell_volume)
    else:
        W = kernel_matrix(kernel)
        total = float(W.sum(axis=1).max()) if W.size else 0.0
    lhs = p.mu * total
    bound = weak_connectivity_bound(p)
    if p.c < 0.5 / p.gamma_slope:
        return WeakConnectivityReport(False, lhs, bound, bound - lhs,
                                      "c < 1/(2 gamma): the bound is negative")
    return WeakConnectivityReport(lhs <= bound, lhs, bound, bound - lhs)


def mu_for_weak_connectivity(kernel, p: MeanFieldParams, fraction: float = 0.5) -> float:
    """Facilitation ``mu`` using ``fraction`` of the weak-connectivity budget."""
    unit = check_weak_connectivity(kernel, p.replace(mu=1.0))
    return fraction * unit.bound / unit.lhs if unit.lhs > 0 else math.inf


@dataclass(frozen=True)
class OutsideDomainReport:
    passed: bool
    max_off_domain: float
    max_abs_activity: float
    n_off_domain: int
    weak_connectivity: WeakConnectivityReport
    threshold: float = 1e-9

    def to_dict(self) -> dict:
        return {"pass": bool(self.passed), "max_off_domain": self.max_off_domain,
                "max_abs_activity": self.max_abs_activity, "n_off_domain": self.n_off_domain,
                "threshold": self.threshold, "weak_connectivity": self.weak_connectivity.to_dict()}


def off_domain_sample(stimulus: StimulusSet, n_ring: int = 8, factor: int = 4, seed: int = 0,
                      margin: float = 0.0) -> np.ndarray:
    """Points around the stimulus where the input is zero.

    ``factor * N`` positions uniform over the stimulus bounding box, each
    carrying a ring of ``n_ring`` orientations, plus the same ring of
    orientations at every stimulus position. Points coinciding with a
    stimulus element are dropped.
    """
    xyt = stimulus.as_array()
    if len(xyt) == 0:
        return np.zeros((0, 3))
    rng = np.random.default_rng(seed)
    lo = xyt[:, :2].min(axis=0) - margin
    hi = xyt[:, :2].max(axis=0) + margin
    pos = rng.uniform(lo, hi, size=(factor * len(xyt), 2))
    pos = np.concatenate([pos, xyt[:, :2]])
    offsets = np.arange(n_ring) * (2 * math.pi / n_ring)
    phase = rng.uniform(0, 2 * math.pi / n_ring, size=len(pos))
    theta = np.mod(phase[:, None] + offsets[None, :], 2 * math.pi)
    pts = np.column_stack([np.repeat(pos, n_ring, axis=0), theta.ravel()])
    # drop any sample that duplicates an element
    d = np.abs(pts[:, None, :] - xyt[None, :, :]).max(axis=2)
    return pts[d.min(axis=1) > 1e-9]


def outside_domain_stays_zero(grid: KernelGrid, stimulus: StimulusSet, p: MeanFieldParams,
                              off_domain: Optional[np.ndarray] = None, threshold: float = 1e-9,
                              t_end: Optional[float] = None) -> OutsideDomainReport:
    """Run the full nonlinear dynamics on stimulus plus off-domain points from rest.

    The input is ``c`` on the stimulus and 0 elsewhere; the report gives the
    largest activity ever reached off the domain.
    """
    on = stimulus.as_array()
    off = off_domain_sample(stimulus) if off_domain is None else np.asarray(off_domain, float).reshape(-1, 3)
    pts = np.concatenate([on, off])
    W = omega_matrix(grid, pts, stimulus.angle_mode)
    weak = check_weak_connectivity(W, p)
    if len(off) == 0:
        return OutsideDomainReport(True, 0.0, 0.0, 0, weak, threshold)
    h = np.zeros(len(pts))
    h[:len(on)] = stimulus.input_level_c
    run = p if t_end is None else p.replace(t_end=t_end)
    traj = simulate_nonlinear(W, h, np.zeros(len(pts)), run)
    off_max = float(np.abs(traj.states[:, len(on):]).max())
    return OutsideDomainReport(off_max < threshold, off_max, traj.max_abs(), len(off), weak, threshold)


@dataclass(frozen=True)
class StabilityReport:
    lambda_tilde_1: float
    mu_star: float
    mu: float
    stable: bool
    linear_eigenvalue: float  # -alpha + mu gamma lambda_1

    def to_dict(self) -> dict:
        return {"lambda_tilde_1": self.lambda_tilde_1, "mu_star": self.mu_star, "mu": self.mu,
                "stable": bool(self.stable), "linear_eigenvalue": self.linear_eigenvalue}


def stability_threshold(A, p: MeanFieldParams) -> StabilityReport:
    """Largest kernel eigenvalue and the critical facilitation ``alpha / (gamma lambda_1)``."""
    W = kernel_matrix(A)
    if W.size == 0 or not np.any(W):
        raise ValueError("stability needs a nonempty, nonzero kernel matrix")
    try:
        lam, _ = top_eigenpair(W)
    except ConvergenceError:
        lam = float(full_spectrum(W).eigenvalues[0])
    rate = -p.alpha + p.mu * p.gamma_slope * lam
    if lam <= 0:
        return StabilityReport(lam, math.inf, p.mu, True, rate)
    mu_star = p.alpha / (p.gamma_slope * lam)
    return StabilityReport(lam, mu_star, p.mu, p.mu < mu_star, rate)


def growth_rate(traj: Trajectory, direction: np.ndarray) -> float:
    """Least-squares slope of ``log |<a(t), direction>|`` over the second half of the run."""
    proj = np.abs(traj.states @ direction)
    half = len(traj.times) // 2
    t, y = traj.times[half:], proj[half:]
    if np.any(y <= 0):
        raise ValueError("projection vanishes; growth rate undefined")
    slope, _ = np.polyfit(t, np.log(y), 1)
    return float(slope)
