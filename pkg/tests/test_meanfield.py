import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from neurogeom.lifting import StimulusSet, fhh_scene
from neurogeom.meanfield import (ForcingForm, MeanFieldParams, NumericalError,
                                 check_weak_connectivity, growth_rate, mu_for_weak_connectivity,
                                 off_domain_sample, outside_domain_stays_zero, simulate_nonlinear,
                                 simulate_reduced, stability_threshold, stationary_state,
                                 transfer, weak_connectivity_bound)
from neurogeom.se2 import CorticalPoint
from neurogeom.spectral import AffinityMatrix, full_spectrum

P = CorticalPoint.make


def random_kernel(rng, n):
    M = rng.random((n, n))
    return np.triu(M) + np.triu(M, 1).T


# -- parameters and transfer ------------------------------------------------------------------


def test_params_defaults_and_validation():
    p = MeanFieldParams(alpha=2.0)
    assert p.dt == pytest.approx(0.05)
    assert p.forcing_form is ForcingForm.LINEARIZED_SIGMOID and p.forcing == 0.5
    assert MeanFieldParams(gamma_slope=2, c=3, forcing_form="paper_eqrem").forcing == 6.0
    for bad in (dict(alpha=0), dict(mu=-1), dict(dt=2.5), dict(c=0), dict(t_end=-1)):
        with pytest.raises(ValueError):
            MeanFieldParams(**bad)


def test_transfer_breakpoints():
    p = MeanFieldParams(gamma_slope=2.0, c=1.5)
    assert transfer(1.5, p) == 0.5
    assert transfer(1.5 + 0.25, p) == 1.0
    assert transfer(1.5 - 0.25, p) == 0.0
    assert transfer(-1e300, p) == 0.0
    assert transfer(1e300, p) == 1.0
    assert np.array_equal(transfer(np.array([1.25, 1.5, 1.75]), p), [0.0, 0.5, 1.0])


@given(st.floats(-10, 10), st.floats(-10, 10), st.floats(0.1, 5), st.floats(0.1, 3))
def test_transfer_monotone_bounded_lipschitz(s1, s2, g, c):
    p = MeanFieldParams(gamma_slope=g, c=c)
    t1, t2 = transfer(s1, p), transfer(s2, p)
    assert 0 <= t1 <= 1
    assert abs(t1 - t2) <= g * abs(s1 - s2) + 1e-12
    if s1 <= s2:
        assert t1 <= t2


# -- nonlinear simulation -----------------------------------------------------------------------


def test_rest_stays_at_rest():
    rng = np.random.default_rng(0)
    W = random_kernel(rng, 6)
    p = MeanFieldParams(mu=mu_for_weak_connectivity(W, MeanFieldParams()), t_end=20)
    traj = simulate_nonlinear(W, 0.0, None, p)
    assert traj.max_abs() == 0.0


def test_scalar_fixed_point():
    for alpha in (0.5, 1.0, 3.0):
        p = MeanFieldParams(alpha=alpha, mu=0.7, t_end=40 / alpha)
        traj = simulate_nonlinear(np.zeros((1, 1)), p.c, 0.0, p)
        assert traj.final[0] == pytest.approx(1 / (2 * alpha), abs=1e-9)
        red = simulate_reduced(np.zeros((1, 1)), p, 0.0)
        assert red.final[0] == pytest.approx(1 / (2 * alpha), abs=1e-9)


def test_remark_bound_random_starts():
    rng = np.random.default_rng(1)
    for _ in range(20):
        n = int(rng.integers(1, 12))
        alpha = rng.uniform(0.3, 3)
        W = random_kernel(rng, n)
        p = MeanFieldParams(alpha=alpha, gamma_slope=rng.uniform(0.5, 4), c=rng.uniform(0.5, 2),
                            mu=rng.uniform(0, 5), t_end=10 / alpha)
        a0 = rng.uniform(-1, 1, n) / alpha
        h = rng.uniform(-3, 3, n)
        traj = simulate_nonlinear(W, h, a0, p, stride=3)
        assert traj.max_abs() <= 1 / alpha + 1e-6


def test_stride_and_times():
    p = MeanFieldParams(t_end=1.0)
    traj = simulate_nonlinear(np.zeros((2, 2)), 1.0, 0.0, p, stride=3)
    assert traj.times[0] == 0 and traj.times[-1] == pytest.approx(1.0)
    assert np.allclose(np.diff(traj.times)[:-1], 0.3)
    assert traj.states.shape == (len(traj.times), 2)


def test_non_finite_aborts():
    with pytest.raises(NumericalError):
        simulate_nonlinear(np.zeros((1, 1)), 0.0, np.array([np.nan]), MeanFieldParams())
    # an unstable linear run overflows
    p = MeanFieldParams(mu=1.0, gamma_slope=1.0, t_end=1e4, dt=1.0)
    with pytest.raises(NumericalError):
        simulate_reduced(np.array([[1e3]]), p, 1.0, homogeneous=True)


def test_affinity_matrix_scale_is_divided_out():
    W = np.array([[0.0, 0.4], [0.4, 0.0]])
    A = AffinityMatrix(2.5 * W, scale=2.5)
    p = MeanFieldParams(mu=0.5, t_end=5)
    a = simulate_nonlinear(A, 1.0, 0.0, p).states
    b = simulate_nonlinear(W, 1.0, 0.0, p).states
    assert np.allclose(a, b, atol=1e-15)


# -- linear regime ------------------------------------------------------------------------------


@pytest.mark.parametrize("factor", [0.5, 0.9, 1.1, 1.5])
def test_homogeneous_rates_along_top_eigenvector(factor):
    rng = np.random.default_rng(2)
    W = random_kernel(rng, 7)
    lam, v = full_spectrum(W).pair(0)
    p = MeanFieldParams(alpha=1.0, gamma_slope=1.3)
    mu = factor * p.alpha / (p.gamma_slope * lam)
    expect = -p.alpha + p.gamma_slope * mu * lam
    # one decade of change in |u|
    run = p.replace(mu=mu, t_end=2 * math.log(10) / abs(expect))
    traj = simulate_reduced(W, run, v, homogeneous=True)
    rate = growth_rate(traj, v)
    assert rate == pytest.approx(expect, rel=0.05)
    assert (rate < 0) == (factor < 1)


def test_stationary_examples():
    p = MeanFieldParams(alpha=2.0)
    s = stationary_state(np.zeros((3, 3)), p)
    assert np.allclose(s.values, 0.25)
    p = MeanFieldParams(alpha=1, gamma_slope=1, mu=1)
    W = np.array([[0.0, 0.25], [0.25, 0.0]])
    s = stationary_state(W, p)
    assert np.allclose(s.values, [2 / 3, 2 / 3], atol=1e-12)
    res = -p.alpha * s.values + p.gamma_slope * p.mu * W @ s.values + p.forcing
    assert np.max(np.abs(res)) < 1e-10
    assert s.in_linear_regime and s.violations == ()


def test_stationary_reports_violations_and_singularity():
    W = np.array([[0.0, 0.9], [0.9, 0.0]])
    s = stationary_state(W, MeanFieldParams(mu=1.0))
    assert not s.in_linear_regime and s.violations == (0, 1)
    with pytest.raises(np.linalg.LinAlgError, match="mu=2"):
        stationary_state(np.array([[0.0, 0.5], [0.5, 0.0]]), MeanFieldParams(mu=2.0))


def test_forced_reduced_converges_to_stationary():
    rng = np.random.default_rng(3)
    W = random_kernel(rng, 6)
    p = MeanFieldParams(forcing_form="paper_eqrem", gamma_slope=0.8, c=1.2)
    p = p.replace(mu=0.5 * stability_threshold(W, p).mu_star, t_end=60)
    traj = simulate_reduced(W, p, 0.0)
    assert np.max(np.abs(traj.final - stationary_state(W, p).values)) < 1e-6


# -- weak connectivity --------------------------------------------------------------------------


def test_weak_connectivity_examples():
    p = MeanFieldParams(alpha=1, gamma_slope=1, c=1, mu=1)
    W = np.array([[0.1, 0.2], [0.2, 0.1]])
    r = check_weak_connectivity(W, p)
    assert r.lhs == pytest.approx(0.3) and r.bound == 0.5 and r.passed
    assert r.slack == pytest.approx(0.2)
    assert check_weak_connectivity(W, p.replace(mu=0)).passed
    doubled = check_weak_connectivity(W, p.replace(mu=2))
    assert doubled.lhs == pytest.approx(2 * r.lhs)
    assert not check_weak_connectivity(W, p.replace(mu=1.7)).passed
    assert check_weak_connectivity(W, p.replace(mu=1.6)).passed
    assert r.to_dict()["pass"] is True


def test_weak_connectivity_negative_bound():
    p = MeanFieldParams(gamma_slope=1, c=0.3)
    assert weak_connectivity_bound(p) < 0
    r = check_weak_connectivity(np.zeros((2, 2)), p)
    assert not r.passed and "negative" in r.reason


def test_weak_connectivity_on_grid(reference_kernel):
    _, omega = reference_kernel
    p = MeanFieldParams()
    mu = mu_for_weak_connectivity(omega, p, fraction=0.5)
    r = check_weak_connectivity(omega, p.replace(mu=mu))
    assert r.passed and r.lhs == pytest.approx(0.5 * r.bound)


# -- stability ----------------------------------------------------------------------------------


def test_stability_examples():
    W = np.array([[0.0, 0.5], [0.5, 0.0]])
    p = MeanFieldParams(alpha=1, gamma_slope=1)
    r = stability_threshold(W, p)
    assert r.lambda_tilde_1 == pytest.approx(0.5) and r.mu_star == pytest.approx(2.0)
    assert r.stable and r.linear_eigenvalue == pytest.approx(-1.0)
    assert stability_threshold(3 * W, p).mu_star == pytest.approx(2.0 / 3)
    above = stability_threshold(W, p.replace(mu=2.5))
    assert not above.stable and above.linear_eigenvalue > 0
    with pytest.raises(ValueError):
        stability_threshold(np.zeros((2, 2)), p)


def test_stability_from_affinity_ignores_scale():
    W = np.array([[1.0, 0.5], [0.5, 1.0]])
    p = MeanFieldParams()
    assert (stability_threshold(AffinityMatrix(7 * W, scale=7.0), p).mu_star
            == pytest.approx(stability_threshold(W, p).mu_star))


# -- outside the stimulated domain --------------------------------------------------------------


def test_off_domain_sample_shape():
    stim = StimulusSet((P(0, 0, 0), P(5, 5, 1.0), P(-3, 2, 2.0)))
    pts = off_domain_sample(stim, n_ring=4)
    assert pts.shape == ((4 * 3 + 3) * 4, 3)
    assert np.all(pts[:, 0] >= -3) and np.all(pts[:, 0] <= 5)
    assert len(off_domain_sample(StimulusSet(()))) == 0


def test_outside_domain_both_branches(reference_kernel):
    _, omega = reference_kernel
    stim = fhh_scene(seed=0, n_total=25, n_contour=10, half_fov=15.0)
    p = MeanFieldParams(t_end=50.0)
    off = off_domain_sample(stim, n_ring=4, factor=2)
    from neurogeom.kernel import omega_matrix
    W = omega_matrix(omega, np.concatenate([stim.as_array(), off]))
    mu = mu_for_weak_connectivity(W, p, fraction=0.9)
    ok = outside_domain_stays_zero(omega, stim, p.replace(mu=mu), off_domain=off)
    assert ok.weak_connectivity.passed and ok.passed and ok.max_off_domain < 1e-9
    bad = outside_domain_stays_zero(omega, stim, p.replace(mu=100 * mu), off_domain=off)
    assert not bad.weak_connectivity.passed and bad.max_off_domain > 1e-3
    assert bad.max_abs_activity <= 1 / p.alpha + 1e-6


def test_outside_domain_vacuous():
    from neurogeom.kernel import KernelGrid
    grid = KernelGrid(np.ones((3, 3, 4)), (-1.5, 1.5), (-1.5, 1.5), symmetrized=True)
    stim = StimulusSet((P(0, 0, 0),))
    r = outside_domain_stays_zero(grid, stim, MeanFieldParams(), off_domain=np.zeros((0, 3)))
    assert r.passed and r.n_off_domain == 0


def test_growth_rate_undefined_for_vanishing_projection():
    from neurogeom.meanfield import Trajectory
    traj = Trajectory(np.arange(4.0), np.zeros((4, 2)))
    with pytest.raises(ValueError):
        growth_rate(traj, np.array([1.0, 0.0]))
