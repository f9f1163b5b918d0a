# Mean-field dynamics on the stimulated domain.
#
# Below the critical coupling mu* the homogeneous state is stable and
# perturbations decay at rate alpha - mu gamma lambda1. Above it the
# perturbation along the top eigenvector grows, which is the grouping event.
import numpy as np

from neurogeom import (FPParams, GridSpec, MeanFieldParams, build_affinity, estimate_omega, fhh_scene,
                       simulate_nonlinear, simulate_reduced, stability_threshold, stationary_state)
from neurogeom import io as nio
from neurogeom.meanfield import growth_rate, kernel_matrix, mu_for_weak_connectivity
from neurogeom.spectral import full_spectrum

from _common import outdir

out = outdir("mean_field")
p = FPParams(sigma_diff=0.08, step_ds=1.0, n_steps=100, n_paths=3000, seed=1)
_, omega = estimate_omega(p, GridSpec.default_for(p))
stim = fhh_scene(seed=0, n_total=60)
W = kernel_matrix(build_affinity(stim, omega))

# %% The threshold.
base = MeanFieldParams(alpha=1.0, gamma_slope=1.0, c=1.0)
stab = stability_threshold(W, base)
print(f"lambda1 = {stab.lambda_tilde_1:.4f}, mu* = {stab.mu_star:.4f}")
_, v = full_spectrum(W).pair(0)

# %% Growth rate of the top mode against mu.
for f in (0.5, 0.9, 1.1, 1.5):
    q = base.replace(mu=f * stab.mu_star, t_end=20.0)
    rate = growth_rate(simulate_reduced(W, q, v, homogeneous=True), v)
    expect = -q.alpha + q.mu * q.gamma_slope * stab.lambda_tilde_1
    print(f"mu = {f:.1f} mu*: measured rate {rate:+.4f}, predicted {expect:+.4f}")

# %% Weakly connected regime: the reduced run settles on the stationary solve.
mu = mu_for_weak_connectivity(W, base, fraction=0.5)
q = base.replace(mu=mu, t_end=50.0)
st = stationary_state(W, q)
traj = simulate_reduced(W, q, 0.0)
print(f"mu = {mu:.4g}: max |a(T) - a_stat| = {np.max(np.abs(traj.final - st.values)):.2e}, "
      f"linear regime {st.in_linear_regime}")

# %% The nonlinear equation never leaves |a| <= 1/alpha.
q = base.replace(mu=3 * stab.mu_star, t_end=30.0)
traj = simulate_nonlinear(W, stim.input_level_c, np.zeros(len(W)), q, stride=10)
print(f"strong coupling: max |a| = {traj.max_abs():.4f}, bound 1/alpha = {1 / q.alpha}")
nio.write_trajectory(out / "trajectory.csv", traj.times, traj.states)
print("wrote", out / "trajectory.csv")
