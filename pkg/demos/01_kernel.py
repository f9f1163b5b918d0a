# Estimating the connectivity kernel by Monte Carlo.
#
# Paths of the stochastic process on SE(2) move forward along their current
# heading while the heading diffuses. Counting where they spend time gives the
# transition density Gamma; smoothing and symmetrizing it gives the kernel
# omega used everywhere else.
import time

import numpy as np

from neurogeom import FPParams, GridSpec, estimate_omega, sample_paths
from neurogeom import io as nio
from neurogeom.kernel import anisotropy_ratio, center_of_mass, summary
from neurogeom.render import render_kernel_projection

from _common import outdir

out = outdir("kernel")

# %% A handful of paths first, to see what is being counted.
p = FPParams(sigma_diff=0.08, step_ds=1.0, n_steps=100, n_paths=3000, seed=1)
paths = sample_paths(p, 0, 5)
print("path array shape (paths, steps + 1, [x, y, theta]):", paths.shape)
print("end points:\n", np.round(paths[:, -1], 2))

# %% The full estimate.
t0 = time.perf_counter()
gamma, omega = estimate_omega(p, GridSpec.default_for(p))
print(f"estimated in {time.perf_counter() - t0:.1f} s on a grid of shape {gamma.shape}")

mx, my = center_of_mass(gamma)
print(f"centre of mass ({mx:.2f}, {my:.3f}): the mass sits ahead of the origin, on the x axis")
print("anisotropy at 20% radius:", anisotropy_ratio(gamma, 0.2))
for k, v in summary(gamma, omega).items():
    print(f"  {k}: {v}")

# %% The (x, y) projection is the familiar elongated blob.
nio.write_pnm(out / "gamma_xy.pgm", render_kernel_projection(gamma))
nio.write_grid(out / "omega.se2k", omega)
print("wrote", sorted(f.name for f in out.iterdir()))

# %% Omega is symmetric in its two arguments and peaks on collinear pairs.
from neurogeom import eval_omega, CorticalPoint

origin = CorticalPoint.make(0, 0, 0)
for label, q in [("collinear", (10, 0, 0)), ("parallel", (0, 10, 0)),
                 ("orthogonal", (10, 0, np.pi / 2))]:
    b = CorticalPoint.make(*q)
    print(f"{label:>10}: omega(a, b) = {eval_omega(omega, origin, b):.4f}"
          f"   omega(b, a) = {eval_omega(omega, b, origin):.4f}")
