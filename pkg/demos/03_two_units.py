# Two planted units: an arc and a straight segment.
#
# After the first unit is found its elements are removed and the dominant
# eigenvector of what remains gives the next one. Extraction stops when the
# remaining top eigenvalue drops below half of the first.
import numpy as np

from neurogeom import FPParams, GridSpec, build_affinity, estimate_omega, extract_units, two_unit_scene
from neurogeom import io as nio
from neurogeom.render import render_stimulus

from _common import outdir

out = outdir("two_units")
p = FPParams(sigma_diff=0.08, step_ds=1.0, n_steps=100, n_paths=3000, seed=1)
_, omega = estimate_omega(p, GridSpec.default_for(p))

stim = two_unit_scene(seed=0)
labels = stim.label_array()
print("elements per label:", {int(k): int(np.sum(labels == k)) for k in np.unique(labels)})

A = build_affinity(stim, omega)
units = extract_units(A, eigen_stop=0.5)
for k, u in enumerate(units):
    got = labels[list(u.member_indices)]
    print(f"unit {k}: eigenvalue {u.eigenvalue:.3f}, labels {np.bincount(got, minlength=3)[1:]}")
    nio.write_pnm(out / f"unit{k}.ppm", render_stimulus(stim, highlight=u.member_indices))

# %% Without the stop rule extraction keeps going into the background.
more = extract_units(A, eigen_stop=0.0, max_units=6)
print("eigenvalues without the stop rule:", [round(u.eigenvalue, 3) for u in more])
