# Lifting an image to oriented elements.
#
# A bank of odd Gabor filters is applied at every orientation. Local maxima
# of the response over position and orientation above a threshold become
# cortical points (x, y, theta).
import numpy as np

from neurogeom import FilterBank, lift_image
from neurogeom import io as nio
from neurogeom.render import render_stimulus

from _common import outdir

out = outdir("lifting")

# %% A synthetic image: a bright disc and a tilted bar.
yy, xx = np.mgrid[0:96, 0:96].astype(float)
img = ((xx - 30) ** 2 + (yy - 34) ** 2 < 15 ** 2).astype(float)
u = (xx - 66) * np.cos(0.6) + (yy - 60) * np.sin(0.6)
w = -(xx - 66) * np.sin(0.6) + (yy - 60) * np.cos(0.6)
img[(np.abs(u) < 18) & (np.abs(w) < 3)] = 1.0
nio.write_pnm(out / "image.pgm", img)

bank = FilterBank.gabor(orientations=16)
for threshold in (0.5, 1.0, 1.5):
    stim = lift_image(img, bank, threshold)
    print(f"threshold {threshold}: {len(stim)} elements")

stim = lift_image(img, bank, 1.0)
print("first elements (x, y, theta):\n", np.round(stim.as_array()[:8], 2))
nio.write_pnm(out / "lifted.ppm", render_stimulus(stim, bar_length=3.0))
nio.write_stimulus(out / "lifted.json", stim)
