"""
Covering disks, prior bounds and the E(gamma) landscape
=======================================================

For ``B = G^{-1} C`` five eigenvalue bounds give a box around the
C-numerical range, a real-centred disk around the box, and through the
g-map a disk inside D(1/2, 1/2).  The ratio of that disk's radius to its
centre is the geometric rate of the a-priori error bound.
"""

import numpy as np

from stiffkrylov import (assemble_xr, build_bases, covering_disk_from_box, exact_projected,
                         mapped_disk, prior_bound_thm4, spectral_box)
from stiffkrylov.bounds import e_gamma_curve, radius_ratio, slope_diagnostics
from stiffkrylov.cases import random_dae
from stiffkrylov.model import c_norm

system = random_dae(15, 8, seed=3)
box = spectral_box(system)
disk = covering_disk_from_box(box)
print(f"box Re [{box.re_lo:.3f}, {box.re_hi:.3f}], |Im| <= {box.im_hi:.3f}")
print(f"covering disk centre {disk.center:.3f}, radius {disk.radius:.3f}")

t = 1.0
gamma = t / 2
dS = mapped_disk(disk, gamma)
P = system.projector
norms = [c_norm(system.C, P.apply(v))
         for v in (system.x0, system.g_lu.solve(system.u0), system.g_lu.solve(system.u1))]
ref = exact_projected(system, t)
print(f"\nmapped disk centre {dS.center:.3f}, radius {dS.radius:.3f}")
print(" m   measured      prior bound")
for m in range(2, 9):
    x = assemble_xr(build_bases(system, gamma, m, mode="per_term"), system, t)
    print(f"{m:2d}   {c_norm(system.C, x - ref):.3e}    {prior_bound_thm4(dS, None, t, gamma, m, norms):.3e}")

mu1, mu2, m = 1e-4, 1.0, 20
gammas = np.logspace(-6, 3, 10)
print(f"\nradius ratio at gamma = {gammas}:\n{radius_ratio(mu1, mu2, gammas)}")
for k, delta in ((0, 1000.0), (2, 2.0)):
    curve = e_gamma_curve(mu1, mu2, delta, m, np.logspace(-6, 3, 200), k)
    rep = slope_diagnostics(curve, mu1, mu2, m, delta, k)
    if k == 0:
        print(f"k = 0: cap shape {rep['cap_shape']}, epsilon {rep['epsilon']:.1f}, "
              f"decay beyond mu2 {rep['decay_detected']}")
    else:
        print(f"k = {k}: min d log E / d log gamma = {rep['min_slope']:.3f}")
