"""
Happy breakdown and the residual-based bound
============================================

When the initial data lie in a small invariant subspace, the Arnoldi
process stops early and the approximation is exact.  Before breakdown the
residual is a scalar multiple of a fixed vector, which yields a computable
bound on the error of the exponential term.
"""

import numpy as np
import scipy.linalg

from stiffkrylov import (assemble_xr, build_bases, c_arnoldi, exact_projected, factor_shifted,
                         posterior_bound, reduced_operators)
from stiffkrylov.cases import invariant_block_dae, random_dae
from stiffkrylov.model import c_norm

system = invariant_block_dae(40, 3, seed=1)
bases = build_bases(system, 0.25, 30, mode="per_term")
print("Krylov dimensions per term:", [K.m for K in bases.decompositions()],
      " breakdown:", bases.breakdown)
for t in (0.01, 1.0, 10.0):
    ref = exact_projected(system, t)
    err = c_norm(system.C, assemble_xr(bases, system, t) - ref)
    print(f"t = {t:5}: C-norm error {err:.1e}")

system = random_dae(20, 10, seed=2).replace(u0=np.zeros(20), u1=np.zeros(20))
gamma = 0.5
ops = reduced_operators(system, gamma=gamma)
x0 = system.projector.apply(system.x0)
print("\n m     t     error       bound   omega choice")
for m in (2, 4, 6):
    K = c_arnoldi(factor_shifted(system, gamma), system.projector, x0, m)
    c = K.coefficients(x0)
    M = (np.linalg.inv(K.H) - np.eye(K.m)) / gamma
    for t in (0.1, 1.0, 10.0):
        err = c_norm(system.C, K.W @ scipy.linalg.expm(-t * M) @ c - exact_projected(system, t))
        est = posterior_bound(K, ops, t)
        print(f"{m:2d} {t:5}  {err:.3e}  {est.posterior_bound:.3e}  {est.omega_choice}")
