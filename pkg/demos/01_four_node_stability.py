"""
A four-unknown circuit with a singular C
========================================

Two of the four unknowns carry no capacitance, so the DAE has an algebraic
part.  On the capacitive block the matrix ``P_C G^{-1} C`` is
``[[5e-14, 5e-10], [-5e-10, 0]]``: its C-numerical range is a thin box
hugging the imaginary axis.  Shift-and-invert Arnoldi maps that box into
the disk D(1/2, 1/2) and a single step reproduces the exact solution.
"""

import numpy as np

from stiffkrylov import (c_arnoldi, decoupled_reference, factor_shifted, sample_c_numrange,
                         single_step)
from stiffkrylov.cases import four_node_example

system = four_node_example().replace(x0=np.array([0.0, 0.0, 1.0, -1.0]))

# Rayleigh quotients x*C G^{-1} C x / x*C x: real parts in [0, 5e-14],
# imaginary parts within +-5e-10.
Ginv = np.linalg.inv(system.G.toarray())
z = sample_c_numrange(Ginv, system.C, 100000, seed=0).points
print(f"Re range [{z.real.min():.3e}, {z.real.max():.3e}]")
print(f"Im range [{z.imag.min():.3e}, {z.imag.max():.3e}]")

# Hessenberg spectra for the C-orthogonal and the Euclidean Arnoldi variants.
P = system.projector
for h in (1e-12, 1e-10, 1e-8):
    op = factor_shifted(system, h / 2)
    for name, inner, project in (("structured", "C", True), ("plain", "euclidean", False)):
        K = c_arnoldi(op, P, system.x0, 4, inner=inner, project=project)
        dist = np.abs(np.linalg.eigvals(K.H) - 0.5).max()
        print(f"h = {h:.0e}  {name:10s}  max |lambda - 1/2| = {dist:.12f}")

# One step against the Schur-complement reference.
for h in (1e-10, 1e-9, 1e-8):
    res = single_step(system, h, 4)
    ref = decoupled_reference(system, h)
    err = np.linalg.norm(res.x_full - ref) / np.linalg.norm(ref)
    print(f"h = {h:.0e}  relative error {err:.2e}  pruned {res.pruned_count}")
