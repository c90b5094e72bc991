"""
Error grids on a generated RLC mesh
===================================

The ``paper_like`` mesh has 260 resistors, 160 capacitors and 160 inductors
(507 unknowns).  From zero state, a ramp load response at ``t = h`` can be
computed through phi0, phi1 or phi2.  Below the spectral time scale of the
mesh the phi0 error stagnates as h and gamma = h/2 shrink, while the phi2
error keeps falling.
"""

import numpy as np

from stiffkrylov.netlist import gen_rlc_mesh, stamp_mna
from stiffkrylov.sweep import SweepConfig, error_slope, error_table, run_sweep, spectral_scale

system = stamp_mna(gen_rlc_mesh(preset="paper_like", seed=0)).system
scale = spectral_scale(system)
print(f"N = {system.N}, median |eig(B11)| = {scale:.2e}")

hs = [float(h) for h in np.logspace(-16, -9, 8)]
ms = [4, 8, 16, 32]
for route in ("phi0", "phi2"):
    cfg = SweepConfig(hs, ms, phi=route, variants=("plain", "structured_pruned"))
    records = run_sweep(system, cfg, jobs=4)
    print(f"\n{route}: abs error, rows h, columns m = {ms}")
    for variant in cfg.variants:
        hgrid, _, E = error_table(records, variant)
        print(f"  {variant}")
        for h, row in zip(hgrid, E):
            print(f"    {h:.0e}  " + "  ".join(f"{e:9.2e}" for e in row))
    slope = error_slope(records, "structured_pruned", 32, scale)
    print(f"  slope of log error vs log h below the scale (m = 32): {slope:.2f}")
