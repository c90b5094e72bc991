"""Error grids over step size h and Krylov dimension m.

For a zero initial state and a pure ramp source the range response at
``t = h`` can be computed through any one of the phi0, phi1 or phi2
functions (see :func:`stiffkrylov.evolve.ramp_response`).  A sweep runs one
route over an ``(h, m, variant)`` grid and records the absolute error
against the dense reference, or the residual-based bound when the system is
too large for the reference.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .arnoldi import factor_shifted, posterior_bound
from .evolve import ROUTES, ramp_response, variant_settings
from .model import ORACLE_MAX_N
from .oracle import exact_projected, reduced_B11

log = logging.getLogger(__name__)

DEFAULT_VARIANTS = ("plain", "plain_pruned", "structured_pruned")


@dataclass
class SweepConfig:
    """Grid and method choices for :func:`run_sweep`.

    ``gamma`` is ``"half_h"`` (``gamma = h/2`` per point) or a positive
    number used for every point.
    """

    h_grid: list
    m_grid: list
    gamma: object = "half_h"
    phi: str = "phi2"
    variants: tuple = DEFAULT_VARIANTS
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.h_grid = [float(h) for h in self.h_grid]
        self.m_grid = [int(m) for m in self.m_grid]
        if not self.h_grid or not self.m_grid:
            raise ValueError("h and m grids must be nonempty")
        if any(not h > 0 for h in self.h_grid):
            raise ValueError("step sizes must be positive")
        if any(m < 1 for m in self.m_grid):
            raise ValueError("Krylov dimensions must be at least 1")
        if self.phi not in ROUTES:
            raise ValueError(f"phi must be one of {ROUTES}, got {self.phi!r}")
        self.variants = tuple(v.replace("-", "_") for v in self.variants)
        for v in self.variants:
            variant_settings(v)
        if self.gamma != "half_h" and not float(self.gamma) > 0:
            raise ValueError("gamma must be 'half_h' or positive")

    def gamma_for(self, h):
        return h / 2 if self.gamma == "half_h" else float(self.gamma)


def ramp_system(system):
    """Same matrices and ramp slope with zero initial state and zero offset."""
    return system.replace(x0=np.zeros(system.N), u0=np.zeros(system.N))


def run_sweep(system, config, jobs=1):
    """Records ``{h, m, variant, abs_error[, bound]}`` sorted by h, then m.

    The dense reference is used when ``N <= ORACLE_MAX_N``; otherwise
    ``abs_error`` is NaN and ``bound`` holds the residual-based estimate.
    Factorizations are shared read-only between workers.
    """
    sys0 = ramp_system(system)
    _ = (sys0.g_lu, sys0.projector)  # factor once, before any worker starts
    use_oracle = sys0.N <= ORACLE_MAX_N
    gammas = sorted({config.gamma_for(h) for h in config.h_grid})
    with ThreadPoolExecutor(max_workers=max(1, int(jobs))) as pool:
        ops = dict(zip(gammas, pool.map(lambda g: factor_shifted(sys0, g), gammas)))
        exact = {}
        if use_oracle:
            exact = dict(zip(config.h_grid, pool.map(lambda h: exact_projected(sys0, h), config.h_grid)))
        tasks = [(h, m, v) for h in sorted(config.h_grid) for m in sorted(config.m_grid)
                 for v in config.variants]

        def point(task):
            h, m, v = task
            rec = {"h": h, "m": m, "variant": v}
            with np.errstate(all="ignore"):
                try:
                    x, _, K = ramp_response(sys0, h, m, config.phi, gamma=config.gamma_for(h),
                                            variant=v, op=ops[config.gamma_for(h)],
                                            return_info=True)
                except (ArithmeticError, np.linalg.LinAlgError, ValueError) as exc:
                    log.info("h=%g m=%d %s failed: %s", h, m, v, exc)
                    x, K = np.full(sys0.N, np.nan), None
            if use_oracle:
                rec["abs_error"] = float(np.linalg.norm(x - exact[h]))
            else:
                rec["abs_error"] = float("nan")
                rec["bound"] = _surrogate_bound(sys0, K, h, config.phi)
            return rec

        records = list(pool.map(point, tasks))
    return records


def _surrogate_bound(system, K, h, route):
    if K is None or K.inner != "C":
        return float("nan")
    est = posterior_bound(K, None, h, system=system, P=system.projector)
    scale = {"phi0": 1.0, "phi1": h, "phi2": h * h}[route]
    return float(scale * est.posterior_bound)


def spectral_scale(system):
    """Median modulus of the eigenvalues of ``B11`` (a time scale)."""
    ev = np.linalg.eigvals(reduced_B11(system))
    return float(np.median(np.abs(ev)))


def error_table(records, variant):
    """``(hs, ms, E)`` with ``E[i, j]`` the error at ``hs[i]``, ``ms[j]``."""
    rec = [r for r in records if r["variant"] == variant]
    hs = sorted({r["h"] for r in rec})
    ms = sorted({r["m"] for r in rec})
    E = np.full((len(hs), len(ms)), np.nan)
    for r in rec:
        E[hs.index(r["h"]), ms.index(r["m"])] = r["abs_error"]
    return np.array(hs), np.array(ms), E


def error_slope(records, variant, m, h_max):
    """Least-squares slope of ``log err`` against ``log h`` for ``h <= h_max``.

    With ``gamma = h/2`` this equals the slope in ``log gamma``.  Returns NaN
    when fewer than two usable points exist.
    """
    hs, ms, E = error_table(records, variant)
    j = int(np.flatnonzero(ms == m)[0])
    sel = (hs <= h_max) & np.isfinite(E[:, j]) & (E[:, j] > 0)
    if sel.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log10(hs[sel]), np.log10(E[sel, j]), 1)[0])


__all__ = ["SweepConfig", "run_sweep", "ramp_system", "spectral_scale", "error_table",
           "error_slope", "DEFAULT_VARIANTS"]
