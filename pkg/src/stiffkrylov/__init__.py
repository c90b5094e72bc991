"""Shift-and-invert Krylov integration of linear DAEs ``C x' + G x = u(t)``
with C-orthogonal Arnoldi bases."""

from .arnoldi import (KrylovDecomposition, ResidualEstimate, ShiftedOperator, c_arnoldi,
                      factor_shifted, posterior_bound, residual_beta)
from .bounds import (DiskBound, SpectralBox, covering_disk_from_box, e_gamma_curve,
                     mapped_disk, prior_bound_thm4, sample_c_numrange, spectral_box)
from .dense import eig_dense, expm_dense, phi_dense, phi_scalar
from .errors import (NetlistError, NumericalError, SingularMatrixError, StiffKrylovError,
                     ValidationError)
from .evolve import (PruningPolicy, StepResult, assemble_xr, build_bases, complete_solution,
                     derivative_xr, g_inverse, g_map, ramp_response, single_step)
from .model import (DaeSystem, RangeProjector, ReducedOperators, apply_projector, c_norm,
                    range_projector, reduced_operators, validate)
from .netlist import gen_rlc_mesh, parse_netlist, serialize_netlist, stamp_mna
from .oracle import decoupled_reference, exact_algebraic, exact_projected, fine_step_reference

__version__ = "0.1.0"

__all__ = [
    "DaeSystem", "RangeProjector", "ReducedOperators", "validate", "range_projector",
    "apply_projector", "reduced_operators", "c_norm",
    "expm_dense", "phi_dense", "phi_scalar", "eig_dense",
    "ShiftedOperator", "KrylovDecomposition", "ResidualEstimate", "factor_shifted",
    "c_arnoldi", "residual_beta", "posterior_bound",
    "PruningPolicy", "StepResult", "g_map", "g_inverse", "build_bases", "assemble_xr",
    "derivative_xr", "complete_solution", "single_step", "ramp_response",
    "exact_projected", "exact_algebraic", "decoupled_reference", "fine_step_reference",
    "DiskBound", "SpectralBox", "spectral_box", "sample_c_numrange", "covering_disk_from_box",
    "mapped_disk", "prior_bound_thm4", "e_gamma_curve",
    "parse_netlist", "serialize_netlist", "stamp_mna", "gen_rlc_mesh",
    "StiffKrylovError", "ValidationError", "NumericalError", "SingularMatrixError",
    "NetlistError",
]
