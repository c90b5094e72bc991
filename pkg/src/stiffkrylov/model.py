"""Linear DAE systems ``C x' + G x = u0 + u1 t`` and the range projector of C.

``C`` must be symmetric positive semi-definite (usually singular) and the
symmetric part of ``G`` positive semi-definite.  The range of ``C`` carries
the differential unknowns; its null space carries the algebraic ones.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ValidationError
from .linsolve import SparseLU

#: Eigenvalues of C below this fraction of lambda_max(C) are treated as zero.
ZERO_THRESHOLD_REL = 1e-12
#: Tolerated negative eigenvalue of C, relative to lambda_max(C).
PSD_TOL_REL = 1e-10
#: sym(G) counts as definite when lambda_min > this * lambda_max.
DEFINITE_TOL_REL = 1e-12
#: Largest dimension for which reduced (dense n x n) operators are formed.
ORACLE_MAX_N = 2000
_DENSE_EIG_MAX = 600


def _csr(A):
    return sp.csr_matrix(A, dtype=float)


def _vec(v, n, name):
    if v is None:
        return np.zeros(n)
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.shape != (n,):
        raise ValidationError(f"{name} has length {v.size}, expected {n}")
    return v


def _is_structurally_diagonal(A):
    A = sp.coo_matrix(A)
    off = A.row != A.col
    return not np.any(A.data[off] != 0.0)


def sym_eig_extremes(A):
    """(lambda_min, lambda_max) of a sparse symmetric matrix.

    Dense for small matrices; for large ones a shift-and-invert Lanczos run
    around a shift just below the spectrum (a few shifted inverse iterations
    in effect).
    """
    A = sp.csr_matrix(A)
    n = A.shape[0]
    if n == 0:
        return 0.0, 0.0
    if _is_structurally_diagonal(A):
        d = A.diagonal()
        return float(d.min()), float(d.max())
    if n <= _DENSE_EIG_MAX:
        w = scipy.linalg.eigvalsh(A.toarray())
        return float(w[0]), float(w[-1])
    lmax = float(spla.eigsh(A, k=1, which="LA", return_eigenvectors=False)[0])
    shift = -1e-6 * max(abs(lmax), 1e-300)
    lmin = float(spla.eigsh(A, k=1, sigma=shift, which="LM", return_eigenvectors=False)[0])
    return lmin, lmax


@dataclass(frozen=True, eq=False)
class DaeSystem:
    """``C x' + G x = u0 + u1 t`` with ``x(0) = x0``."""

    C: sp.csr_matrix
    G: sp.csr_matrix
    u0: np.ndarray = None
    u1: np.ndarray = None
    x0: np.ndarray = None

    def __post_init__(self):
        C = _csr(self.C)
        G = _csr(self.G)
        if C.shape[0] != C.shape[1] or G.shape[0] != G.shape[1]:
            raise ValidationError(f"C {C.shape} and G {G.shape} must be square")
        if C.shape != G.shape:
            raise ValidationError(f"dimension mismatch: C is {C.shape}, G is {G.shape}")
        n = C.shape[0]
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "u0", _vec(self.u0, n, "u0"))
        object.__setattr__(self, "u1", _vec(self.u1, n, "u1"))
        object.__setattr__(self, "x0", _vec(self.x0, n, "x0"))

    @property
    def N(self):
        return self.C.shape[0]

    def u(self, t):
        return self.u0 + t * self.u1

    def replace(self, **changes):
        kw = dict(C=self.C, G=self.G, u0=self.u0, u1=self.u1, x0=self.x0)
        kw.update(changes)
        return DaeSystem(**kw)

    @cached_property
    def g_lu(self):
        """Factorization of G, shared by every caller that needs G^{-1}."""
        return SparseLU(self.G, name="G")

    @cached_property
    def g_sym_extremes(self):
        return sym_eig_extremes((self.G + self.G.T) * 0.5)

    @property
    def g_definite(self):
        lmin, lmax = self.g_sym_extremes
        return lmin > DEFINITE_TOL_REL * max(abs(lmax), 1e-300)

    @cached_property
    def projector(self):
        return range_projector(self.C)


@dataclass
class ValidationReport:
    N: int
    rank: int
    c_symmetry_defect: float
    c_min_eig: float
    c_max_eig: float
    g_sym_min_eig: float
    g_sym_max_eig: float
    g_definite: bool
    range_residual: float
    range_ok: bool
    warnings: list = field(default_factory=list)

    @property
    def c_symmetric(self):
        return self.c_symmetry_defect <= 1e-14

    @property
    def ok(self):
        return self.c_symmetric

    def as_dict(self):
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["c_symmetric"] = self.c_symmetric
        d["ok"] = self.ok
        return d

    def summary(self):
        lines = [
            f"N = {self.N}, rank(C) = {self.rank}",
            f"C symmetry defect (relative max) = {self.c_symmetry_defect:.3e}"
            + ("" if self.c_symmetric else "  <-- C is not symmetric"),
            f"C eigenvalues in [{self.c_min_eig:.6e}, {self.c_max_eig:.6e}]",
            f"sym(G) eigenvalues in [{self.g_sym_min_eig:.6e}, {self.g_sym_max_eig:.6e}]",
            "G positive definite" if self.g_definite
            else "G positive semi-definite (not definite)",
            f"range condition residual = {self.range_residual:.3e}"
            + (" (consistent)" if self.range_ok else " (x0 inconsistent with u(0))"),
        ]
        lines += [f"warning: {w}" for w in self.warnings]
        return "\n".join(lines)


def validate(system):
    """Check the structural assumptions on (C, G, x0, u0).

    A C with an eigenvalue below ``-PSD_TOL_REL * lambda_max(C)`` raises
    ValidationError.  Asymmetry of C is reported through ``report.ok`` so
    callers can name the defect; an indefinite sym(G) or singular G becomes a
    warning.
    """
    C, G = system.C, system.G
    cmax_abs = abs(C).max() if C.nnz else 0.0
    asym = abs(C - C.T).max() if C.nnz else 0.0
    defect = float(asym / cmax_abs) if cmax_abs > 0 else 0.0

    cmin, cmax = sym_eig_extremes((C + C.T) * 0.5)
    if cmin < -PSD_TOL_REL * max(cmax, 0.0):
        raise ValidationError(
            f"C is not positive semi-definite: lambda_min = {cmin:.3e}, lambda_max = {cmax:.3e}"
        )
    gmin, gmax = system.g_sym_extremes

    warnings = []
    if gmin < -1e-10 * max(abs(gmax), 1e-300):
        warnings.append(f"symmetric part of G is indefinite: lambda_min = {gmin:.3e}")
    if defect <= 1e-14:
        P = system.projector
        rank = P.n
        r = G @ system.x0 - system.u0
        resid = float(np.linalg.norm(r - P.apply(r)))
        scale = np.linalg.norm(G @ system.x0) + np.linalg.norm(system.u0)
        range_ok = resid <= 1e-9 * scale or resid == 0.0
    else:
        rank = -1
        resid = float("nan")
        range_ok = False
        warnings.append("C is not symmetric; projector not formed")
    if rank == 0:
        warnings.append("C = 0: purely algebraic system")
    try:
        system.g_lu
    except Exception as exc:  # noqa: BLE001 - reported, not fatal here
        warnings.append(f"G is not invertible: {exc}")
    return ValidationReport(
        N=system.N, rank=rank, c_symmetry_defect=defect, c_min_eig=cmin,
        c_max_eig=cmax, g_sym_min_eig=gmin, g_sym_max_eig=gmax,
        g_definite=system.g_definite, range_residual=resid, range_ok=range_ok,
        warnings=warnings,
    )


@dataclass(frozen=True, eq=False)
class RangeProjector:
    """Orthonormal eigenbasis ``V_C`` of the range of C, with ``C V_C = V_C diag(C1)``.

    On the diagonal fast path ``index`` lists the retained coordinates and no
    dense basis is stored.
    """

    N: int
    C1: np.ndarray
    zero_threshold: float
    diagonal_fast_path: bool
    index: np.ndarray = None
    basis: np.ndarray = None

    @property
    def n(self):
        return self.C1.size

    @property
    def V_C(self):
        if self.basis is not None:
            return self.basis
        V = np.zeros((self.N, self.n))
        V[self.index, np.arange(self.n)] = 1.0
        return V

    @property
    def null_basis(self):
        """Orthonormal basis of the null space of C (the complement of V_C)."""
        if self.diagonal_fast_path:
            rest = np.setdiff1d(np.arange(self.N), self.index)
            V = np.zeros((self.N, rest.size))
            V[rest, np.arange(rest.size)] = 1.0
            return V
        return scipy.linalg.null_space(self.V_C.T) if self.n else np.eye(self.N)

    def to_range(self, v):
        """``V_C^T v``."""
        if self.diagonal_fast_path:
            return np.asarray(v)[self.index]
        return self.basis.T @ v

    def from_range(self, y):
        """``V_C y``."""
        if self.diagonal_fast_path:
            y = np.asarray(y)
            out = np.zeros((self.N,) + y.shape[1:], dtype=y.dtype)
            out[self.index] = y
            return out
        return self.basis @ y

    def apply(self, v):
        return self.from_range(self.to_range(v))

    __call__ = apply


def range_projector(C, zero_threshold_rel=ZERO_THRESHOLD_REL):
    """Eigen-decompose the symmetric PSD matrix C and keep the nonzero part."""
    C = sp.csr_matrix(C, dtype=float)
    N = C.shape[0]
    if _is_structurally_diagonal(C):
        d = C.diagonal()
        lmax = d.max() if N else 0.0
        if N and d.min() < -PSD_TOL_REL * max(lmax, 0.0):
            raise ValidationError(f"C has a negative diagonal entry {d.min():.3e}")
        thr = zero_threshold_rel * lmax if lmax > 0 else 0.0
        keep = np.flatnonzero(d > thr) if lmax > 0 else np.zeros(0, int)
        return RangeProjector(N=N, C1=d[keep].copy(), zero_threshold=thr,
                              diagonal_fast_path=True, index=keep)
    Cd = C.toarray()
    w, V = scipy.linalg.eigh((Cd + Cd.T) * 0.5)
    lmax = w[-1] if N else 0.0
    if N and w[0] < -PSD_TOL_REL * max(lmax, 0.0):
        raise ValidationError(f"C has a negative eigenvalue {w[0]:.3e}")
    thr = zero_threshold_rel * lmax if lmax > 0 else 0.0
    keep = w > thr if lmax > 0 else np.zeros(N, bool)
    return RangeProjector(N=N, C1=w[keep].copy(), zero_threshold=thr,
                          diagonal_fast_path=False, basis=V[:, keep].copy())


def apply_projector(P, v):
    """``P_C v = V_C V_C^T v``."""
    v = np.asarray(v)
    if v.shape[0] != P.N:
        raise ValueError(f"vector length {v.shape[0]} does not match N = {P.N}")
    return P.apply(v)


def c_norm(C, v):
    """``sqrt(Re(v^* C v))``, clipped at zero against rounding."""
    v = np.asarray(v)
    q = np.real(np.vdot(v, C @ v))
    return float(np.sqrt(max(q, 0.0)))


@dataclass(frozen=True, eq=False)
class ReducedOperators:
    """Dense range-space operators ``B11 = V_C^T G^{-1} C V_C`` and
    ``S11 = V_C^T (C + gamma G)^{-1} C V_C``.  Diagnostic/oracle use only."""

    B11: np.ndarray
    S11: np.ndarray
    gamma: float
    C1: np.ndarray
    projector: object = None

    def mobius_defect(self):
        """``||S11 (I + gamma B11^{-1}) - I||``; zero when S11 = g(B11)."""
        n = self.B11.shape[0]
        Binv = np.linalg.inv(self.B11)
        return float(np.linalg.norm(self.S11 @ (np.eye(n) + self.gamma * Binv) - np.eye(n), 2))


def reduced_operators(system, P=None, gamma=1.0):
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    P = system.projector if P is None else P
    if P.n > ORACLE_MAX_N:
        raise ValueError(f"range dimension {P.n} exceeds the oracle limit {ORACLE_MAX_N}")
    CV = P.V_C * P.C1  # C V_C = V_C diag(C1)
    B11 = P.to_range(system.g_lu.solve(CV))
    shifted = SparseLU(system.C + gamma * system.G, name="C + gamma*G")
    S11 = P.to_range(shifted.solve(CV))
    return ReducedOperators(B11=np.atleast_2d(B11), S11=np.atleast_2d(S11),
                            gamma=float(gamma), C1=P.C1, projector=P)
