"""Transient solutions assembled from Krylov decompositions.

Every scalar map here is written in terms of ``s(lam) = (1/lam - 1)/gamma``,
the reciprocal of ``g_1(lam)``.  An eigenvalue ``lam`` of H approximates
``g(mu)`` for an eigenvalue ``mu`` of ``B11 = V_C^T G^{-1} C V_C``, so
``s(lam)`` approximates ``1/mu``, an eigenvalue of ``B11^{-1}``.

The range part of the solution of ``C x' + G x = u0 + u1 t`` is

    x_R(t) = V_C [exp(-tM) a + t M phi_1(-tM) b + t^2 M phi_2(-tM) c],

with ``M = B11^{-1}``, ``a = V_C^T x0``, ``b = V_C^T G^{-1} u0`` and
``c = V_C^T G^{-1} u1``.  The same expression collapses to a single
exponential,

    x_R(t) = b + t c - L c + exp(-tM) (a - b + L c),    L = B11,

which needs only one Krylov basis (``combined`` mode).
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .arnoldi import c_arnoldi, factor_shifted, posterior_bound
from .dense import eig_dense, phi_action, phi_scalar
from .errors import NumericalError
from .model import ORACLE_MAX_N, c_norm, reduced_operators

log = logging.getLogger(__name__)

# Eigenvector matrices worse conditioned than this trigger the dense fallback.
EIGVEC_COND_MAX = 1e12


class InfiniteMuError(NumericalError):
    """``g_inverse`` evaluated at lambda = 1, where mu is infinite."""


def g_map(mu, gamma):
    """``g(mu) = (1 + gamma/mu)^{-1}``; maps Re(mu) > 0 into D(1/2, 1/2).

    ``g(0) = 0`` and ``g(inf) = 1`` are returned as limits.
    """
    mu = np.asarray(mu)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = mu / (mu + gamma)
    out = np.where(mu == 0, 0.0, out)
    out = np.where(np.isinf(mu), 1.0, out)
    return out[()] if out.ndim == 0 else out


def g_inverse(lam, gamma):
    """``g_1(lam) = ((1/lam - 1)/gamma)^{-1} = gamma lam / (1 - lam)``."""
    lam = np.asarray(lam)
    if np.any(lam == 1):
        raise InfiniteMuError("g_inverse(1) is infinite (mu = inf)")
    out = gamma * lam / (1.0 - lam)
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class GammaMap:
    gamma: float

    def __call__(self, mu):
        return g_map(mu, self.gamma)

    def inverse(self, lam):
        return g_inverse(lam, self.gamma)

    def rate(self, lam):
        """``s(lam) = 1/g_1(lam) = (1/lam - 1)/gamma``."""
        lam = np.asarray(lam)
        return (1.0 / lam - 1.0) / self.gamma


@dataclass(frozen=True)
class PruningPolicy:
    """Which eigenvalues of H are treated as rounding artifacts.

    In ``prune`` mode an eigenvalue is discarded when it lies outside the
    disk D(1/2, 1/2 + disk_margin) or when ``|lam| < floor``; discarded modes
    contribute nothing.  ``none`` keeps everything.
    """

    mode: str = "prune"
    disk_margin: float = 1e-8
    floor: float = 1e-14

    def __post_init__(self):
        if self.mode not in ("none", "prune"):
            raise ValueError(f"pruning mode must be 'none' or 'prune', got {self.mode!r}")

    @classmethod
    def none(cls):
        return cls(mode="none")

    def keep_mask(self, lam):
        lam = np.asarray(lam)
        if self.mode == "none":
            return lam != 0
        return (np.abs(lam - 0.5) <= 0.5 + self.disk_margin) & (np.abs(lam) >= self.floor)


@dataclass(frozen=True)
class Kernel:
    """Scalar map ``lam -> a + b * s^p * phi_k(-t s)`` with ``s = s(lam)``."""

    k: int = 0
    p: int = 0
    a: float = 0.0
    b: float = 1.0

    def scalar(self, s, t):
        return self.a + self.b * s ** self.p * phi_scalar(-t * s, self.k)

    def dense(self, M, t, v):
        y = phi_action(-t * M, self.k, v)
        if self.p:
            y = np.linalg.matrix_power(M, self.p) @ y
        return self.a * v + self.b * y


@dataclass
class FunctionInfo:
    pruned: list = field(default_factory=list)
    fallback: bool = False
    eigvec_cond: float = 1.0

    @property
    def pruned_count(self):
        return len(self.pruned)

    def pruned_distances(self):
        """Distances of the pruned eigenvalues outside D(1/2, 1/2) (negative = inside)."""
        return [abs(z - 0.5) - 0.5 for z in self.pruned]


def hessenberg_function(H, gamma, t, kernel, coeff, policy=PruningPolicy()):
    """``F(H) coeff`` for the scalar map given by ``kernel``.

    Returns the vector and a :class:`FunctionInfo`.  When the eigenvector
    matrix of H is too ill-conditioned the result is computed from the
    dense matrix ``M = (H^{-1} - I)/gamma`` instead, without pruning.
    """
    H = np.atleast_2d(np.asarray(H, dtype=float))
    coeff = np.asarray(coeff, dtype=float)
    m = H.shape[0]
    info = FunctionInfo()
    lam, X = eig_dense(H)
    info.eigvec_cond = float(np.linalg.cond(X))
    if info.eigvec_cond > EIGVEC_COND_MAX:
        info.fallback = True
        log.debug("eigenvector condition %.2e: dense fallback", info.eigvec_cond)
        try:
            Hinv = np.linalg.inv(H)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("H is singular: passivity lost, prune or reduce m") from exc
        M = (Hinv - np.eye(m)) / gamma
        return np.real(kernel.dense(M, t, coeff)), info
    keep = policy.keep_mask(lam)
    info.pruned = [complex(z) for z in lam[~keep]]
    z = np.linalg.solve(X, coeff.astype(complex))
    s = (1.0 / lam[keep] - 1.0) / gamma
    with np.errstate(over="ignore", invalid="ignore"):
        vals = kernel.scalar(s, t)
        out = X[:, keep] @ (vals * z[keep])
    return np.real(out), info


def hessenberg_phi(H, gamma, t, k, policy=PruningPolicy(), coeff=None, weighted=True):
    """``f_k(H) coeff`` with ``f_0(lam) = exp(-t s)`` and, for k >= 1,
    ``f_k(lam) = s phi_k(-t s)`` (or ``phi_k(-t s)`` when not weighted)."""
    H = np.atleast_2d(np.asarray(H, dtype=float))
    if coeff is None:
        coeff = np.zeros(H.shape[0])
        coeff[0] = 1.0
    p = 1 if (weighted and k >= 1) else 0
    out, _ = hessenberg_function(H, gamma, t, Kernel(k=k, p=p), coeff, policy)
    return out


# Arnoldi variants: (inner product, project after every solve, prune).
VARIANTS = {
    "structured": ("C", True, False),
    "structured_pruned": ("C", True, True),
    "plain": ("euclidean", False, False),
    "plain_pruned": ("euclidean", False, True),
}


def variant_settings(variant):
    key = variant.replace("-", "_")
    if key not in VARIANTS:
        raise ValueError(f"unknown Arnoldi variant {variant!r}; expected one of {sorted(VARIANTS)}")
    return VARIANTS[key]


def _policy_for(variant, policy):
    if policy is not None:
        return policy
    return PruningPolicy() if variant_settings(variant)[2] else PruningPolicy.none()


@dataclass
class KrylovBases:
    """Krylov decompositions and projected seed vectors for one system.

    ``mode`` is ``"combined"`` (one basis for the collected exponential) or
    ``"per_term"`` (separate bases for the state, constant-source and
    ramp-source terms).  Missing bases belong to zero seeds.
    """

    mode: str
    gamma: float
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    Lc: np.ndarray = None
    combined: object = None
    x0: object = None
    u0: object = None
    u1: object = None
    source_route: str = "solve"
    variant: str = "structured"

    def decompositions(self):
        return [K for K in (self.combined, self.x0, self.u0, self.u1) if K is not None]

    @property
    def breakdown(self):
        return all(K.breakdown for K in self.decompositions())


def _has_range(C, P, v, tol):
    if P.n == 0:
        return False
    vn = np.linalg.norm(v)
    return vn > 0 and c_norm(C, v) > tol * np.sqrt(P.C1.max()) * vn


def source_vectors(system, P=None, source_route="solve"):
    """Projected ``a = P_C x0`` and source vectors ``b``, ``c``.

    ``source_route="solve"`` uses ``b = P_C G^{-1} u0`` and
    ``c = P_C G^{-1} u1``; ``"literal"`` feeds ``u0`` and ``u1`` directly.
    """
    P = system.projector if P is None else P
    a = P.apply(system.x0)
    if source_route == "solve":
        b = P.apply(system.g_lu.solve(system.u0)) if np.any(system.u0) else np.zeros(system.N)
        c = P.apply(system.g_lu.solve(system.u1)) if np.any(system.u1) else np.zeros(system.N)
    elif source_route == "literal":
        b, c = P.apply(system.u0), P.apply(system.u1)
    else:
        raise ValueError(f"source_route must be 'solve' or 'literal', got {source_route!r}")
    return a, b, c


def lift_B11(system, P, v):
    """``P_C G^{-1} C v``, i.e. ``V_C B11 V_C^T v`` for ``v`` in range(C)."""
    if not np.any(v):
        return np.zeros(system.N)
    return P.apply(system.g_lu.solve(system.C @ v))


def build_bases(system, gamma, m_max, *, mode="combined", variant="structured", tol=1e-12,
                source_route="solve", op=None):
    """Run the Arnoldi iteration(s) needed to assemble ``x_R``."""
    P = system.projector
    op = factor_shifted(system, gamma) if op is None else op
    inner, project, _ = variant_settings(variant)
    a, b, c = source_vectors(system, P, source_route)

    def run(v):
        if not _has_range(system.C, P, v, tol):
            return None
        return c_arnoldi(op, P, v, m_max, tol, inner=inner, project=project)

    if mode == "combined":
        if source_route != "solve":
            raise ValueError("the literal source route is only available in per_term mode")
        Lc = lift_B11(system, P, c)
        return KrylovBases(mode=mode, gamma=op.gamma, a=a, b=b, c=c, Lc=Lc,
                           combined=run(a - b + Lc), variant=variant)
    if mode == "per_term":
        return KrylovBases(mode=mode, gamma=op.gamma, a=a, b=b, c=c, x0=run(a), u0=run(b),
                           u1=run(c), source_route=source_route, variant=variant)
    raise ValueError(f"mode must be 'combined' or 'per_term', got {mode!r}")


def _term(K, v, t, kernel, policy, infos):
    if K is None:
        return 0.0
    y, info = hessenberg_function(K.H, K.gamma, t, kernel, K.coefficients(v), policy)
    infos.append(info)
    return K.W @ y


def assemble_xr(bases, system, t, policy=None, *, return_info=False):
    """Krylov approximation of the range part ``x_R(t)``."""
    policy = _policy_for(bases.variant, policy)
    P = system.projector
    infos = []
    if bases.mode == "combined":
        v = bases.a - bases.b + bases.Lc
        x = bases.b + t * bases.c - bases.Lc + _term(bases.combined, v, t, Kernel(0), policy, infos)
    else:
        x = (_term(bases.x0, bases.a, t, Kernel(0), policy, infos)
             + t * _term(bases.u0, bases.b, t, Kernel(1, 1), policy, infos)
             + t * t * _term(bases.u1, bases.c, t, Kernel(2, 1), policy, infos))
    x = P.apply(np.asarray(x, dtype=float) + np.zeros(system.N))
    return (x, infos) if return_info else x


def derivative_xr(bases, system, t, policy=None, *, return_info=False):
    """Krylov approximation of ``dx_R/dt``."""
    policy = _policy_for(bases.variant, policy)
    P = system.projector
    infos = []
    if bases.mode == "combined":
        v = bases.a - bases.b + bases.Lc
        dx = bases.c - _term(bases.combined, v, t, Kernel(0, 1), policy, infos)
    else:
        dx = (-_term(bases.x0, bases.a, t, Kernel(0, 1), policy, infos)
              + _term(bases.u0, bases.b, t, Kernel(0, 1), policy, infos)
              + _term(bases.u1, bases.c, t, Kernel(0, 0, a=1.0, b=-1.0), policy, infos))
    dx = P.apply(np.asarray(dx, dtype=float) + np.zeros(system.N))
    return (dx, infos) if return_info else dx


@dataclass
class StepResult:
    x_r: np.ndarray
    x_n: np.ndarray
    x_full: np.ndarray
    t: float
    posterior: object = None
    pruned_count: int = 0
    diagnostics: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def as_dict(self):
        post = self.posterior.as_dict() if self.posterior is not None else None
        return {
            "t": self.t,
            "pruned_count": self.pruned_count,
            "posterior": post,
            "diagnostics": self.diagnostics,
            "warnings": list(self.warnings),
            "x_r": self.x_r.tolist(),
            "x_n": self.x_n.tolist(),
            "x_full": self.x_full.tolist(),
        }


def complete_solution(bases, system, t, policy=None):
    """Full state ``x(t) = G^{-1} u(t) - G^{-1} C dx_R/dt`` and its split."""
    x_r, info_r = assemble_xr(bases, system, t, policy, return_info=True)
    dx, info_d = derivative_xr(bases, system, t, policy, return_info=True)
    x_full = system.g_lu.solve(system.u(t) - system.C @ dx)
    pruned = [z for info in info_r for z in info.pruned]
    diag = {
        "pruned_eigenvalues": [[z.real, z.imag] for z in pruned],
        "pruned_disk_distance": [abs(z - 0.5) - 0.5 for z in pruned],
        "fallback": any(info.fallback for info in info_r + info_d),
        "m": [K.m for K in bases.decompositions()],
        "breakdown": bases.breakdown,
        "gamma": bases.gamma,
    }
    return StepResult(x_r=x_r, x_n=x_full - x_r, x_full=x_full, t=float(t),
                      pruned_count=len(pruned), diagnostics=diag)


def single_step(system, h, m_max, gamma=None, tol=1e-12, policy=None, *, variant="structured_pruned",
                mode="combined", source_route="solve", posterior=True, bound_tol=None):
    """Advance from t = 0 to t = h in one step.

    ``gamma`` defaults to ``h/2``.  With ``posterior=True`` a residual-based
    error estimate for the exponential term is attached (rigorous when the
    range dimension allows forming B11, heuristic otherwise).
    """
    if not h > 0:
        raise ValueError(f"step size must be positive, got {h!r}")
    gamma = h / 2 if gamma is None else gamma
    bases = build_bases(system, gamma, m_max, mode=mode, variant=variant, tol=tol,
                        source_route=source_route)
    res = complete_solution(bases, system, h, policy)
    K = bases.combined if mode == "combined" else bases.x0
    if posterior and K is not None and K.inner == "C":
        P = system.projector
        if P.n <= ORACLE_MAX_N:
            ops = reduced_operators(system, P, gamma)
            res.posterior = posterior_bound(K, ops, h)
        else:
            res.posterior = posterior_bound(K, None, h, system=system, P=P)
        if bound_tol is not None and not K.breakdown and res.posterior.posterior_bound > bound_tol:
            res.warnings.append(
                f"posterior bound {res.posterior.posterior_bound:.3e} exceeds tolerance {bound_tol:.3e}")
    return res


ROUTES = ("phi0", "phi1", "phi2")


def ramp_response(system, h, m, route="phi2", gamma=None, variant="structured_pruned", policy=None,
                  tol=1e-12, op=None, return_info=False):
    """Range response ``x_R(h)`` from zero state under a pure ramp source.

    With ``x0 = 0 = u0`` the exact value is ``h^2 V_C M phi_2(-hM) c`` and it
    can be computed through a Krylov approximation of any one phi-function:

    * ``phi2``: ``h^2 W f_2(H) W^T C c``
    * ``phi1``: ``h c - h W phi_1(-h s(H)) W^T C c``
    * ``phi0``: ``h c - L c + W exp(-h s(H)) W^T C L c``

    Here ``L = P_C G^{-1} C`` and ``s(H) = (H^{-1} - I)/gamma``.  The phi1 and
    phi2 forms share the seed ``c``, so they differ only through rounding
    and pruning.  With ``return_info=True`` the result is
    ``(x, FunctionInfo, KrylovDecomposition)``.
    """
    if route not in ROUTES:
        raise ValueError(f"route must be one of {ROUTES}, got {route!r}")
    gamma = h / 2 if gamma is None else gamma
    policy = _policy_for(variant, policy)
    P = system.projector
    op = factor_shifted(system, gamma) if op is None else op
    inner, project, _ = variant_settings(variant)
    c = P.apply(system.g_lu.solve(system.u1))
    if route == "phi2":
        seed, kernel = c, Kernel(2, 1)
    elif route == "phi1":
        seed, kernel = c, Kernel(1, 0)
    else:
        seed, kernel = lift_B11(system, P, c), Kernel(0, 0)
    if not _has_range(system.C, P, seed, tol):
        x = np.zeros(system.N)
        return (x, None, None) if return_info else x
    K = c_arnoldi(op, P, seed, m, tol, inner=inner, project=project)
    y, info = hessenberg_function(K.H, K.gamma, h, kernel, K.coefficients(seed), policy)
    y = K.W @ y
    if route == "phi2":
        x = h * h * y
    elif route == "phi1":
        x = h * c - h * y
    else:
        x = h * c - seed + y
    x = P.apply(x)
    return (x, info, K) if return_info else x


__all__ = [
    "g_map", "g_inverse", "GammaMap", "InfiniteMuError", "PruningPolicy", "Kernel",
    "hessenberg_function", "hessenberg_phi", "KrylovBases", "build_bases", "source_vectors",
    "assemble_xr", "derivative_xr", "complete_solution", "StepResult", "single_step",
    "ramp_response", "VARIANTS",
]
