"""Shift-and-invert Arnoldi in the C-semi-inner product.

The iteration builds a C-orthonormal basis ``W`` (``W^T C W = I``) of the
Krylov space of ``S = P_C (C + gamma G)^{-1} C`` together with the square
Hessenberg matrix ``H`` and the tail ``h_tail * w_next`` such that

    S W = W H + h_tail * w_next e_m^T.

Projecting every new vector onto range(C) keeps null-space drift out of the
basis, and the C-orthogonality confines the numerical range of ``H`` to the
disk D(1/2, 1/2) whenever sym(G) is positive semi-definite.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .dense import expm_dense, phi_scalar
from .errors import NumericalError
from .linsolve import SparseLU

log = logging.getLogger(__name__)

#: Chebyshev-Lobatto points on [0, 1] for sup_theta |beta(t theta)|.
THETA_GRID = 0.5 * (1.0 - np.cos(np.pi * np.arange(33) / 32))


class ShiftedOperator:
    """Factorization of ``C + gamma G``, computed once and reused.

    Solves are reentrant (no shared workspace), so sweep workers may call
    ``solve`` concurrently.
    """

    def __init__(self, system, gamma):
        if not gamma > 0:
            raise ValueError(f"gamma must be positive, got {gamma!r}")
        self.system = system
        self.gamma = float(gamma)
        self.C = system.C
        self.G = system.G
        self.lu = SparseLU(system.C + self.gamma * system.G, name="C + gamma*G")

    @property
    def N(self):
        return self.C.shape[0]

    def solve(self, rhs):
        return self.lu.solve(rhs)

    def apply(self, v, P=None):
        """``(C + gamma G)^{-1} C v``, projected onto range(C) when ``P`` is given."""
        w = self.solve(self.C @ v)
        return w if P is None else P.apply(w)


def factor_shifted(system, gamma):
    return ShiftedOperator(system, gamma)


@dataclass(frozen=True, eq=False)
class KrylovDecomposition:
    """Result of :func:`c_arnoldi`.

    ``inner`` is ``"C"`` for the structured iteration and ``"euclidean"``
    for the ordinary one; ``projected`` records whether P_C was applied
    after every solve.
    """

    W: np.ndarray
    H: np.ndarray
    h_tail: float
    w_next: np.ndarray
    gamma: float
    beta0: float
    breakdown: bool
    inner: str = "C"
    projected: bool = True
    C: object = None
    converged: bool = False

    @property
    def m(self):
        return self.H.shape[0]

    def coefficients(self, v):
        """Coordinates of ``v`` in the basis: ``W^T C v`` or ``W^T v``."""
        if self.inner == "C":
            return self.W.T @ (self.C @ v)
        return self.W.T @ v


def _inner_fn(C, inner):
    if inner == "C":
        return lambda a, b: a @ (C @ b)
    if inner == "euclidean":
        return lambda a, b: a @ b
    raise ValueError(f"inner must be 'C' or 'euclidean', got {inner!r}")


def _norm(ip, w):
    return float(np.sqrt(max(ip(w, w), 0.0)))


def reorthogonalize_pass(W, w, C=None, inner="C"):
    """One classical Gram-Schmidt pass of ``w`` against the columns of ``W``.

    Returns the cleaned vector and the coefficients that were removed (to be
    added into the Hessenberg column).
    """
    W = np.atleast_2d(np.asarray(W, dtype=float))
    if W.shape[1] == 0:
        return np.array(w, dtype=float), np.zeros(0)
    if inner == "C":
        coeffs = (C @ W).T @ w
    else:
        coeffs = W.T @ w
    return w - W @ coeffs, coeffs


def c_arnoldi(op, P, v, m_max, tol=1e-12, *, inner="C", project=True,
              reorthogonalize=True, residual_tol=None, t_target=None):
    """Arnoldi iteration with structured orthogonalization.

    Parameters
    ----------
    op : ShiftedOperator
        Factorization of ``C + gamma G``.
    P : RangeProjector
        Projector onto range(C).
    v : array
        Starting vector; only its range component is used.
    m_max : int
        Maximum Krylov dimension.
    tol : float
        Happy-breakdown threshold: stop when ``h_{j+1,j}`` falls below
        ``tol`` times the norm of the vector before orthogonalization.
    inner : {"C", "euclidean"}
        Inner product for orthogonalization.  ``"euclidean"`` gives the
        ordinary shift-and-invert Arnoldi used as a baseline.
    project : bool
        Apply P_C after every solve.  The starting vector is always projected.
    reorthogonalize : bool
        Second (classical) Gram-Schmidt pass after modified Gram-Schmidt.
    residual_tol, t_target : float, optional
        Early exit once ``|beta(t_target)| * ||P_C G^{-1}(C + gamma G) w_{j+1}||_C``
        drops below ``residual_tol``.

    Returns
    -------
    KrylovDecomposition
    """
    if m_max < 1:
        raise ValueError("m_max must be at least 1")
    C = op.C
    ip = _inner_fn(C, inner)
    N = op.N
    v = np.asarray(v, dtype=float)
    w = P.apply(v)
    beta0 = _norm(ip, w)
    if inner == "C":
        vscale = np.sqrt(P.C1.max()) * np.linalg.norm(v) if P.n else 0.0
    else:
        vscale = np.linalg.norm(v)
    if not beta0 > tol * vscale:
        raise ValueError("initial vector has no range component")

    W = np.zeros((N, m_max + 1))
    H = np.zeros((m_max + 1, m_max))
    W[:, 0] = w / beta0
    CW = np.zeros((N, m_max + 1)) if inner == "C" else W
    if inner == "C":
        CW[:, 0] = C @ W[:, 0]

    m = m_max
    breakdown = converged = False
    h_tail = 0.0
    w_next = np.zeros(N)
    for j in range(m_max):
        w = op.solve(C @ W[:, j])
        if project:
            w = P.apply(w)
        pre = _norm(ip, w)
        for i in range(j + 1):
            h = CW[:, i] @ w
            H[i, j] += h
            w = w - h * W[:, i]
        if reorthogonalize:
            coeffs = CW[:, : j + 1].T @ w
            w = w - W[:, : j + 1] @ coeffs
            H[: j + 1, j] += coeffs
        if project:
            # rounding-level null-space drift is amplified by 1/h_{j+1,j}
            w = P.apply(w)
        hn = _norm(ip, w)
        H[j + 1, j] = hn
        if hn <= tol * pre:
            m, breakdown, h_tail = j + 1, True, hn
            w_next = w / hn if hn > 0 else np.zeros(N)
            log.debug("happy breakdown at m=%d (h=%.3e)", m, hn)
            break
        W[:, j + 1] = w / hn
        if inner == "C":
            CW[:, j + 1] = C @ W[:, j + 1]
        if residual_tol is not None and t_target is not None:
            partial = KrylovDecomposition(
                W=W[:, : j + 1], H=H[: j + 1, : j + 1], h_tail=hn,
                w_next=W[:, j + 1], gamma=op.gamma, beta0=beta0,
                breakdown=False, inner=inner, projected=project, C=C,
            )
            try:
                res = monitored_residual(partial, op, P, t_target)
            except NumericalError:
                res = np.inf
            if res < residual_tol:
                m, converged, h_tail, w_next = j + 1, True, hn, W[:, j + 1].copy()
                break
    else:
        h_tail = H[m_max, m_max - 1]
        w_next = W[:, m_max].copy()

    return KrylovDecomposition(
        W=W[:, :m].copy(), H=H[:m, :m].copy(), h_tail=float(h_tail),
        w_next=w_next, gamma=op.gamma, beta0=beta0, breakdown=breakdown,
        inner=inner, projected=project, C=C, converged=converged,
    )


def arnoldi_relation_residual(K, S):
    """``||S W - W H - h_tail w_next e_m^T||_F`` for a dense ``S``."""
    E = S @ K.W - K.W @ K.H
    E[:, -1] -= K.h_tail * K.w_next
    return float(np.linalg.norm(E))


def _Hinv_and_M(K):
    H = K.H
    try:
        Hinv = np.linalg.inv(H)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("H is singular: passivity lost, prune or reduce m") from exc
    if not np.all(np.isfinite(Hinv)) or np.linalg.cond(H) > 1e15:
        raise NumericalError("H is numerically singular: passivity lost, prune or reduce m")
    M = (Hinv - np.eye(K.m)) / K.gamma
    return Hinv, M


def residual_beta(K, t, rhs_coeff=None):
    """Residual scalar ``beta(t) = h_tail/gamma e_m^T H^{-1} exp(-t M) c``
    with ``M = (H^{-1} - I)/gamma`` and ``c = W^T C x(0)`` (default
    ``beta0 e_1``).  Accepts a scalar or an array of times."""
    rhs = np.zeros(K.m) if rhs_coeff is None else np.asarray(rhs_coeff, dtype=float)
    if rhs_coeff is None:
        rhs[0] = K.beta0
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if K.h_tail == 0.0:
        out = np.zeros(ts.shape)
        return out[0] if np.ndim(t) == 0 else out
    Hinv, M = _Hinv_and_M(K)
    row = Hinv[-1, :] * (K.h_tail / K.gamma)
    out = np.array([row @ (expm_dense(-ti * M) @ rhs) for ti in ts])
    return out[0] if np.ndim(t) == 0 else out


def residual_vector_direction(K, system, P):
    """``P_C G^{-1} (C + gamma G) w_{m+1}``; the residual is ``-beta(t)`` times this."""
    w = K.w_next
    return P.apply(system.g_lu.solve(system.C @ w) + K.gamma * w)


def monitored_residual(K, op, P, t):
    """``|beta(t)| * ||P_C G^{-1}(C + gamma G) w_{m+1}||_C``."""
    from .model import c_norm

    b = abs(residual_beta(K, t))
    if b == 0.0:
        return 0.0
    return b * c_norm(op.C, residual_vector_direction(K, op.system, P))


@dataclass
class ResidualEstimate:
    beta_sup: float
    residual_direction_norm: float
    posterior_bound: float
    K: float = 1.0
    omega: float = 0.0
    omega_choice: str = ""
    literal_omega_valid: bool = None
    heuristic: bool = False

    def as_dict(self):
        return dict(self.__dict__)


def decay_constants(B11, C1, t_probe=None):
    """Candidate (K, omega) pairs with ``||exp(-t B11^{-1})||_{C1} <= K exp(-t omega)``.

    Returns a dict with

    * ``spectral``: K = cond(X) for ``C1^{1/2} B11^{-1} C1^{-1/2} = X D X^{-1}``,
      omega = min Re(D).  Rigorous.
    * ``lognorm``: K = 1, omega = smallest eigenvalue of the symmetric part.
      Rigorous.
    * ``largest_sym``: K = cond(X), omega = largest eigenvalue of the symmetric
      part.  Not a bound in general; checked empirically on ``t_probe``.
    """
    s = np.sqrt(C1)
    Bi = np.linalg.inv(B11)
    Mhat = (s[:, None] * Bi) / s[None, :]
    lam, X = np.linalg.eig(Mhat)
    kx = float(np.linalg.cond(X))
    sym = np.linalg.eigvalsh(0.5 * (Mhat + Mhat.T))
    out = {
        "spectral": (kx, float(lam.real.min())),
        "lognorm": (1.0, float(sym[0])),
        "largest_sym": (kx, float(sym[-1])),
    }
    valid = None
    if t_probe is not None:
        valid = True
        Kp, wp = out["largest_sym"]
        for tp in np.atleast_1d(t_probe):
            nrm = np.linalg.norm(expm_dense(-tp * Mhat), 2)
            if nrm > Kp * np.exp(-tp * wp) * (1 + 1e-10):
                valid = False
                break
    return out, valid


def posterior_bound(K, ops, t, rhs_coeff=None, *, system=None, P=None):
    """Computable bound on ``||P_C (y_m(t) - y(t))||_C`` for the exp term.

    With reduced operators (``ops``) the bound is

        K t phi_1(-t omega) ||(I + gamma B11^{-1}) V_C^T w_{m+1}||_{C1} sup_theta |beta(t theta)|.

    The (K, omega) pair is the rigorous candidate from :func:`decay_constants`
    giving the smaller bound; whether the largest-symmetric-eigenvalue choice
    would also have held on this instance is recorded.  Without ``ops`` a
    heuristic residual-only estimate is returned (needs ``system`` and ``P``).
    """
    thetas = t * THETA_GRID
    beta_sup = float(np.max(np.abs(residual_beta(K, thetas, rhs_coeff)))) if K.h_tail else 0.0
    if ops is None:
        if system is None or P is None:
            raise ValueError("surrogate mode needs system and P")
        from .model import c_norm

        rnorm = c_norm(system.C, residual_vector_direction(K, system, P)) if K.h_tail else 0.0
        return ResidualEstimate(beta_sup=beta_sup, residual_direction_norm=rnorm,
                                posterior_bound=beta_sup * rnorm, heuristic=True)
    Pp = ops.projector if P is None else P
    y = Pp.to_range(K.w_next)
    n = y.size
    Bi = np.linalg.inv(ops.B11)
    z = (np.eye(n) + K.gamma * Bi) @ y
    dnorm = float(np.linalg.norm(np.sqrt(ops.C1) * z))
    probe = t * np.logspace(-3, 0, 13) if t > 0 else None
    cands, literal_ok = decay_constants(ops.B11, ops.C1, probe)
    best = None
    for name in ("lognorm", "spectral"):
        Kc, wc = cands[name]
        val = Kc * t * float(np.real(phi_scalar(-t * wc, 1)))
        if best is None or val < best[0]:
            best = (val, name, Kc, wc)
    factor, choice, Kc, wc = best
    return ResidualEstimate(
        beta_sup=beta_sup, residual_direction_norm=dnorm,
        posterior_bound=factor * dnorm * beta_sup, K=Kc, omega=wc,
        omega_choice=choice, literal_omega_valid=literal_ok,
    )
