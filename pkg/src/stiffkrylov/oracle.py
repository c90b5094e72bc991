"""Dense reference solutions for validation.

Nothing here is used on the production path.  Two independent routes are
provided for the exact solution:

* :func:`exact_projected` works with ``M = B11^{-1}`` and phi-functions,
  and :func:`exact_algebraic` recovers the null-space part afterwards;
* :func:`decoupled_reference` eliminates the algebraic unknowns through the
  Schur complement ``G1 - G2 G4^{-1} G3`` and integrates the remaining ODE
  with one augmented matrix exponential.

:func:`fine_step_reference` is a backward-Euler cross-check that needs no
decomposition at all.
"""

from dataclasses import dataclass

import numpy as np

from .dense import eig_dense, expm_dense, phi_action, phi_scalar
from .errors import NumericalError, SingularMatrixError
from .linsolve import SparseLU
from .model import ORACLE_MAX_N

# Above this eigenvector condition number phi-functions switch to the
# augmented-exponential route.
EIG_COND_MAX = 1e10


def _check_size(system):
    if system.N > ORACLE_MAX_N:
        raise ValueError(f"oracle limited to N <= {ORACLE_MAX_N}, got N = {system.N}")


@dataclass(frozen=True, eq=False)
class DecoupledBlocks:
    """Blocks of ``V^T G V`` for the orthogonal basis ``V = [V_C, V_N]``."""

    G1: np.ndarray
    G2: np.ndarray
    G3: np.ndarray
    G4: np.ndarray
    C1: np.ndarray
    V_C: np.ndarray
    V_N: np.ndarray

    @property
    def n(self):
        return self.C1.size

    def schur(self):
        """``G1 - G2 G4^{-1} G3``."""
        if self.G4.size == 0:
            return self.G1.copy()
        return self.G1 - self.G2 @ self._solve_g4(self.G3)

    def _solve_g4(self, rhs):
        if self.G4.size == 0:
            return np.zeros((0,) + np.shape(rhs)[1:])
        cond = np.linalg.cond(self.G4)
        if not np.isfinite(cond) or cond > 1e14:
            raise SingularMatrixError("G4", -1, "algebraic block not invertible (out of scope)")
        return np.linalg.solve(self.G4, rhs)


def decouple(system, P=None):
    """Split C and G along range(C) and its orthogonal complement."""
    _check_size(system)
    P = system.projector if P is None else P
    V_C, V_N = P.V_C, P.null_basis
    Gd = system.G.toarray()
    n = V_C.shape[1]
    V = np.hstack([V_C, V_N])
    GV = V.T @ Gd @ V
    return DecoupledBlocks(
        G1=GV[:n, :n], G2=GV[:n, n:], G3=GV[n:, :n], G4=GV[n:, n:],
        C1=P.C1.copy(), V_C=V_C, V_N=V_N,
    )


def _phi_terms(M, t, a, b, c):
    """``exp(-tM) a + t M phi_1(-tM) b + t^2 M phi_2(-tM) c``."""
    n = M.shape[0]
    if n == 0:
        return np.zeros(0)
    try:
        lam, X = eig_dense(M)
        cond = np.linalg.cond(X)
    except NumericalError:
        cond = np.inf
    if cond < EIG_COND_MAX:
        z = np.linalg.solve(X, np.column_stack([a, b, c]).astype(complex))
        with np.errstate(over="ignore", invalid="ignore"):
            y = (phi_scalar(-t * lam, 0) * z[:, 0]
                 + t * lam * phi_scalar(-t * lam, 1) * z[:, 1]
                 + t * t * lam * phi_scalar(-t * lam, 2) * z[:, 2])
        out = np.real(X @ y)
    else:
        out = (expm_dense(-t * M) @ a
               + t * (M @ phi_action(-t * M, 1, b))
               + t * t * (M @ phi_action(-t * M, 2, c)))
    if not np.all(np.isfinite(out)):
        raise NumericalError("reference solution overflowed")
    return out


def reduced_B11(system, P=None):
    """Dense ``B11 = V_C^T G^{-1} C V_C``."""
    _check_size(system)
    P = system.projector if P is None else P
    CV = P.V_C * P.C1
    return np.atleast_2d(P.to_range(system.g_lu.solve(CV)))


def exact_projected(system, t):
    """Exact range component ``x_R(t)`` (length N)."""
    _check_size(system)
    P = system.projector
    if P.n == 0:
        return np.zeros(system.N)
    B11 = reduced_B11(system, P)
    cond = np.linalg.cond(B11)
    if not np.isfinite(cond) or cond > 1e15:
        raise NumericalError("B11 is singular; use fine_step_reference for this system")
    M = np.linalg.inv(B11)
    a = P.to_range(system.x0)
    b = P.to_range(system.g_lu.solve(system.u0))
    c = P.to_range(system.g_lu.solve(system.u1))
    return P.from_range(_phi_terms(M, float(t), a, b, c))


def exact_algebraic(system, x1_traj, blocks=None):
    """Null-space component ``x_N(t) = V_N G4^{-1} V_N^T (u(t) - G x_R(t))``.

    ``x1_traj`` maps t to the full-length range component ``x_R(t)``.
    Returns a function of t.
    """
    blocks = decouple(system) if blocks is None else blocks
    V_N = blocks.V_N

    def x_n(t):
        if V_N.shape[1] == 0:
            return np.zeros(system.N)
        rhs = V_N.T @ (system.u(t) - system.G @ x1_traj(t))
        return V_N @ blocks._solve_g4(rhs)

    return x_n


def exact_full(system, t):
    """``x_R(t) + x_N(t)`` from the projected route."""
    xr = exact_projected(system, t)
    return xr + exact_algebraic(system, lambda s: xr)(t)


def decoupled_reference(system, t, blocks=None):
    """Full state from the Schur-complement ODE

        C1 x1' = -(G1 - G2 G4^{-1} G3) x1 + u_1 - G2 G4^{-1} u_2,

    integrated exactly with one exponential of the augmented matrix
    ``[[-A, q1, q0], [0, 0, 1], [0, 0, 0]]`` acting on ``[x1(0), 0, 1]``,
    followed by ``x2 = G4^{-1} (u_2 - G3 x1)``.
    """
    blocks = decouple(system) if blocks is None else blocks
    n = blocks.n
    V_C, V_N = blocks.V_C, blocks.V_N
    u0c, u1c = V_C.T @ system.u0, V_C.T @ system.u1
    u0n, u1n = V_N.T @ system.u0, V_N.T @ system.u1
    if n == 0:
        x2 = blocks._solve_g4(u0n + t * u1n)
        return V_N @ x2
    S = blocks.schur()
    q0 = (u0c - blocks.G2 @ blocks._solve_g4(u0n)) / blocks.C1
    q1 = (u1c - blocks.G2 @ blocks._solve_g4(u1n)) / blocks.C1
    A = S / blocks.C1[:, None]
    big = np.zeros((n + 2, n + 2))
    big[:n, :n] = -A
    big[:n, n] = q1
    big[:n, n + 1] = q0
    big[n, n + 1] = 1.0
    z0 = np.concatenate([V_C.T @ system.x0, [0.0, 1.0]])
    x1 = (expm_dense(t * big) @ z0)[:n]
    x2 = blocks._solve_g4(u0n + t * u1n - blocks.G3 @ x1)
    return V_C @ x1 + V_N @ x2


def consistent_initial_state(system):
    """``P_C x0`` completed with the algebraic unknowns that satisfy the constraints at t = 0."""
    a = system.projector.apply(system.x0)
    return a + exact_algebraic(system, lambda s: a)(0.0)


def fine_step_reference(system, t, steps=10000):
    """Backward Euler with ``steps`` uniform steps:
    ``(C + d G) x_{j+1} = C x_j + d u(t_{j+1})``, ``d = t/steps``."""
    if steps < 1:
        raise ValueError("steps must be at least 1")
    if t == 0:
        return consistent_initial_state(system)
    d = t / steps
    lu = SparseLU(system.C + d * system.G, name="C + delta*G")
    C = system.C
    x = np.array(system.x0, dtype=float)
    for j in range(1, steps + 1):
        x = lu.solve(C @ x + d * system.u(j * d))
    return x


def richardson_order(system, t, steps, x_exact=None):
    """Observed order ``log2(err(steps)/err(2 steps))``."""
    if x_exact is None:
        x_exact = exact_full(system, t)
    e1 = np.linalg.norm(fine_step_reference(system, t, steps) - x_exact)
    e2 = np.linalg.norm(fine_step_reference(system, t, 2 * steps) - x_exact)
    return float(np.log2(e1 / e2))
