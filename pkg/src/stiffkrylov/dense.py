"""Dense kernels for small matrices: exponentials, phi-functions, eigenpairs.

Everything here works on plain ``numpy`` arrays.  The phi-functions follow

    phi_0(z) = exp(z),   phi_{k+1}(z) = (phi_k(z) - 1/k!) / z,

with phi_k(0) = 1/k!.
"""

import math

import numpy as np
import scipy.linalg

from .errors import NumericalError

# Taylor/recurrence crossover radius for phi_scalar.  The recurrence loses
# roughly a factor 1/|z| per order, so higher orders switch later.
TAYLOR_RADIUS = 0.25


def _taylor_radius(k):
    return TAYLOR_RADIUS if k <= 1 else float(k)


def _check_order(k):
    if int(k) != k or k < 0:
        raise ValueError(f"phi order must be a non-negative integer, got {k!r}")
    return int(k)


def _as_square(A):
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


def expm_dense(A):
    """Matrix exponential by scaling and squaring with Pade approximants.

    Raises
    ------
    NumericalError
        If the result overflows; never returns ``inf`` silently.
    """
    A = _as_square(A)
    if A.shape[0] == 0:
        return np.zeros_like(A, dtype=np.result_type(A, float))
    with np.errstate(over="ignore", invalid="ignore"):
        E = scipy.linalg.expm(A)
    if not np.all(np.isfinite(E)):
        raise NumericalError(
            f"matrix exponential overflowed (1-norm of argument {np.linalg.norm(A, 1):.3e})"
        )
    return E


def phi_dense(A, k):
    """phi_k(A) from one exponential of the block matrix

        [[A, I, 0, ..],
         [0, 0, I, ..],
         ...
         [0, ..,    0]]

    of order n(k+1), whose top-right block is phi_k(A).  Valid for singular A.
    """
    k = _check_order(k)
    A = _as_square(A)
    n = A.shape[0]
    if k == 0:
        return expm_dense(A)
    dtype = np.result_type(A, float)
    big = np.zeros((n * (k + 1), n * (k + 1)), dtype=dtype)
    big[:n, :n] = A
    eye = np.eye(n, dtype=dtype)
    for j in range(k):
        big[j * n:(j + 1) * n, (j + 1) * n:(j + 2) * n] = eye
    return expm_dense(big)[:n, k * n:]


def phi_action(A, k, v):
    """phi_k(A) @ v via the (n+k)-sized augmented exponential."""
    k = _check_order(k)
    A = _as_square(A)
    v = np.asarray(v)
    n = A.shape[0]
    if k == 0:
        return expm_dense(A) @ v
    dtype = np.result_type(A, v, float)
    big = np.zeros((n + k, n + k), dtype=dtype)
    big[:n, :n] = A
    big[:n, n] = v
    for j in range(k - 1):
        big[n + j, n + j + 1] = 1.0
    return expm_dense(big)[:n, -1]


def phi_scalar(z, k):
    """Elementwise phi_k for scalars or arrays (real or complex).

    Uses the Taylor series sum_j z^j/(j+k)! inside a small disk and the
    recurrence from exp(z) outside it.
    """
    k = _check_order(k)
    scalar = np.ndim(z) == 0
    z = np.atleast_1d(np.asarray(z))
    if not np.iscomplexobj(z):
        z = z.astype(float)
    if k == 0:
        with np.errstate(over="ignore"):
            out = np.exp(z)
        return out[0] if scalar else out

    out = np.empty_like(z)
    small = np.abs(z) < _taylor_radius(k)
    if np.any(small):
        zs = z[small]
        term = np.full_like(zs, 1.0 / math.factorial(k))
        acc = term.copy()
        for j in range(1, 200):
            term = term * zs / (j + k)
            acc = acc + term
            if np.all(np.abs(term) <= 1e-17 * np.abs(acc)):
                break
        out[small] = acc
    big = ~small
    if np.any(big):
        zb = z[big]
        with np.errstate(over="ignore", invalid="ignore"):
            acc = np.exp(zb)
            for j in range(k):
                acc = (acc - 1.0 / math.factorial(j)) / zb
        out[big] = acc
    return out[0] if scalar else out


def eig_dense(A):
    """Eigenvalues and unit-norm eigenvectors, with a residual check.

    Returns complex arrays ``(lam, V)`` with ``A @ V ~= V * lam``.
    """
    A = _as_square(A)
    if A.shape[0] == 0:
        return np.zeros(0, complex), np.zeros((0, 0), complex)
    try:
        lam, V = np.linalg.eig(A)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigenvalue iteration failed: {exc}") from exc
    lam = lam.astype(complex)
    V = V.astype(complex)
    V /= np.linalg.norm(V, axis=0)
    scale = max(np.linalg.norm(A, 2), np.finfo(float).tiny)
    resid = np.linalg.norm(A @ V - V * lam, axis=0)
    worst = resid.max()
    if worst > 1e-9 * scale:
        raise NumericalError(
            f"eigen-decomposition residual {worst:.3e} exceeds 1e-9*||A|| = {1e-9 * scale:.3e}"
        )
    return lam, V


def hessenberg_check(H, tol=0.0):
    """True when every entry below the first subdiagonal is within ``tol``."""
    H = np.asarray(H)
    return bool(np.all(np.abs(np.tril(H, -2)) <= tol))
