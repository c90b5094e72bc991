"""Small reproducible systems for tests, demos and benchmarks."""

import numpy as np
import scipy.sparse as sp

from .model import DaeSystem


def _loguniform(rng, lo, hi, size):
    return np.exp(rng.uniform(np.log(lo), np.log(hi), size))


def random_dae(N, n_range=None, seed=0, kind="definite", c_decades=2.0, skew=1.0,
               sources=True, rotate=False):
    """Random system with diagonal PSD ``C`` of rank ``n_range``.

    Parameters
    ----------
    kind : {"definite", "psd", "symmetric"}
        ``definite``: sym(G) positive definite plus a skew part.
        ``psd``: MNA-like ``G = [[R, E], [-E^T, 0]]`` whose symmetric part is
        singular; the capacitive coordinates cover the whole zero block so
        the algebraic block stays invertible.
        ``symmetric``: symmetric positive definite G.
    rotate : bool
        Apply a random orthogonal similarity, so C is no longer diagonal.
    """
    rng = np.random.default_rng(seed)
    n_range = N // 2 if n_range is None else n_range
    if not 0 <= n_range <= N:
        raise ValueError("n_range must lie in [0, N]")
    if kind in ("definite", "symmetric"):
        A = rng.standard_normal((N, N))
        G = A @ A.T / N + 0.1 * np.eye(N)
        if kind == "definite":
            B = rng.standard_normal((N, N))
            G = G + skew * (B - B.T) / np.sqrt(N)
        cdiag = np.zeros(N)
        idx = rng.choice(N, n_range, replace=False)
        cdiag[idx] = 10.0 ** rng.uniform(-c_decades, 0.0, n_range)
    elif kind == "psd":
        q = max(1, min(N // 3, n_range // 2))
        p = N - q
        A = rng.standard_normal((p, p))
        R = A @ A.T / p + 0.1 * np.eye(p)
        E = rng.standard_normal((p, q)) * skew
        G = np.zeros((N, N))
        G[:p, :p] = R
        G[:p, p:] = E
        G[p:, :p] = -E.T
        cdiag = np.zeros(N)
        cdiag[p:] = 10.0 ** rng.uniform(-c_decades, 0.0, q)
        extra = n_range - q
        if extra > 0:
            idx = rng.choice(p, min(extra, p), replace=False)
            cdiag[idx] = 10.0 ** rng.uniform(-c_decades, 0.0, idx.size)
    else:
        raise ValueError(f"unknown kind {kind!r}")
    C = np.diag(cdiag)
    if rotate:
        Q, _ = np.linalg.qr(rng.standard_normal((N, N)))
        C = Q @ C @ Q.T
        C = 0.5 * (C + C.T)
        G = Q @ G @ Q.T
    x0 = rng.standard_normal(N)
    u0 = rng.standard_normal(N) if sources else np.zeros(N)
    u1 = rng.standard_normal(N) if sources else np.zeros(N)
    return DaeSystem(C=sp.csr_matrix(C), G=sp.csr_matrix(G), u0=u0, u1=u1, x0=x0)


def invariant_block_dae(N, k, seed=0, n_range=None):
    """System whose data lie in a small invariant subspace of the Krylov operator.

    ``G`` and ``C`` are block diagonal (after a hidden symmetric permutation)
    with a leading block of size ``2k`` holding ``k`` capacitive coordinates.
    ``x0``, ``G^{-1} u0`` and ``G^{-1} u1`` live in that block, so each
    Krylov sequence terminates after at most ``k`` steps.
    """
    rng = np.random.default_rng(seed)
    n_range = N // 2 if n_range is None else n_range
    blocks = []
    cdiag = []
    for size, nr in ((2 * k, k), (N - 2 * k, n_range - k)):
        A = rng.standard_normal((size, size))
        B = rng.standard_normal((size, size))
        blocks.append(A @ A.T / size + 0.2 * np.eye(size) + (B - B.T) / np.sqrt(size))
        d = np.zeros(size)
        d[rng.choice(size, nr, replace=False)] = 10.0 ** rng.uniform(-1.0, 0.0, nr)
        cdiag.append(d)
    G = np.zeros((N, N))
    G[: 2 * k, : 2 * k] = blocks[0]
    G[2 * k:, 2 * k:] = blocks[1]
    cd = np.concatenate(cdiag)
    v = np.zeros((3, N))
    v[:, : 2 * k] = rng.standard_normal((3, 2 * k))
    x0 = v[0]
    u0 = G @ v[1]
    u1 = G @ v[2]
    perm = rng.permutation(N)
    G = G[np.ix_(perm, perm)]
    return DaeSystem(C=sp.diags(cd[perm]).tocsr(), G=sp.csr_matrix(G),
                     u0=u0[perm], u1=u1[perm], x0=x0[perm])


#: Entries of the 2x2 block of ``P_C G^{-1} C`` in the four-node example.
FOUR_NODE_K = np.array([[5e-14, 5e-10], [-5e-10, 0.0]])


def four_node_example(u1_scale=1.0):
    """Four-unknown system with ``C = diag(0, 0, 1, 1)`` and
    ``P_C G^{-1} C = blockdiag(0, K)``, ``K = [[5e-14, 5e-10], [-5e-10, 0]]``.

    ``G = blockdiag(I, K^{-1})`` is positive semi-definite but not definite,
    and the C-numerical range of ``G^{-1} C`` is confined to the box
    ``[0, 5e-14] x [-5e-10, 5e-10]``.
    """
    C = sp.diags([0.0, 0.0, 1.0, 1.0]).tocsr()
    G = np.zeros((4, 4))
    G[:2, :2] = np.eye(2)
    G[2:, 2:] = np.linalg.inv(FOUR_NODE_K)
    u1 = u1_scale * np.array([0.0, 0.0, 1.0, 1.0]) @ G.T
    return DaeSystem(C=C, G=sp.csr_matrix(G), u1=u1)


def rc_divider(R=1e3, Cval=1e-9, current=1e-3):
    """One node with a resistor and a capacitor to ground, fed by a DC current.

    ``x(t) = R I (1 - exp(-t/(R C)))`` from zero state.
    """
    return DaeSystem(C=sp.csr_matrix([[Cval]]), G=sp.csr_matrix([[1.0 / R]]),
                     u0=np.array([current]))
