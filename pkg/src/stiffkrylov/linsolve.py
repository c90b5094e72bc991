"""Sparse LU factorizations that are computed once and reused."""

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SingularMatrixError

# |u_ii| below this fraction of max |u_ii| counts as a numerically zero pivot.
PIVOT_RTOL = 1e-14


class SparseLU:
    """LU factorization (SuperLU, COLAMD ordering) with one step of
    iterative refinement per solve.

    The object holds no mutable workspace, so ``solve`` may be called from
    several threads at once.
    """

    def __init__(self, A, name="matrix", refine=1):
        A = sp.csc_matrix(A, dtype=float)
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"{name} must be square, got {A.shape}")
        self.A = A
        self.name = name
        self.refine = refine
        self.shape = A.shape
        n = A.shape[0]
        if n == 0:
            self._lu = None
            return
        try:
            self._lu = spla.splu(A, permc_spec="COLAMD")
        except RuntimeError as exc:
            raise SingularMatrixError(name, self._zero_pivot_guess(), str(exc)) from exc
        udiag = np.abs(self._lu.U.diagonal())
        ref = udiag.max() if udiag.size else 0.0
        bad = np.flatnonzero(udiag <= PIVOT_RTOL * ref)
        if ref == 0.0 or bad.size:
            idx = int(bad[0]) if bad.size else 0
            raise SingularMatrixError(
                name, int(self._lu.perm_c[idx]),
                f"|pivot| = {udiag[idx]:.3e}, max |pivot| = {ref:.3e}",
            )

    def _zero_pivot_guess(self):
        # SuperLU does not report the failing column; find an empty one if any.
        counts = np.diff(self.A.indptr)
        empty = np.flatnonzero(counts == 0)
        if empty.size:
            return int(empty[0])
        rows = np.bincount(self.A.indices, minlength=self.A.shape[0])
        empty = np.flatnonzero(rows == 0)
        return int(empty[0]) if empty.size else -1

    def solve(self, b):
        b = np.asarray(b)
        if self._lu is None:
            return np.zeros_like(b, dtype=float)
        if np.iscomplexobj(b):
            return self.solve(b.real) + 1j * self.solve(b.imag)
        x = self._lu.solve(b)
        for _ in range(self.refine):
            r = b - self.A @ x
            x = x + self._lu.solve(r)
        return x
