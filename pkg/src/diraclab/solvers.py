"""Shifted linear solves (H - z)^{-1} b for both backends.

Sparse-capable handles get a cached LU factorization; matrix-free handles get
MINRES on the real symmetric embedding of the complex Hermitian system (for
real shifts) or GMRES (for complex shifts).
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SolverFailureError


def _real_embed(v):
    return np.concatenate([v.real, v.imag])


def _real_unembed(w):
    n = w.shape[0] // 2
    return w[:n] + 1j * w[n:]


class ShiftedSolver:
    """Callable returning (H - z)^{-1} b; ``adjoint`` solves with (H - conj(z))."""

    def __init__(self, handle, z, tol=1e-10, maxiter=20000):
        self.handle = handle
        self.z = complex(z)
        self.tol = tol
        self.maxiter = maxiter
        self._lu = None
        self._sparse_ok = True
        try:
            mat = handle.to_sparse()
        except Exception:
            self._sparse_ok = False
            mat = None
        if self._sparse_ok:
            shifted = (mat - self.z * sp.identity(handle.dim, dtype=complex,
                                                  format="csr")).tocsc()
            # symmetric-structure ordering: noticeably less fill than COLAMD here
            self._lu = spla.splu(shifted, permc_spec="MMD_AT_PLUS_A")

    def __call__(self, b):
        return self._solve(np.asarray(b, dtype=complex), adjoint=False)

    def adjoint(self, b):
        return self._solve(np.asarray(b, dtype=complex), adjoint=True)

    def _solve(self, b, adjoint):
        if self._lu is not None:
            return self._lu.solve(b, trans="H" if adjoint else "N")
        z = np.conj(self.z) if adjoint else self.z
        if abs(z.imag) < 1e-300:
            return self._minres_real_shift(b, z.real)
        return self._gmres(b, z)

    def _minres_real_shift(self, b, e):
        handle, dim = self.handle, self.handle.dim

        def mv(w):
            v = _real_unembed(w)
            return _real_embed(handle.apply(v) - e * v)

        lin = spla.LinearOperator((2 * dim, 2 * dim), matvec=mv, dtype=float)
        x, info = spla.minres(lin, _real_embed(b), rtol=self.tol,
                              maxiter=self.maxiter)
        if info != 0:
            raise SolverFailureError(f"minres failed (info={info}) at shift {e}")
        return _real_unembed(x)

    def _gmres(self, b, z):
        handle, dim = self.handle, self.handle.dim

        def mv(v):
            return handle.apply(v) - z * v

        lin = spla.LinearOperator((dim, dim), matvec=mv, dtype=complex)
        x, info = spla.lgmres(lin, b, rtol=self.tol, maxiter=self.maxiter)
        if info != 0:
            raise SolverFailureError(f"lgmres failed (info={info}) at shift {z}")
        return x

    def as_linear_operator(self):
        return spla.LinearOperator((self.handle.dim, self.handle.dim),
                                   matvec=self, dtype=complex)
