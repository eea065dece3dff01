"""Operator construction and application.

Two interchangeable discretizations of H = S D0 S + V on a periodic box:

  * ``fourier_symbol`` — applies the exact first-order symbol sigma.k on the
    discrete Brillouin zone via FFTs.  Monotone symbol, no doubler modes,
    nonlocal; matrix-free only.
  * ``wilson_sparse``  — central differences plus a Wilson regulator
    (r/h) sum_j (1 - cos k_j h) on the mass channel, which lifts the doublers
    out of the gap window at O(h) cost.  Materializable as sparse.

Handles are immutable; adding a sampled random potential returns a new handle
that shares the kinetic part.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .errors import (InvalidInputError, ResourceLimitError,
                     UnsupportedConfigError)
from .model import GridBox, ModelSpec

DENSE_CAP = 4200
SPARSE_CAP = 200_000
_CONST_TOL = 1e-14


class MatrixHandle:
    """Adapter exposing the handle interface for a plain (sparse) matrix."""

    def __init__(self, mat):
        self.mat = sp.csr_matrix(mat) if not sp.issparse(mat) else mat.tocsr()
        self.dim = self.mat.shape[0]
        self.grid = None
        self.comp = 1

    def apply(self, v):
        return self.mat @ v

    def to_sparse(self):
        return self.mat

    def to_dense(self, cap=DENSE_CAP):
        if self.dim > cap:
            raise ResourceLimitError(f"dense cap {cap} exceeded (dim={self.dim})")
        return self.mat.toarray()

    def norm_bound(self):
        return float(sp.linalg.norm(self.mat, np.inf)) if self.dim else 0.0


def _wilson_symbol(grid: GridBox, clifford, k_axes):
    """Lattice symbol of the Wilson-regularized operator at given momenta."""
    h = grid.h
    mesh = np.meshgrid(*k_axes, indexing="ij")
    n = clifford.comp
    out = np.zeros(mesh[0].shape + (n, n), dtype=complex)
    wilson = np.zeros(mesh[0].shape)
    for j in range(grid.dim):
        out += (np.sin(mesh[j] * h) / h)[..., None, None] * clifford.sigmas[j]
        wilson += (grid.wilson_r / h) * (1.0 - np.cos(mesh[j] * h))
    out += wilson[..., None, None] * clifford.mass_matrix
    return out


def _exact_symbol(clifford, k_axes):
    mesh = np.stack(np.meshgrid(*k_axes, indexing="ij"), axis=-1)
    return clifford.symbol(mesh)


def _is_const_field(field):
    if field is None:
        return True
    first = field.reshape(-1, *field.shape[-2:])[0]
    return bool(np.all(np.abs(field - first) <= _CONST_TOL))


class OperatorHandle:
    """Immutable discretized Hamiltonian on a periodic grid box."""

    def __init__(self, spec: ModelSpec, S_field, V_field, extra_potential=None,
                 _kinetic_sparse=None):
        self.spec = spec
        self.grid = spec.grid
        self.comp = spec.comp
        self.dim = self.grid.total_dim(self.comp)
        self.backend = self.grid.backend
        self._S = S_field                 # None means identity
        self._V0 = V_field                # periodic part, (*spatial, n, n)
        self._extra = extra_potential     # random part or None
        self._kin = _kinetic_sparse       # cached S D0 S for wilson backend
        self._sparse = None
        self._V = V_field if extra_potential is None else V_field + extra_potential
        if self.backend == "wilson_sparse" and spec.clifford.mass_matrix is None:
            raise UnsupportedConfigError("wilson backend needs a mass channel")
        if self.backend == "fourier_symbol":
            self._symbol = _exact_symbol(spec.clifford, self.grid.momenta())
        else:
            self._symbol = None
        self._spatial_shape = (self.grid.nodes_per_axis,) * self.grid.dim
        self._cell_ctx = None

    # -- structure flags -------------------------------------------------

    @property
    def is_cell_periodic(self):
        """True when the potential is the sampled periodic one (no disorder)."""
        return self._extra is None

    @property
    def is_constant(self):
        """True when S and V are constant across nodes (free-type operator)."""
        return self._extra is None and _is_const_field(self._S) \
            and _is_const_field(self._V0)

    def constant_blocks(self):
        s0 = None if self._S is None else self._S.reshape(-1, self.comp, self.comp)[0]
        v0 = self._V0.reshape(-1, self.comp, self.comp)[0]
        return s0, v0

    # -- application -----------------------------------------------------

    def _as_grid(self, v):
        return np.asarray(v).reshape(self._spatial_shape + (self.comp,))

    def apply(self, v):
        """H v for a flat state vector of length ``self.dim``."""
        v = np.asarray(v)
        if v.shape != (self.dim,):
            raise InvalidInputError(f"state must have shape ({self.dim},)")
        if self.backend == "wilson_sparse":
            return self.to_sparse() @ v.astype(complex)
        w = self._as_grid(v.astype(complex))
        if self._S is not None:
            w = np.einsum("...ij,...j->...i", self._S, w)
        axes = tuple(range(self.grid.dim))
        w = np.fft.fftn(w, axes=axes)
        w = np.einsum("...ij,...j->...i", self._symbol, w)
        w = np.fft.ifftn(w, axes=axes)
        if self._S is not None:
            w = np.einsum("...ij,...j->...i", self._S, w)
        w = w + np.einsum("...ij,...j->...i", self._V, self._as_grid(v))
        return w.reshape(self.dim)

    # -- materialization -------------------------------------------------

    def _shift_ops(self):
        N = self.grid.nodes_per_axis
        eyeN = sp.identity(N, format="csr")
        fwd = sp.csr_matrix(
            (np.ones(N), ((np.arange(N)), (np.arange(N) + 1) % N)), shape=(N, N))
        ops = []
        for j in range(self.grid.dim):
            mats = [eyeN] * self.grid.dim
            mats[j] = fwd
            op = mats[0]
            for m in mats[1:]:
                op = sp.kron(op, m, format="csr")
            ops.append(op)
        return ops

    def _build_kinetic_sparse(self):
        grid, cl = self.grid, self.spec.clifford
        h, r = grid.h, grid.wilson_r
        shifts = self._shift_ops()
        n_nodes = grid.n_nodes
        eyeS = sp.identity(n_nodes, format="csr")
        d0 = None
        for j in range(grid.dim):
            hop = (-1j / (2 * h)) * (shifts[j] - shifts[j].T)
            wil = (r / (2 * h)) * (2 * eyeS - shifts[j] - shifts[j].T)
            term = sp.kron(hop, cl.sigmas[j], format="csr") \
                + sp.kron(wil, cl.mass_matrix, format="csr")
            d0 = term if d0 is None else d0 + term
        if self._S is not None:
            sblk = sp.block_diag(self._S.reshape(-1, self.comp, self.comp),
                                 format="csr")
            d0 = sblk @ d0 @ sblk
        return d0.tocsr()

    def to_sparse(self, cap=SPARSE_CAP):
        if self.backend != "wilson_sparse":
            raise UnsupportedConfigError("sparse form only for the wilson backend")
        if self.dim > cap:
            raise ResourceLimitError(f"sparse cap {cap} exceeded (dim={self.dim})")
        if self._sparse is None:
            if self._kin is None:
                self._kin = self._build_kinetic_sparse()
            vblk = sp.block_diag(self._V.reshape(-1, self.comp, self.comp),
                                 format="csr")
            self._sparse = (self._kin + vblk).tocsr()
        return self._sparse

    def to_dense(self, cap=DENSE_CAP):
        if self.dim > cap:
            raise ResourceLimitError(f"dense cap {cap} exceeded (dim={self.dim})")
        if self.backend == "wilson_sparse":
            return self.to_sparse().toarray()
        cols = np.eye(self.dim, dtype=complex)
        out = np.empty((self.dim, self.dim), dtype=complex)
        for j in range(self.dim):
            out[:, j] = self.apply(cols[:, j])
        return out

    def norm_bound(self):
        """Cheap upper bound on ||H|| used to scale tolerances."""
        kmax = sum(float(np.max(np.abs(k))) for k in self.grid.momenta())
        if self.backend == "wilson_sparse":
            kmax = self.grid.dim * (1.0 / self.grid.h) \
                + self.grid.dim * 2 * self.grid.wilson_r / self.grid.h
        s_plus = 1.0 if self._S is None else self.spec.S.S_plus
        vmax = float(np.linalg.norm(self._V, 2, axis=(-2, -1)).max())
        return s_plus ** 2 * kmax + vmax

    # -- composition -----------------------------------------------------

    def with_extra_potential(self, field_values):
        """New handle with an additional pointwise Hermitian potential."""
        field_values = np.asarray(field_values, dtype=complex)
        want = self._spatial_shape + (self.comp, self.comp)
        if field_values.shape != want:
            raise InvalidInputError(f"potential field must have shape {want}")
        if self.backend == "wilson_sparse" and self._kin is None \
                and self.dim <= SPARSE_CAP:
            self.to_sparse()    # prime the shared kinetic factor once
        extra = field_values if self._extra is None else self._extra + field_values
        return OperatorHandle(self.spec, self._S, self._V0, extra_potential=extra,
                              _kinetic_sparse=self._kin)

    # -- exact spectra for structured operators ---------------------------

    def _lattice_symbol(self, k_axes):
        if self.backend == "fourier_symbol":
            return _exact_symbol(self.spec.clifford, k_axes)
        return _wilson_symbol(self.grid, self.spec.clifford, k_axes)

    def full_spectrum(self):
        """All eigenvalues, exactly, for constant or cell-periodic operators.

        Returns a sorted array, or None when the operator has no usable
        structure (e.g. a random potential is present).
        """
        if self.is_constant:
            s0, v0 = self.constant_blocks()
            sym = self._lattice_symbol(self.grid.momenta())
            if s0 is not None:
                sym = np.einsum("ij,...jk,kl->...il", s0, sym, s0)
            return np.sort(np.linalg.eigvalsh(sym + v0), axis=None)
        if self.is_cell_periodic:
            try:
                return np.sort(np.concatenate(
                    [np.linalg.eigvalsh(b) for _, b in self.cell_bloch_blocks()]))
            except ResourceLimitError:
                return None
        return None

    def _cell_context(self, block_cap=DENSE_CAP):
        if not self.is_cell_periodic:
            raise UnsupportedConfigError("bloch blocks need a cell-periodic operator")
        grid, n = self.grid, self.comp
        nc, d = grid.points_per_cell, grid.dim
        K = nc ** d
        if K * n > block_cap:
            raise ResourceLimitError("bloch block exceeds the dense cap")
        if getattr(self, "_cell_ctx", None) is not None:
            return self._cell_ctx
        cell_axis = (np.arange(nc) * grid.h) - np.floor(np.arange(nc) * grid.h + 0.5)
        umesh = np.stack(np.meshgrid(*([cell_axis] * d), indexing="ij"), axis=-1)
        sfield = None if self._S is None else self.spec.S.sample(umesh)
        vfield = self._sample_periodic_v(umesh)
        W1 = np.fft.fft(np.eye(nc), axis=0)
        W = W1
        for _ in range(d - 1):
            W = np.kron(W, W1)
        invW = W.conj().T / K
        base_k = 2 * np.pi * np.fft.fftfreq(nc, d=grid.h)
        self._cell_ctx = (K, base_k, W, invW, sfield, vfield)
        return self._cell_ctx

    def bloch_block_at(self, theta):
        """Dense Bloch block of a cell-periodic operator at one twist vector.

        The periodic box operator is unitarily equivalent to the direct sum of
        these blocks over the commensurate twists 2 pi m / cells; other twists
        sample the infinite-volume band structure.
        """
        K, base_k, W, invW, sfield, vfield = self._cell_context()
        n = self.comp
        k_axes = [base_k + theta[j] for j in range(self.grid.dim)]
        sym = self._lattice_symbol(k_axes).reshape(K, n, n)
        block = np.einsum("ik,kst,kj->isjt", invW, sym, W, optimize=True)
        if sfield is not None:
            sb = sfield.reshape(K, n, n)
            block = np.einsum("iab,ibjc->iajc", sb, block, optimize=True)
            block = np.einsum("iajb,jbc->iajc", block, sb, optimize=True)
        vb = vfield.reshape(K, n, n)
        idx = np.arange(K)
        block[idx, :, idx, :] += vb
        return block.reshape(K * n, K * n)

    def cell_bloch_blocks(self, block_cap=DENSE_CAP):
        """(twist, dense block) pairs over the box-commensurate twist grid."""
        self._cell_context(block_cap=block_cap)
        cells = self.grid.cells
        for m in np.ndindex(*((cells,) * self.grid.dim)):
            theta = 2 * np.pi * np.asarray(m) / cells
            yield theta, self.bloch_block_at(theta)

    def _sample_periodic_v(self, umesh):
        v = self.spec.V0.sample(umesh)
        if self.spec.gal is not None:
            v = v + self.spec.gal.sample(umesh, self.spec.clifford.mass_matrix)
        return v

    def bloch_eigenpairs(self, e_lo, e_hi):
        """Plane-wave eigenpairs with eigenvalue in [e_lo, e_hi].

        Only for constant-coefficient operators; vectors are l2-orthonormal
        columns.  Returns (values, vectors).
        """
        if not self.is_constant:
            raise UnsupportedConfigError("bloch eigenpairs need a constant operator")
        s0, v0 = self.constant_blocks()
        k_axes = self.grid.momenta()
        sym = self._lattice_symbol(k_axes)
        if s0 is not None:
            sym = np.einsum("ij,...jk,kl->...il", s0, sym, s0)
        vals, vecs = np.linalg.eigh(sym + v0)
        sel = np.argwhere((vals >= e_lo) & (vals <= e_hi))
        if len(sel) == 0:
            return np.empty(0), np.empty((self.dim, 0), dtype=complex)
        mesh = self.grid.coord_mesh()
        kmesh = np.stack(np.meshgrid(*k_axes, indexing="ij"), axis=-1)
        out_vals, out_vecs = [], []
        norm = np.sqrt(self.grid.n_nodes)
        for idx in sel:
            kidx, band = tuple(idx[:-1]), idx[-1]
            phase = np.exp(1j * np.tensordot(mesh, kmesh[kidx], axes=([-1], [0])))
            spinor = vecs[kidx][:, band]
            out_vals.append(vals[kidx][band])
            out_vecs.append((phase[..., None] * spinor).reshape(self.dim) / norm)
        order = np.argsort(out_vals)
        return (np.asarray(out_vals)[order],
                np.stack([out_vecs[i] for i in order], axis=1))


def build_model(spec: ModelSpec) -> OperatorHandle:
    """Sample the periodic fields on the grid and return an operator handle."""
    grid = spec.grid
    umesh = grid.cell_coords()
    s_field = None if spec.S.is_identity else spec.S.sample(umesh)
    if s_field is not None:
        _check_hermitian_field(s_field, "S")
        if not spec.S.check_bounds(umesh):
            raise InvalidInputError("coefficient field violates its bounds")
    v_field = spec.V0.sample(umesh).astype(complex)
    if spec.gal is not None:
        v_field = v_field + spec.gal.sample(umesh, spec.clifford.mass_matrix)
    _check_hermitian_field(v_field, "V0")
    return OperatorHandle(spec, s_field, v_field)


def _check_hermitian_field(field, label):
    flat = field.reshape(-1, field.shape[-1], field.shape[-1])
    dev = np.max(np.abs(flat - flat.conj().transpose(0, 2, 1)))
    if dev > 1e-10:
        raise InvalidInputError(f"{label} field is not Hermitian (dev={dev:.2e})")


def apply_hamiltonian(handle, v):
    """H v with an input-shape check; see OperatorHandle.apply."""
    return handle.apply(v)


def materialize_sparse(handle, cap=SPARSE_CAP):
    """Explicit sparse matrix of a wilson-backend handle."""
    return handle.to_sparse(cap=cap)
