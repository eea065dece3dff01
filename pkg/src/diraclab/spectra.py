"""Spectral services: interior eigensolves in an energy window, resolvent
block-norm probes, filtered time evolution, Hausdorff distance of spectra.

The window eigensolver enumerates eigenpairs by spectrum slicing: repeated
shift-invert Lanczos runs whose covered radii tile the window.  Small problems
fall back to dense diagonalization and constant-coefficient operators to exact
plane-wave eigenpairs; all paths return the same result type.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse.linalg as spla

from .errors import (IllPosedError, IncompleteProjectorError,
                     InvalidInputError, ResourceLimitError, SolverFailureError)
from .solvers import ShiftedSolver

DENSE_EIGS_CAP = 1024
DENSE_EIGS_CAP_SPARSE = 600   # sparse-capable handles prefer shift-invert


@dataclass(frozen=True)
class SpectralWindow:
    e_lo: float
    e_hi: float
    max_pairs: int = 600

    def __post_init__(self):
        if not self.e_lo < self.e_hi:
            raise InvalidInputError("window must have positive width")

    @property
    def center(self):
        return 0.5 * (self.e_lo + self.e_hi)

    @property
    def width(self):
        return self.e_hi - self.e_lo


@dataclass
class SpectralResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray       # l2-orthonormal columns
    residuals: np.ndarray
    converged: bool                # solver health
    complete: bool                 # every window eigenvalue enumerated
    solver_stats: dict = field(default_factory=dict)

    @property
    def count(self):
        return len(self.eigenvalues)


def _residuals(handle, vals, vecs):
    res = np.empty(len(vals))
    for j in range(len(vals)):
        res[j] = np.linalg.norm(handle.apply(vecs[:, j]) - vals[j] * vecs[:, j])
    return res


def _result(handle, vals, vecs, complete, converged, stats):
    order = np.argsort(vals)
    vals = np.asarray(vals)[order]
    vecs = vecs[:, order] if vecs.size else vecs
    res = _residuals(handle, vals, vecs) if len(vals) else np.empty(0)
    return SpectralResult(eigenvalues=vals, eigenvectors=vecs, residuals=res,
                          converged=converged, complete=complete,
                          solver_stats=stats)


def _dense_window(handle, window):
    mat = handle.to_dense()
    vals, vecs = np.linalg.eigh(mat)
    sel = (vals >= window.e_lo) & (vals <= window.e_hi)
    vals, vecs = vals[sel], vecs[:, sel]
    complete = True
    if len(vals) > window.max_pairs:
        vals, vecs = vals[:window.max_pairs], vecs[:, :window.max_pairs]
        complete = False
    return _result(handle, vals, vecs, complete, True, {"method": "dense"})


def _chunk_shift_invert(handle, sigma, k, tol):
    solver = ShiftedSolver(handle, sigma)
    A = spla.LinearOperator((handle.dim, handle.dim), matvec=handle.apply,
                            dtype=complex)
    # deterministic Lanczos start: results must not depend on process state
    v0 = np.random.Generator(np.random.Philox(key=0xA5EED)).normal(
        size=handle.dim)
    vals, vecs = spla.eigsh(A, k=k, sigma=sigma, OPinv=solver.as_linear_operator(),
                            which="LM", mode="normal", tol=tol, v0=v0)
    return vals, vecs


def eigs_window(handle, window: SpectralWindow, tol=0.0, chunk=24,
                method="auto", max_sigma_probes=60):
    """All eigenpairs of a Hermitian handle inside [e_lo, e_hi].

    ``method``: "auto" picks dense for small problems, exact plane-wave
    decomposition for constant-coefficient operators, and shift-invert
    slicing otherwise.  Non-convergence and window caps are flagged, never
    silently truncated.
    """
    if method == "auto":
        has_sparse = getattr(handle, "backend", "") == "wilson_sparse" \
            or type(handle).__name__ == "MatrixHandle"
        cap = DENSE_EIGS_CAP_SPARSE if has_sparse else DENSE_EIGS_CAP
        if getattr(handle, "is_constant", False):
            method = "bloch"
        elif handle.dim <= cap:
            method = "dense"
        else:
            method = "shift_invert"
    if method == "dense":
        return _dense_window(handle, window)
    if method == "bloch":
        vals, vecs = handle.bloch_eigenpairs(window.e_lo, window.e_hi)
        complete = True
        if len(vals) > window.max_pairs:
            vals, vecs = vals[:window.max_pairs], vecs[:, :window.max_pairs]
            complete = False
        return _result(handle, vals, vecs, complete, True, {"method": "bloch"})

    # spectrum slicing with shift-invert chunks
    scale = max(1.0, abs(window.e_lo), abs(window.e_hi))
    dedup_tol = 1e-9 * scale
    pending = [(window.e_lo, window.e_hi)]
    acc_vals, acc_vecs = [], []
    probes = 0
    converged = True
    while pending and probes < max_sigma_probes:
        a, b = pending.pop()
        if b - a <= 0:
            continue
        sigma = 0.5 * (a + b)
        k = min(chunk, handle.dim - 2)
        vals = None
        for attempt, sig in enumerate((sigma, sigma + 0.01 * (b - a) + 1e-9)):
            try:
                vals, vecs = _chunk_shift_invert(handle, sig, k, tol)
                sigma = sig
                break
            except (SolverFailureError, RuntimeError,
                    spla.ArpackNoConvergence, np.linalg.LinAlgError):
                continue
        probes += 1
        if vals is None:
            raise SolverFailureError(
                f"shift-invert failed twice near sigma={sigma}")
        dist = np.abs(vals - sigma)
        r_cov = dist.max()
        if len(vals) < k or r_cov == 0:
            r_cov = np.inf
        for j in range(len(vals)):
            v = vals[j]
            if not window.e_lo <= v <= window.e_hi:
                continue
            dup = False
            for i, u in enumerate(acc_vals):
                if abs(u - v) < dedup_tol and \
                        abs(np.vdot(acc_vecs[i], vecs[:, j])) > 0.5:
                    dup = True
                    break
            if not dup:
                acc_vals.append(v)
                acc_vecs.append(vecs[:, j])
        if len(acc_vals) > window.max_pairs:
            pending = []
            converged = False
            break
        eps = r_cov * 1e-12 + 1e-14
        if sigma - r_cov > a:
            pending.append((a, sigma - r_cov + eps))
        if sigma + r_cov < b:
            pending.append((sigma + r_cov - eps, b))
    complete = converged and not pending and probes < max_sigma_probes
    if pending or probes >= max_sigma_probes:
        converged = False
    vecs = np.stack(acc_vecs, axis=1) if acc_vals else \
        np.empty((handle.dim, 0), dtype=complex)
    out = _result(handle, np.asarray(acc_vals), vecs, complete, converged,
                  {"method": "shift_invert", "sigma_probes": probes})
    _polish_orthonormality(out)
    return out


def _polish_orthonormality(result, tol=1e-8):
    """Cross-chunk duplicates of degenerate pairs can lose orthogonality;
    re-orthonormalize inside eigenvalue clusters when needed."""
    vals, vecs = result.eigenvalues, result.eigenvectors
    if vecs.shape[1] < 2:
        return
    gram = vecs.conj().T @ vecs
    if np.abs(gram - np.eye(vecs.shape[1])).max() <= tol:
        return
    j = 0
    while j < len(vals):
        k = j + 1
        while k < len(vals) and vals[k] - vals[j] < 1e-7 * max(1, abs(vals[j])):
            k += 1
        if k - j > 1:
            q, _ = np.linalg.qr(vecs[:, j:k])
            vecs[:, j:k] = q
        j = k


def nearest_eigenvalue_distance(handle, e, method="auto"):
    """Distance from e to the spectrum (nearest eigenvalue probe)."""
    cached = getattr(handle, "_eigs_cache", None)
    if cached is not None:
        return float(np.abs(cached - e).min())
    if getattr(handle, "is_constant", False):
        spec = handle.full_spectrum()
        handle._eigs_cache = spec
        return float(np.abs(spec - e).min())
    if handle.dim <= DENSE_EIGS_CAP or method == "dense":
        spec = np.linalg.eigvalsh(handle.to_dense())
        handle._eigs_cache = spec
        return float(np.abs(spec - e).min())
    try:
        vals, _ = _chunk_shift_invert(handle, e, 1, 0.0)
        return float(np.abs(vals - e).min())
    except (RuntimeError, spla.ArpackNoConvergence):
        # factorization breakdown is itself evidence of a collision
        return 0.0


@dataclass
class ResolventProbe:
    """Spec of a block-norm probe ||mask_L (H-E-i eps)^{-1} mask_R||."""

    E: float
    left_mask: np.ndarray          # flat bool over handle.dim
    right_mask: np.ndarray
    eps: float = 0.0
    mode: str = "operator_norm"
    rel_tol: float = 1e-3
    max_iters: int = 500
    restarts: int = 3
    known_spectral_distance: Optional[float] = None
    solves: dict = field(default_factory=dict)


def resolvent_block_norm(handle, probe: ResolventProbe):
    """Largest singular value (or trace norm) of the masked resolvent block.

    Operator-norm mode estimates from below by power iteration on the
    composed map, relative tolerance ``probe.rel_tol``; trace-norm mode is
    exact dense SVD and is limited to small problems.
    """
    if probe.eps < 0:
        raise InvalidInputError("eps must be nonnegative")
    if probe.eps == 0:
        dist = probe.known_spectral_distance
        if dist is None:
            dist = nearest_eigenvalue_distance(handle, probe.E)
        if dist <= 1e-10:
            raise IllPosedError(
                f"E={probe.E} is within 1e-10 of the spectrum; use eps > 0")
    z = probe.E + 1j * probe.eps
    if probe.mode == "trace_norm":
        if handle.dim > 4000:
            raise ResourceLimitError("trace-norm mode is dense-only (dim <= 4000)")
        mat = handle.to_dense()
        rows = np.flatnonzero(probe.left_mask)
        cols = np.flatnonzero(probe.right_mask)
        # singular values of (chi_L R chi_R) equal those of its adjoint;
        # solve from whichever side has fewer columns
        if len(cols) > len(rows):
            rows, cols = cols, rows
            z = np.conj(z)
        rhs = np.zeros((handle.dim, len(cols)), dtype=complex)
        rhs[cols, np.arange(len(cols))] = 1.0
        block = np.linalg.solve(mat - z * np.eye(handle.dim), rhs)[rows, :]
        sv = np.linalg.svd(block, compute_uv=False)
        probe.solves = {"mode": "trace_norm", "cols": len(cols)}
        return float(sv.sum())
    if probe.mode != "operator_norm":
        raise InvalidInputError(f"unknown probe mode {probe.mode!r}")

    solver = ShiftedSolver(handle, z)
    mL = probe.left_mask.astype(float)
    mR = probe.right_mask.astype(float)

    def fwd(v):
        return mL * solver(mR * v)

    def adj(w):
        return mR * solver.adjoint(mL * w)

    rng = np.random.Generator(np.random.Philox(key=0xB10C))
    best = 0.0
    total_iters = 0
    for _ in range(probe.restarts):
        v = rng.normal(size=handle.dim) + 1j * rng.normal(size=handle.dim)
        v *= probe.right_mask
        nv = np.linalg.norm(v)
        if nv == 0:
            continue
        v /= nv
        prev = 0.0
        for _ in range(probe.max_iters):
            total_iters += 1
            w = fwd(v)
            s = np.linalg.norm(w)
            if s == 0:
                break
            u = adj(w)
            nu = np.linalg.norm(u)
            if nu == 0:
                break
            v = u / nu
            if abs(s - prev) <= probe.rel_tol * max(s, 1e-300):
                prev = s
                break
            prev = s
        best = max(best, prev)
    probe.solves = {"mode": "operator_norm", "iterations": total_iters,
                    "restarts": probe.restarts}
    return float(best)


def evolve_in_window(handle, psi, window: SpectralWindow, t,
                     pairs: Optional[SpectralResult] = None):
    """E(J) e^{-iHt} psi via the window eigenpairs.

    Refuses when the window was not fully resolved, since the projector
    would silently be wrong.
    """
    if pairs is None:
        pairs = eigs_window(handle, window)
    if not (pairs.converged and pairs.complete):
        raise IncompleteProjectorError("window eigensolve incomplete")
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (handle.dim,):
        raise InvalidInputError("state shape mismatch")
    coeff = pairs.eigenvectors.conj().T @ psi
    phases = np.exp(-1j * pairs.eigenvalues * t)
    return pairs.eigenvectors @ (phases * coeff)


def hausdorff_spectrum_distance(spec_a, spec_b):
    """Hausdorff distance of two finite sorted spectra, by merge walk."""
    a = np.asarray(spec_a, dtype=float)
    b = np.asarray(spec_b, dtype=float)
    if len(a) == 0 or len(b) == 0:
        raise InvalidInputError("spectra must be non-empty")
    if np.any(np.diff(a) < 0) or np.any(np.diff(b) < 0):
        raise InvalidInputError("spectra must be sorted")

    def one_sided(x, y):
        # sup over x of dist(x, y); two-pointer over sorted arrays
        best = 0.0
        j = 0
        for xv in x:
            while j + 1 < len(y) and abs(y[j + 1] - xv) <= abs(y[j] - xv):
                j += 1
            best = max(best, abs(y[j] - xv))
        return best

    return max(one_sided(a, b), one_sided(b, a))
