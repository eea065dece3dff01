"""Disorder-averaged spectral projector bound on small dense operators.

The integrand lambda -> B E_lambda(J) B is piecewise smooth with breakpoints
exactly where an eigenvalue of H0 + lambda V crosses a boundary of J.  With V
positive definite those couplings are the real eigenvalues of the pencil
(boundary - H0, V), so the integral is done by per-piece Gauss quadrature with
every node a full diagonalization.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as la

from ..errors import InvalidInputError

DIM_CAP = 500


def _crossings(h0, v, boundary, lo, hi):
    vmin = np.linalg.eigvalsh(v).min()
    if vmin <= 1e-12:
        return None
    lam = la.eigh(boundary * np.eye(len(h0)) - h0, v, eigvals_only=True)
    return lam[(lam > lo) & (lam < hi)]


def _projector_onto(vals, vecs, j_lo, j_hi):
    sel = (vals >= j_lo) & (vals <= j_hi)
    u = vecs[:, sel]
    return u @ u.conj().T


def _averaged_block(h0, v, b, density, j_lo, j_hi, nodes_per_piece):
    lo, hi = -density.m, density.M
    pieces = [lo, hi]
    for boundary in (j_lo, j_hi):
        cr = _crossings(h0, v, boundary, lo, hi)
        if cr is None:
            # singular V: no pencil; fall back to a fine uniform splitting
            pieces.extend(np.linspace(lo, hi, 257)[1:-1])
            break
        pieces.extend(cr.tolist())
    pts = np.unique(np.clip(np.asarray(pieces, dtype=float), lo, hi))
    xg, wg = np.polynomial.legendre.leggauss(nodes_per_piece)
    acc = np.zeros_like(np.asarray(h0, dtype=complex))
    for a, c in zip(pts[:-1], pts[1:]):
        if c - a <= 0:
            continue
        mid, half = 0.5 * (a + c), 0.5 * (c - a)
        for x, w in zip(xg, wg):
            lam = mid + half * x
            vals, vecs = np.linalg.eigh(h0 + lam * v)
            p = _projector_onto(vals, vecs, j_lo, j_hi)
            acc += (w * half * density.pdf(lam)) * (b @ p @ b)
    return acc


def spectral_averaging_check(h0, v, b, density, interval, quad_points=10,
                             c0=None):
    """Verify || integral h(lambda) B E_lambda(J) B dlambda || <= |J| ||h|| / c0.

    ``c0`` must certify V - c0 B^2 >= 0 (eigenvalue check); pass None to use
    half the largest admissible value.  Also reports the refinement drift when
    the per-piece quadrature order is doubled.
    """
    h0 = np.asarray(h0, dtype=complex)
    v = np.asarray(v, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if h0.shape[0] > DIM_CAP:
        raise InvalidInputError(f"dense dimension cap {DIM_CAP} exceeded")
    j_lo, j_hi = interval
    if j_hi < j_lo:
        raise InvalidInputError("interval must be ordered")
    b2 = b @ b.conj().T
    if c0 is None:
        # largest c with V - c B^2 >= 0, halved for quadrature headroom
        ev = la.eigh(v, b2 + 1e-14 * np.eye(len(v)), eigvals_only=True)
        c0 = 0.5 * float(ev.min())
    if c0 <= 0:
        raise InvalidInputError("need a positive certificate constant c0")
    cert = np.linalg.eigvalsh(v - c0 * b2).min()
    if cert < -1e-10 * max(1.0, np.linalg.norm(v, 2)):
        raise InvalidInputError(f"certificate V - c0 B^2 >= 0 fails ({cert:.2e})")
    coarse = _averaged_block(h0, v, b, density, j_lo, j_hi, quad_points)
    fine = _averaged_block(h0, v, b, density, j_lo, j_hi, 2 * quad_points)
    lhs = float(np.linalg.norm(fine, 2))
    drift = float(np.linalg.norm(fine - coarse, 2))
    sup_h = density.sup_pdf()
    bound = (j_hi - j_lo) * sup_h / c0
    return {"lhs_norm": lhs, "bound": bound, "c0": c0,
            "passes": bool(lhs <= bound * (1 + 1e-6)),
            "refinement_drift": drift, "quad_points": quad_points}
