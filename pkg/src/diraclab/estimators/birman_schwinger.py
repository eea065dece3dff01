"""Coupling tuned to plant an in-gap eigenvalue, via the resolvent kernel
restricted to the support of a nonnegative potential, plus the monotone
eigenvalue-branch check."""

from __future__ import annotations

import numpy as np

from ..errors import DegeneratePotentialError, PreconditionError
from ..solvers import ShiftedSolver
from ..spectra import SpectralWindow, eigs_window

SUPPORT_FLOOR = 1e-14
SUPPORT_CAP = 4000


def _support_sqrt(field_values, comp):
    """Pointwise Hermitian square root on the support nodes.

    Returns (flat node indices, (K, n, n) sqrt blocks).
    """
    flat = field_values.reshape(-1, comp, comp)
    norms = np.linalg.norm(flat, 2, axis=(-2, -1))
    nodes = np.flatnonzero(norms > SUPPORT_FLOOR)
    if len(nodes) == 0:
        raise DegeneratePotentialError("potential is numerically zero")
    vals, vecs = np.linalg.eigh(flat[nodes])
    if vals.min() < -1e-10 * max(1.0, norms.max()):
        raise PreconditionError("potential must be nonnegative")
    roots = np.einsum("kij,kj,klj->kil", vecs, np.sqrt(np.clip(vals, 0, None)),
                      vecs.conj())
    return nodes, roots


def birman_schwinger_coupling(h0, u_field, mu, gap, n_branch=10,
                              verify_tol=1e-6, method="auto"):
    """tau_0 with H_0 + tau_0 u having an eigenvalue at mu, plus the branch check.

    Forms the dense restriction T(mu) = u^{1/2} (H0 - mu)^{-1} u^{1/2} on the
    support subspace, takes its largest-magnitude eigenvalue E_0, and sets
    tau_0 = -1/E_0.  Verifies by an eigensolve that the planted eigenvalue
    lands within ``verify_tol`` of mu, and sweeps tau over n_branch points to
    confirm the tracked in-gap branch is nondecreasing.
    """
    b_lo, b_hi = gap
    if not b_lo < mu < b_hi:
        raise PreconditionError(f"mu={mu} is outside the measured gap {gap}")
    values = u_field.values if hasattr(u_field, "values") else np.asarray(u_field)
    comp = h0.comp
    nodes, roots = _support_sqrt(values, comp)
    k_dim = len(nodes) * comp
    if k_dim > SUPPORT_CAP:
        raise PreconditionError(
            f"support subspace of dim {k_dim} exceeds the dense cap {SUPPORT_CAP}")
    solver = ShiftedSolver(h0, mu)
    t_mat = np.empty((k_dim, k_dim), dtype=complex)
    cols = np.zeros((h0.dim, k_dim), dtype=complex)
    for j in range(k_dim):
        node, a = divmod(j, comp)
        rhs = np.zeros(h0.dim, dtype=complex)
        base = nodes[node] * comp
        rhs[base:base + comp] = roots[node][:, a]
        cols[:, j] = solver(rhs)
    for i in range(k_dim):
        node, a = divmod(i, comp)
        base = nodes[node] * comp
        row_weight = roots[node][:, a].conj()
        t_mat[i, :] = row_weight @ cols[base:base + comp, :]
    t_mat = 0.5 * (t_mat + t_mat.conj().T)
    evals = np.linalg.eigvalsh(t_mat)
    e0 = evals[np.argmax(np.abs(evals))]
    if abs(e0) < 1e-12:
        raise DegeneratePotentialError("restricted resolvent kernel is zero")
    tau0 = -1.0 / float(e0)

    h_tau = h0.with_extra_potential(tau0 * values)
    margin = min(mu - b_lo, b_hi - mu)
    win = SpectralWindow(mu - 0.5 * margin, mu + 0.5 * margin, max_pairs=64)
    res = eigs_window(h_tau, win, method=method)
    if res.count == 0:
        raise DegeneratePotentialError("no in-gap eigenvalue appeared at tau_0")
    verified = float(res.eigenvalues[np.argmin(np.abs(res.eigenvalues - mu))])

    taus = np.linspace(min(0.0, tau0), max(0.0, tau0), n_branch)
    branch = _track_branch(h0, values, taus, tau0, verified, gap, method)
    return {"tau0": tau0, "verified_eigenvalue": verified,
            "verify_ok": abs(verified - mu) <= verify_tol,
            "branch_taus": taus, "branch": branch,
            "kernel_eigenvalue": float(e0), "support_dim": k_dim}


def _track_branch(h0, values, taus, tau0, e_at_tau0, gap, method):
    """Follow the in-gap eigenvalue nearest the planted one backwards from
    tau_0; entries are NaN before the branch detaches from the band."""
    b_lo, b_hi = gap
    pad = 1e-9 + 1e-6 * (b_hi - b_lo)
    win = SpectralWindow(b_lo + pad, b_hi - pad, max_pairs=128)
    branch = np.full(len(taus), np.nan)
    prev = e_at_tau0
    # walk from tau_0 toward 0 so nearest-tracking starts at the verified value
    for j in np.argsort(-np.abs(taus)):
        h = h0.with_extra_potential(taus[j] * values)
        res = eigs_window(h, win, method=method)
        if res.count == 0:
            continue
        vals = res.eigenvalues
        pick = vals[np.argmin(np.abs(vals - prev))]
        branch[j] = pick
        prev = pick
    return branch
