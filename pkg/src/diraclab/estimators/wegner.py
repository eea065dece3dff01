"""Monte Carlo verification of the eigenvalue-counting estimates: linearity of
P{dist(spectrum, E0) < eta} in eta and of the expected trace of the spectral
projector in the box volume."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..disorder import assemble_random_potential, sample_realization
from ..errors import PreconditionError
from ..fitting import binomial_ci, linear_fit
from ..operators import build_model
from ..spectra import SpectralWindow, eigs_window
from .gaps import spectral_gap_about


@dataclass
class WegnerRecord:
    E0: float
    eta: float
    L: int
    n_samples: int
    hit_count: int
    mean_trace: float

    @property
    def hit_prob(self):
        return self.hit_count / self.n_samples if self.n_samples else 0.0

    def ci(self):
        return binomial_ci(self.hit_count, self.n_samples)


def check_wegner_preconditions(h0, e0, eta_list):
    """E0 must sit in the unperturbed gap with every eta below half the
    spectral distance; returns that distance."""
    below, above = spectral_gap_about(h0, e0)
    if below is None or above is None or not below < e0 < above:
        raise PreconditionError("E0 is not inside the unperturbed gap")
    dist0 = min(e0 - below, above - e0)
    for eta in eta_list:
        if eta >= 0.5 * dist0:
            raise PreconditionError(
                f"eta={eta} is not below half the spectral distance {dist0}")
    return dist0


def wegner_item(spec, dmodel, e0, eta_list, seed, coupling_scale=1.0,
                method="auto", h0=None):
    """One realization: nearest spectral distance to E0 and per-eta counts."""
    if h0 is None:
        h0 = build_model(spec)
    eta_max = max(eta_list)
    real = sample_realization(dmodel, spec.grid, seed,
                              coupling_scale=coupling_scale)
    h = h0.with_extra_potential(
        assemble_random_potential(real, dmodel, spec.grid).values)
    res = eigs_window(h, SpectralWindow(e0 - eta_max, e0 + eta_max),
                      method=method)
    vals = res.eigenvalues
    dist = float(np.abs(vals - e0).min()) if len(vals) else np.inf
    counts = {eta: int(np.sum(np.abs(vals - e0) <= eta)) for eta in eta_list}
    return {"seed": seed, "dist": dist, "counts": counts,
            "complete": res.complete and res.converged}


def wegner_probe(spec, dmodel, e0, eta_list, L_list, n_samples,
                 base_seed=0, coupling_scale=1.0, method="auto"):
    """Wegner / eigenvalue-counting experiment over (eta, L) grids.

    Returns (records, fits): one WegnerRecord per (eta, L) pair, plus fitted
    exponents of hit probability in eta (per L) and of the mean trace in the
    box volume (per eta), each with then standard errors.
    """
    eta_list = sorted(eta_list)
    records = []
    items = {}
    for L in L_list:
        lspec = replace(spec, grid=replace(spec.grid, side=L))
        h0 = build_model(lspec)
        check_wegner_preconditions(h0, e0, eta_list)
        rows = [wegner_item(lspec, dmodel, e0, eta_list, base_seed + s,
                            coupling_scale=coupling_scale, method=method,
                            h0=h0)
                for s in range(n_samples)]
        items[L] = rows
        for eta in eta_list:
            hits = sum(1 for r in rows if r["dist"] < eta)
            mean_trace = float(np.mean([r["counts"][eta] for r in rows]))
            records.append(WegnerRecord(E0=e0, eta=eta, L=L,
                                        n_samples=n_samples, hit_count=hits,
                                        mean_trace=mean_trace))
    fits = wegner_fits(records, spec.grid.dim)
    return records, fits


def wegner_fits(records, dim):
    """Log-log exponents: hit probability vs eta, mean trace vs volume L^d."""
    fits = {"eta_exponent": {}, "volume_exponent": {}}
    Ls = sorted({r.L for r in records})
    etas = sorted({r.eta for r in records})
    for L in Ls:
        pts = [(r.eta, r.hit_prob) for r in records if r.L == L and r.hit_prob > 0]
        if len(pts) >= 2:
            x, y = np.log([p[0] for p in pts]), np.log([p[1] for p in pts])
            slope, _, r2, se = linear_fit(x, y)
            fits["eta_exponent"][L] = {"exponent": slope, "se": se, "r2": r2,
                                       "n_points": len(pts)}
    for eta in etas:
        pts = [(r.L, r.mean_trace) for r in records
               if r.eta == eta and r.mean_trace > 0]
        if len(pts) >= 2:
            x = dim * np.log([p[0] for p in pts])   # log |Lambda| = d log L
            y = np.log([p[1] for p in pts])
            slope, _, r2, se = linear_fit(x, y)
            fits["volume_exponent"][eta] = {"exponent": slope, "se": se,
                                            "r2": r2, "n_points": len(pts)}
    return fits
