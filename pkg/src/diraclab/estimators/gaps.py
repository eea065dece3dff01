"""Gap location for the deterministic operator and the ensemble-union
spectrum of the randomly perturbed one."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..disorder import assemble_random_potential, sample_realization
from ..errors import PreconditionError
from ..operators import build_model
from ..spectra import SpectralWindow, eigs_window

# ensemble-union edge estimation (see README): bin the union spectrum at
# (B+ - B-)/400 and treat bins with fewer than 2 events as empty
UNION_BINS = 400
UNION_MIN_COUNT = 2


@dataclass
class GapReport:
    B_minus: Optional[float]
    B_plus: Optional[float]
    gap_found: bool
    dos_bins: np.ndarray
    bin_edges: np.ndarray
    Btilde_minus: Optional[float] = None
    Btilde_plus: Optional[float] = None
    fill_lower: Optional[np.ndarray] = None     # per-bin mean count, low side
    fill_upper: Optional[np.ndarray] = None
    fill_lower_se: Optional[np.ndarray] = None
    fill_upper_se: Optional[np.ndarray] = None
    n_samples: int = 0
    spectra: list = field(default_factory=list)
    notes: str = ""


def _block_vals(handle, theta, cache):
    key = tuple(np.round(theta, 12))
    if key not in cache:
        cache[key] = np.linalg.eigvalsh(handle.bloch_block_at(np.asarray(theta)))
    return cache[key]


def _refine_band_extremum(handle, side_of, c, theta0, step, cache,
                          rounds=12, shrink=3.0):
    """Locally minimize the distance from c to the band on one side by moving
    the twist vector; returns the refined band-edge value."""
    d = handle.grid.dim

    def val_at(theta):
        vals = _block_vals(handle, theta, cache)
        sel = vals > c if side_of > 0 else vals < c
        if not np.any(sel):
            return np.inf
        return float(vals[sel].min()) if side_of > 0 else -float(vals[sel].max())

    best_th = np.asarray(theta0, dtype=float)
    best = val_at(best_th)
    step0 = step
    offsets = np.stack(np.meshgrid(*([[-1.0, 0.0, 1.0]] * d), indexing="ij"),
                       axis=-1).reshape(-1, d)
    offsets = offsets[np.any(offsets != 0, axis=1)]
    stall = 0
    for _ in range(rounds):
        improved = False
        for off in offsets:
            th = best_th + step * off
            v = val_at(th)
            if v < best - 1e-15:
                best, best_th = v, th
                improved = True
        step /= shrink
        stall = 0 if improved else stall + 1
        # extrema sitting exactly on the grid (e.g. at Gamma) stabilize fast
        if stall >= 2 and step < step0 / shrink ** 2:
            break
        if not improved and step < 1e-6:
            break
    return best if side_of > 0 else -best


def bloch_band_edges(handle, center, coarse=6, cache=None):
    """Band values adjacent to ``center`` for the infinite-volume operator:
    coarse twist scan plus local refinement of both extrema.

    Returns (below, above); either can be None when no spectrum was seen on
    that side of ``center`` within the scanned bands.
    """
    cache = {} if cache is None else cache
    d = handle.grid.dim
    step = 2 * np.pi / coarse
    best_up, best_dn = (np.inf, None), (-np.inf, None)
    for m in np.ndindex(*((coarse,) * d)):
        th = step * np.asarray(m, dtype=float)
        vals = _block_vals(handle, th, cache)
        up = vals[vals > center]
        dn = vals[vals < center]
        if len(up) and up.min() < best_up[0]:
            best_up = (up.min(), th)
        if len(dn) and dn.max() > best_dn[0]:
            best_dn = (dn.max(), th)
    above = below = None
    if best_up[1] is not None:
        above = _refine_band_extremum(handle, +1, center, best_up[1], step, cache)
    if best_dn[1] is not None:
        below = _refine_band_extremum(handle, -1, center, best_dn[1], step, cache)
    return below, above


def _collect_spectrum(handle, scan: SpectralWindow, method="auto"):
    vals = handle.full_spectrum()
    if vals is not None:
        return vals[(vals >= scan.e_lo) & (vals <= scan.e_hi)], True
    res = eigs_window(handle, scan, method=method)
    return res.eigenvalues, res.complete and res.converged


def spectral_gap_about(handle, e0, method="auto"):
    """Nearest spectrum below and above e0: the edges of the gap holding e0.

    Cell-periodic handles are measured against the infinite-volume band
    structure (twist refinement), which is a superset of the box spectrum, so
    distances derived from these edges are conservative.  Returns
    (below, above); either side may be None when nothing was found there.
    """
    if getattr(handle, "is_constant", False):
        vals = handle.full_spectrum()
        below = vals[vals < e0]
        above = vals[vals > e0]
        return (float(below.max()) if len(below) else None,
                float(above.min()) if len(above) else None)
    if getattr(handle, "is_cell_periodic", False):
        return bloch_band_edges(handle, e0)
    from ..spectra import _chunk_shift_invert
    vals, _ = _chunk_shift_invert(handle, e0, min(8, handle.dim - 2), 0.0)
    below = vals[vals < e0]
    above = vals[vals > e0]
    return (float(below.max()) if len(below) else None,
            float(above.min()) if len(above) else None)


def find_gap_edges(handle, scan: SpectralWindow, bins: int = 200,
                   method="auto", bloch_refine=True) -> GapReport:
    """Widest empty sub-interval of the scan window plus a DOS histogram.

    Deterministic for a deterministic handle; flags (rather than errors) the
    no-gap case where every histogram bin is occupied.  For cell-periodic
    handles the selected edges are refined against the infinite-volume band
    structure (twist refinement), since finite-box band sampling is sparse.
    """
    vals, complete = _collect_spectrum(handle, scan, method=method)
    volume = handle.grid.cells ** handle.grid.dim if handle.grid else 1.0
    counts, edges = np.histogram(vals, bins=bins,
                                 range=(scan.e_lo, scan.e_hi))
    dos = counts / volume
    notes = "" if complete else "scan enumeration incomplete"
    if len(vals) == 0:
        return GapReport(None, None, False, dos, edges,
                         notes=notes + "; empty scan" if notes else "empty scan")
    if np.all(counts > 0):
        return GapReport(None, None, False, dos, edges,
                         notes=notes + "; no empty bin" if notes else "no empty bin")
    diffs = np.diff(vals)
    if len(diffs) == 0:
        return GapReport(None, None, False, dos, edges,
                         notes="single eigenvalue in scan")
    j = int(np.argmax(diffs))
    width_floor = 1e-12 * max(1.0, abs(scan.e_lo), abs(scan.e_hi))
    if diffs[j] <= width_floor:
        return GapReport(None, None, False, dos, edges,
                         notes="spectrum has no positive-width opening")
    b_lo, b_hi = float(vals[j]), float(vals[j + 1])
    if bloch_refine and not getattr(handle, "is_constant", True) \
            and getattr(handle, "is_cell_periodic", False):
        mid = 0.5 * (b_lo + b_hi)
        below, above = bloch_band_edges(handle, mid)
        if below is not None and above is not None and below < above:
            b_lo, b_hi = float(below), float(above)
            notes = (notes + "; " if notes else "") + "edges twist-refined"
    return GapReport(b_lo, b_hi, True, dos, edges, notes=notes)


def almost_sure_spectrum_scan(spec, dmodel, n_samples, scan: SpectralWindow,
                              base_seed=0, coupling_scale=1.0,
                              bins=UNION_BINS, min_count=UNION_MIN_COUNT,
                              keep_spectra=False, method="auto") -> GapReport:
    """Union of in-gap eigenvalues over an ensemble of realizations.

    Estimates the perturbed edges (Btilde-, Btilde+) as the boundaries of the
    widest residual empty interval inside the unperturbed gap, and reports the
    DOS fill profile of the newly created spectrum on both sides.
    """
    if n_samples < 1:
        raise PreconditionError("need at least one realization")
    h0 = build_model(spec)
    b_lo, b_hi = spectral_gap_about(h0, scan.center, method=method)
    if b_lo is None or b_hi is None or not b_lo < b_hi \
            or not scan.e_lo < b_lo < b_hi < scan.e_hi:
        raise PreconditionError("unperturbed gap absent in the scan window")
    margin = (b_hi - b_lo) / bins / 2
    window = SpectralWindow(b_lo + margin, b_hi - margin, max_pairs=scan.max_pairs)
    union = []
    for s in range(n_samples):
        real = sample_realization(dmodel, spec.grid, base_seed + s,
                                  coupling_scale=coupling_scale)
        h = h0.with_extra_potential(
            assemble_random_potential(real, dmodel, spec.grid).values)
        res = eigs_window(h, window, method=method)
        union.append(res.eigenvalues)
    return reduce_union_spectra(union, b_lo, b_hi, spec.grid, bins=bins,
                                min_count=min_count,
                                keep_spectra=keep_spectra)


def reduce_union_spectra(union, b_lo, b_hi, grid, bins=UNION_BINS,
                         min_count=UNION_MIN_COUNT, keep_spectra=False):
    """Residual-gap edges and fill profiles from per-realization spectra."""
    n_samples = len(union)
    allvals = np.concatenate(union) if union else np.empty(0)
    counts, edges = np.histogram(allvals, bins=bins, range=(b_lo, b_hi))
    occupied = counts >= min_count
    volume = grid.cells ** grid.dim
    report = GapReport(b_lo, b_hi, True, counts / (volume * max(n_samples, 1)),
                       edges, n_samples=n_samples,
                       spectra=list(union) if keep_spectra else [])
    if not occupied.any():
        report.Btilde_minus, report.Btilde_plus = b_lo, b_hi
        report.notes = "no new spectrum observed"
        return report
    # widest run of empty bins
    best_len, best_start, cur_start = 0, None, None
    for i, occ in enumerate(occupied):
        if not occ:
            if cur_start is None:
                cur_start = i
            if i - cur_start + 1 > best_len:
                best_len, best_start = i - cur_start + 1, cur_start
        else:
            cur_start = None
    if best_start is None:
        report.Btilde_minus = report.Btilde_plus = None
        report.notes = "gap filled completely"
        return report
    lo_edge, hi_edge = edges[best_start], edges[best_start + best_len]
    below = allvals[allvals <= lo_edge + 1e-15]
    above = allvals[allvals >= hi_edge - 1e-15]
    report.Btilde_minus = float(below.max()) if len(below) else b_lo
    report.Btilde_plus = float(above.min()) if len(above) else b_hi
    # fill profiles with per-bin Monte Carlo error bars
    lo_bins = edges[:-1] < report.Btilde_minus
    hi_bins = edges[1:] > report.Btilde_plus
    per_real = np.stack([np.histogram(u, bins=bins, range=(b_lo, b_hi))[0]
                         for u in union])
    mean, se = per_real.mean(axis=0), per_real.std(axis=0) / np.sqrt(n_samples)
    report.fill_lower, report.fill_lower_se = mean[lo_bins], se[lo_bins]
    report.fill_upper, report.fill_upper_se = mean[hi_bins], se[hi_bins]
    return report
