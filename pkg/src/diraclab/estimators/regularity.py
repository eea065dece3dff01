"""Box regularity, the initial-scale probability probe, and the scale-wise
multiscale recursion experiment.

A box of side L (in 6N) around x is called regular at energy E for mass m when
the belt-to-core resolvent block norm is at most exp(-m L / 2).  Verdicts use
the norm estimate times a 10 percent safety factor, because power iteration
estimates the norm from below.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..disorder import assemble_random_potential, sample_realization
from ..errors import IllPosedError, InvalidInputError, PreconditionError
from ..fitting import binomial_ci
from ..operators import build_model
from ..spectra import (ResolventProbe, nearest_eigenvalue_distance,
                       resolvent_block_norm)

SAFETY = 1.1
EPS_FALLBACK = 1e-8


def bracket_6n(L):
    """[L]_{6N}: the largest multiple of 6 that is <= L."""
    n = int(np.floor(L / 6)) * 6
    if n < 6:
        raise InvalidInputError(f"no multiple of 6 below {L}")
    return n


@dataclass(frozen=True)
class MsaSchedule:
    L0: int
    alpha: float
    zeta: float
    mass: float
    n_scales: int = 3

    def __post_init__(self):
        if self.L0 % 6 or self.L0 < 6:
            raise InvalidInputError("L0 must be a positive multiple of 6")
        if not 0 < self.zeta < 1:
            raise InvalidInputError("zeta must be in (0, 1)")
        if not 1 < self.alpha < 1 / self.zeta:
            raise InvalidInputError("alpha must be in (1, 1/zeta)")
        if self.mass <= 0:
            raise InvalidInputError("mass must be positive")

    def scales(self):
        out = [self.L0]
        while len(out) < self.n_scales:
            nxt = bracket_6n(out[-1] ** self.alpha)
            if nxt < out[-1] + 6:
                break
            out.append(nxt)
        return out

    def target(self, L):
        return 1.0 - np.exp(-float(L) ** self.zeta)


@dataclass
class RegularityCheck:
    regular: bool
    norm_estimate: float
    threshold: float
    eps_used: float
    spectral_distance: float

    def __bool__(self):
        return self.regular


def belt_core_norm(handle, x, L, e, rel_tol=1e-3,
                   known_distance=None):
    """||Gamma_{x,L} (H - E)^{-1} chi_{x,L/3}|| with the eps-offset policy."""
    grid = handle.grid
    belt = np.repeat(grid.belt_mask(x, L).ravel(), handle.comp)
    core = np.repeat(grid.box_mask(x, L / 3).ravel(), handle.comp)
    dist = known_distance
    if dist is None:
        dist = nearest_eigenvalue_distance(handle, e)
    if dist <= 1e-10:
        raise IllPosedError(f"E={e} is within 1e-10 of the box spectrum")
    eps = EPS_FALLBACK if dist < EPS_FALLBACK else 0.0
    probe = ResolventProbe(E=e, eps=eps, left_mask=belt, right_mask=core,
                           rel_tol=rel_tol, known_spectral_distance=dist)
    return resolvent_block_norm(handle, probe), eps, dist


def box_regularity(handle, x, L, e, m, rel_tol=1e-3,
                   known_distance=None) -> RegularityCheck:
    """Is the box (omega, m, E)-regular?  Records the raw norm and verdict."""
    if L % 6:
        raise InvalidInputError("regular boxes need L in 6N")
    norm, eps, dist = belt_core_norm(handle, x, L, e, rel_tol=rel_tol,
                                     known_distance=known_distance)
    threshold = float(np.exp(-m * L / 2))
    return RegularityCheck(regular=bool(SAFETY * norm <= threshold),
                           norm_estimate=norm, threshold=threshold,
                           eps_used=eps, spectral_distance=dist)


def _box_handle(spec, dmodel, center, L, seed, coupling_scale):
    grid = replace(spec.grid, center=tuple(center), side=L)
    lspec = replace(spec, grid=grid)
    h0 = build_model(lspec)
    if coupling_scale == 0 or dmodel is None:
        return h0
    real = sample_realization(dmodel, grid, seed, coupling_scale=coupling_scale)
    return h0.with_extra_potential(
        assemble_random_potential(real, dmodel, grid).values)


def h1_probe(spec, dmodel, e0, L0, theta, n_samples, base_seed=0,
             coupling_scale=1.0, nu=0.9, edges=None, rel_tol=1e-3):
    """Estimate P{belt-core norm at E0 <= L0^(-theta)} on boxes of side L0.

    ``edges`` (the measured perturbed edges) activates the band-edge proximity
    precondition |E0 - edge| <= L0^(nu-2); pass None for the disorder-free
    control where those edges do not exist.
    """
    if L0 % 6:
        raise PreconditionError("L0 must be a multiple of 6")
    if edges is not None:
        prox = L0 ** (nu - 2.0)
        d_edge = min(abs(e0 - b) for b in edges if b is not None)
        if d_edge > prox + 1e-12:
            raise PreconditionError(
                f"E0 is {d_edge:.3g} from the nearest edge; needs <= {prox:.3g}")
    threshold = 1.0 - 1.0 / 841 ** spec.grid.dim
    cut = L0 ** (-float(theta))
    n_eff = 1 if coupling_scale == 0 else n_samples
    successes = 0
    norms = []
    for s in range(n_eff):
        h = _box_handle(spec, dmodel, spec.grid.center, L0, base_seed + s,
                        coupling_scale)
        try:
            norm, _, _ = belt_core_norm(h, spec.grid.center, L0, e0,
                                        rel_tol=rel_tol)
        except IllPosedError:
            norm = np.inf
        norms.append(norm)
        if SAFETY * norm <= cut:
            successes += 1
    prob, lo, hi = binomial_ci(successes, n_eff)
    se = (hi - lo) / (2 * 1.96) if n_eff else 0.0
    threshold_pass = (prob - 2 * se) > threshold
    inconclusive = (not threshold_pass) and (prob + 2 * se > threshold)
    return {"prob": prob, "threshold": threshold, "threshold_pass": threshold_pass,
            "inconclusive": inconclusive, "n_samples": n_eff, "cut": cut,
            "norms": norms, "ci": (lo, hi)}


def msa_event(spec, dmodel, L, x, y, energies, mass, seed, coupling_scale,
              rel_tol=1e-3):
    """One realization of R(m, L, I, x, y): for every sampled energy, at least
    one of the two boxes is regular."""
    hx = _box_handle(spec, dmodel, x, L, seed, coupling_scale)
    hy = _box_handle(spec, dmodel, y, L, seed, coupling_scale)
    for e in energies:
        ok = False
        for h, c in ((hx, x), (hy, y)):
            try:
                if box_regularity(h, c, L, e, mass, rel_tol=rel_tol).regular:
                    ok = True
                    break
            except IllPosedError:
                continue
        if not ok:
            return False
    return True


def msa_probe(schedule: MsaSchedule, spec, dmodel, interval, pairs,
              n_samples, base_seed=0, coupling_scale=1.0, e_points=21,
              rel_tol=1e-3):
    """Scale-wise empirical P{R(m, L_k, I, x, y)} against 1 - exp(-L_k^zeta).

    Never claims the full induction: each scale is reported on its own, with
    a binomial confidence interval and the energy grid density used.
    """
    e_lo, e_hi = interval
    energies = np.linspace(e_lo, e_hi, e_points)
    out = []
    for k, L in enumerate(schedule.scales()):
        x, y = pairs[min(k, len(pairs) - 1)]
        if max(abs(np.asarray(x) - np.asarray(y))) <= L:
            raise InvalidInputError(
                f"boxes at {x}, {y} overlap at scale {L} (need |x-y| > L)")
        n_eff = 1 if coupling_scale == 0 else n_samples
        hits = sum(
            msa_event(spec, dmodel, L, x, y, energies, schedule.mass,
                      base_seed + s, coupling_scale, rel_tol=rel_tol)
            for s in range(n_eff))
        prob, lo, hi = binomial_ci(hits, n_eff)
        out.append({"scale": L, "prob": prob, "ci": (lo, hi),
                    "target": schedule.target(L), "n_samples": n_eff,
                    "e_points": e_points})
    return out
