"""Exponential decay fits of eigenfunctions in the unit-cube L2 sense."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InsufficientDataError
from ..fitting import linear_fit

NORM_FLOOR = 1e-13


@dataclass
class DecayFit:
    center: tuple
    distances: np.ndarray
    log_norms: np.ndarray
    slope_m: float          # decay rate (positive = localized)
    log_c: float
    r_squared: float
    n_cubes: int


def cube_norms(grid, comp, psi):
    """L2 mass of psi per side-1 cube centered at integer lattice points.

    Cube labels are wrapped periodically, so the two half-cubes straddling
    the wrap seam merge into one full cube.  Returns (cube_centers (K, d)
    int, norms (K,)) with the physical h^{d/2} factor included.
    """
    labels = grid.cube_index_mesh().reshape(-1, grid.dim)
    cells = grid.cells
    center = np.asarray(grid.center)
    labels = (labels - center + cells // 2) % cells - cells // 2 + center
    dens = np.abs(np.asarray(psi).reshape(-1, comp)) ** 2
    mass = dens.sum(axis=1)
    uniq, inv = np.unique(labels, axis=0, return_inverse=True)
    sums = np.zeros(len(uniq))
    np.add.at(sums, inv, mass)
    return uniq, np.sqrt(sums * grid.h ** grid.dim)


def torus_cube_distance(labels, center, cells):
    """Sup distance from cube labels to the center on the periodic box."""
    diff = np.asarray(labels) - np.asarray(center)
    diff = (diff + cells // 2) % cells - cells // 2
    return np.max(np.abs(diff), axis=-1)


def eigenfunction_decay_fit(grid, comp, psi, center) -> DecayFit:
    """Regress log ||chi_x psi|| against the sup distance |x - center|.

    Distances are taken on the periodic box (torus metric), so every center
    sees cells/2 cubes in each direction.  Cubes below the floating-point
    floor are excluded; the returned slope is -m with m > 0 meaning
    exponential decay.
    """
    min_cover = 8
    if grid.cells // 2 < min_cover:
        raise InsufficientDataError(
            f"box covers only {grid.cells // 2} cells beyond any center "
            f"(need >= {min_cover})")
    centers, norms = cube_norms(grid, comp, psi)
    dist = torus_cube_distance(centers, center, grid.cells)
    keep = norms > NORM_FLOOR
    if keep.sum() < 4:
        raise InsufficientDataError("fewer than 4 cubes above the norm floor")
    x = dist[keep].astype(float)
    y = np.log(norms[keep])
    slope, intercept, r2, _ = linear_fit(x, y)
    return DecayFit(center=tuple(center), distances=x, log_norms=y,
                    slope_m=-slope, log_c=intercept, r_squared=r2,
                    n_cubes=int(keep.sum()))


def localization_center(grid, comp, psi):
    """Cube with the largest L2 mass; used as the fit origin."""
    centers, norms = cube_norms(grid, comp, psi)
    return tuple(int(c) for c in centers[int(np.argmax(norms))])
