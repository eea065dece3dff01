"""Decay fits, dynamical moments, and the antidot gap scan."""

import numpy as np
import pytest

from diraclab.errors import InsufficientDataError
from diraclab.estimators import (dynamical_moment, eigenfunction_decay_fit,
                                 gal_gap_scan, unit_cell_state)
from diraclab.estimators.galscan import gal_half_gap
from diraclab.model import GridBox, free_dirac_spec
from diraclab.operators import build_model
from diraclab.spectra import SpectralWindow, eigs_window


def planted_state(grid, comp, rate):
    """exp(-rate |x|_sup) times a fixed spinor, l2-normalized."""
    dist = grid.sup_distance(grid.center)
    spinor = np.array([1.0, 0.5j]) / np.sqrt(1.25)
    psi = np.exp(-rate * dist)[..., None] * spinor
    psi = psi.reshape(-1)
    return psi / np.linalg.norm(psi)


class TestDecayFit:
    def test_recovers_planted_rate(self):
        grid = GridBox(center=(0, 0), side=20, points_per_cell=4, buffer=0)
        psi = planted_state(grid, 2, 0.5)
        fit = eigenfunction_decay_fit(grid, 2, psi, (0, 0))
        assert abs(fit.slope_m - 0.5) <= 0.02
        assert fit.r_squared > 0.99

    def test_extended_state_flat(self):
        grid = GridBox(center=(0, 0), side=20, points_per_cell=4, buffer=0)
        mesh = grid.coord_mesh()
        bloch = np.exp(1j * 0.7 * mesh[..., 0])[..., None] \
            * np.array([1.0, 1.0]) / np.sqrt(2)
        psi = bloch.reshape(-1)
        psi = psi / np.linalg.norm(psi)
        fit = eigenfunction_decay_fit(grid, 2, psi, (0, 0))
        assert abs(fit.slope_m) < 0.02

    def test_small_grid_refused(self):
        grid = GridBox(center=(0, 0), side=6, points_per_cell=4, buffer=0)
        psi = planted_state(grid, 2, 0.5)
        with pytest.raises(InsufficientDataError):
            eigenfunction_decay_fit(grid, 2, psi, (0, 0))

    def test_floor_exclusion(self):
        grid = GridBox(center=(0, 0), side=20, points_per_cell=2, buffer=0)
        psi = planted_state(grid, 2, 5.0)   # most cubes below the floor
        fit = eigenfunction_decay_fit(grid, 2, psi, (0, 0))
        assert fit.n_cubes < 20 ** 2
        assert fit.slope_m > 1.0


@pytest.fixture(scope="module")
def band_setup():
    spec = free_dirac_spec(mu=1.0, side=12, points_per_cell=4, buffer=0)
    h = build_model(spec)
    win = SpectralWindow(1.01, 1.25)
    pairs = eigs_window(h, win)
    psi0 = unit_cell_state(spec.grid, 2)
    return spec, h, win, pairs, psi0


class TestDynamicalMoment:
    def test_r0_constant_in_time(self, band_setup):
        spec, h, win, pairs, psi0 = band_setup
        rep = dynamical_moment(h, psi0, 0.0, win, np.linspace(0, 50, 9),
                               pairs=pairs)
        m = rep["moments"]
        assert np.abs(m - m[0]).max() <= 1e-10 * max(m[0], 1e-300)

    def test_free_ballistic_growth(self, band_setup):
        # delocalized control: the first moment grows monotonically before
        # the wavefront wraps around the box
        spec, h, win, pairs, psi0 = band_setup
        rep = dynamical_moment(h, psi0, 1.0, win, np.linspace(0.0, 5.0, 6),
                               pairs=pairs)
        m = rep["moments"]
        assert np.all(np.diff(m) > 0)


class TestGalScan:
    def test_alpha_one_box_profile_reduces_to_mass(self):
        hg, _ = gal_half_gap(1.0, 0.6, profile="box", support=0.5,
                             points_per_cell=8)
        assert abs(hg - 0.6) < 1e-8

    def test_beta_zero_gapless(self):
        assert gal_half_gap(0.5, 0.0)[0] == 0.0

    def test_scan_table_and_exponent(self):
        rows, fits = gal_gap_scan([0.25, 0.5], [0.2, 0.4],
                                  points_per_cell=8, ab_cap=0.5)
        assert len(rows) == 4
        assert all(r["half_gap"] > 0 for r in rows)
        assert "alpha_exponent" in fits
        # both exponents should sit near the quadratic/linear prediction
        assert abs(fits["alpha_exponent"]["value"] - 2.0) < 0.4
        assert abs(fits["beta_exponent"]["value"] - 1.0) < 0.3
        assert fits["C_prime"] > 0
