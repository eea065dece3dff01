import numpy as np
import pytest

from diraclab.disorder import make_disorder_model
from diraclab.errors import PreconditionError
from diraclab.estimators import almost_sure_spectrum_scan, find_gap_edges
from diraclab.estimators.gaps import reduce_union_spectra
from diraclab.model import free_dirac_spec, gal_spec
from diraclab.operators import build_model
from diraclab.spectra import SpectralWindow


class TestFindGapEdges:
    def test_free_dirac_gap(self):
        spec = free_dirac_spec(mu=1.0, side=8, points_per_cell=8, buffer=0)
        rep = find_gap_edges(build_model(spec), SpectralWindow(-2.0, 2.0),
                             bins=100)
        assert rep.gap_found
        # exact symbol: edges land on +-mu up to solver roundoff
        assert abs(rep.B_minus + 1.0) < 1e-10
        assert abs(rep.B_plus - 1.0) < 1e-10
        assert rep.dos_bins.sum() > 0

    def test_gapless_flagged(self):
        spec = free_dirac_spec(mu=0.0, side=8, points_per_cell=4, buffer=0)
        rep = find_gap_edges(build_model(spec), SpectralWindow(-0.5, 0.5),
                             bins=24)
        assert not rep.gap_found

    def test_gal_halfgap_positive_below_beta(self):
        beta = 1.0
        spec = gal_spec(0.5, beta, side=6, points_per_cell=8)
        rep = find_gap_edges(build_model(spec), SpectralWindow(-0.45, 0.45),
                             bins=100)
        assert rep.gap_found
        half = 0.5 * (rep.B_plus - rep.B_minus)
        assert 0 < half < beta

    def test_deterministic(self):
        spec = gal_spec(0.5, 2.0, side=4, points_per_cell=8)
        h = build_model(spec)
        r1 = find_gap_edges(h, SpectralWindow(-0.6, 0.6), bins=64)
        r2 = find_gap_edges(h, SpectralWindow(-0.6, 0.6), bins=64)
        assert r1.B_minus == r2.B_minus and r1.B_plus == r2.B_plus
        assert np.array_equal(r1.dos_bins, r2.dos_bins)


class TestUnionReduce:
    def test_no_union_spectra_means_b_edges(self):
        spec = gal_spec(0.5, 2.0, side=4, points_per_cell=4)
        rep = reduce_union_spectra([np.empty(0)] * 4, -0.1, 0.1, spec.grid)
        assert rep.Btilde_minus == -0.1 and rep.Btilde_plus == 0.1

    def test_residual_gap_found(self):
        spec = gal_spec(0.5, 2.0, side=4, points_per_cell=4)
        rng = np.random.default_rng(0)
        # synthetic fill: states near both edges, residual hole (-0.04, 0.05)
        union = [np.sort(np.concatenate([
            rng.uniform(-0.1, -0.04, size=6), rng.uniform(0.05, 0.1, size=6)]))
            for _ in range(30)]
        rep = reduce_union_spectra(union, -0.1, 0.1, spec.grid, bins=100)
        assert -0.045 < rep.Btilde_minus < -0.035
        assert 0.045 < rep.Btilde_plus < 0.055
        assert rep.fill_lower is not None and rep.fill_upper is not None

    def test_min_count_suppresses_outliers(self):
        spec = gal_spec(0.5, 2.0, side=4, points_per_cell=4)
        union = [np.array([0.0])] + [np.empty(0)] * 20
        rep = reduce_union_spectra(union, -0.1, 0.1, spec.grid, bins=50,
                                   min_count=2)
        # the lone event is below the occupancy threshold
        assert rep.Btilde_minus == -0.1 and rep.Btilde_plus == 0.1


class TestSpectrumScan:
    def test_zero_coupling_keeps_edges(self):
        spec = gal_spec(0.5, 4.0, side=6, points_per_cell=4, buffer=4,
                        backend="wilson_sparse")
        dm = make_disorder_model(dim=2, comp=2, m=2.5, M=2.5, R=0.3,
                                 beta_tail=1.0)
        rep = almost_sure_spectrum_scan(spec, dm, n_samples=3,
                                        scan=SpectralWindow(-0.5, 0.5),
                                        coupling_scale=0.0)
        assert rep.Btilde_minus == rep.B_minus
        assert rep.Btilde_plus == rep.B_plus

    def test_needs_gap(self):
        spec = free_dirac_spec(mu=0.0, side=4, points_per_cell=2, buffer=4,
                               backend="wilson_sparse")
        dm = make_disorder_model(dim=2, comp=2)
        with pytest.raises(PreconditionError):
            almost_sure_spectrum_scan(spec, dm, n_samples=2,
                                      scan=SpectralWindow(-0.3, 0.3))

    def test_coupling_monotone_union_lipschitz(self):
        # along a coupling path the measured inner edges move by at most
        # max ||Delta V|| per step (spectrum stability oracle per realization)
        spec = gal_spec(0.5, 4.0, side=8, points_per_cell=4, buffer=4,
                        backend="wilson_sparse")
        dm = make_disorder_model(dim=2, comp=2, m=2.5, M=2.5, R=0.3,
                                 beta_tail=1.0)
        couplings = [0.0, 0.25, 0.5, 0.75, 1.0]
        reps = [almost_sure_spectrum_scan(spec, dm, n_samples=8,
                                          scan=SpectralWindow(-0.5, 0.5),
                                          base_seed=50, coupling_scale=c,
                                          min_count=1)
                for c in couplings]
        fills = [r.B_plus - r.Btilde_plus + r.Btilde_minus - r.B_minus
                 for r in reps]
        # monotone within a small tolerance for the Monte Carlo noise
        for a, b in zip(fills[:-1], fills[1:]):
            assert b >= a - 0.02
        # per-step continuity: edge motion bounded by the coupling step times
        # the potential bound, up to the union-histogram bin resolution
        bin_w = (reps[0].B_plus - reps[0].B_minus) / 400
        for (c1, r1), (c2, r2) in zip(zip(couplings[:-1], reps[:-1]),
                                      zip(couplings[1:], reps[1:])):
            bound = (c2 - c1) * dm.M_infinity + bin_w + 2e-8
            assert abs(r1.Btilde_plus - r2.Btilde_plus) <= bound
            assert abs(r1.Btilde_minus - r2.Btilde_minus) <= bound
