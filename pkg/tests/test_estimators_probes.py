"""Resolvent-decay, planted-coupling, spectral-averaging, and edge-distance
estimator tests on desk-size fixtures."""

import numpy as np
import pytest

from diraclab.disorder import UniformDensity, make_disorder_model
from diraclab.errors import (DegeneratePotentialError, InvalidInputError,
                             PreconditionError)
from diraclab.estimators import (birman_schwinger_coupling,
                                 combes_thomas_probe, default_mask_pairs,
                                 spectral_averaging_check)
from diraclab.estimators.edges import edge_distance_probe
from diraclab.model import free_dirac_spec, gal_spec
from diraclab.operators import build_model
from diraclab.spectra import ResolventProbe, resolvent_block_norm


@pytest.fixture(scope="module")
def dirac():
    spec = free_dirac_spec(mu=1.0, side=14, points_per_cell=2, buffer=0,
                           backend="wilson_sparse")
    return spec, build_model(spec)


class TestCombesThomas:
    def test_full_mask_norm_equals_inverse_upsilon(self, dirac):
        # at the gap center with trivial masks the resolvent norm is exactly
        # 1/upsilon; the stated prefactor 2/upsilon is an upper bound
        spec, h = dirac
        dim = h.dim
        mask = np.ones(dim, dtype=bool)
        probe = ResolventProbe(E=0.0, left_mask=mask, right_mask=mask,
                               known_spectral_distance=1.0)
        got = resolvent_block_norm(h, probe)
        assert abs(got - 1.0) < 2e-3
        assert got <= 2.0 * (1 + 1e-3)

    def test_decay_fit_positive_rate(self, dirac):
        spec, h = dirac
        pairs = default_mask_pairs(spec.grid, 2, (0, 0), [1.0, 2.0, 3.0, 4.0])
        rep = combes_thomas_probe(h, 0.0, (-1.0, 1.0), pairs)
        assert rep["r_squared"] > 0.95
        assert rep["rate_fit"] > 0
        assert rep["c_hat"] > 0
        assert rep["bound_holds"]

    def test_upsilon_scaling_two_point(self, dirac):
        # moving E toward an edge halves upsilon; the fitted exponent
        # should track sqrt(u+ u-) within 25 percent
        spec, h = dirac
        pairs = default_mask_pairs(spec.grid, 2, (0, 0), [1.0, 2.0, 3.0, 4.0])
        r1 = combes_thomas_probe(h, 0.0, (-1.0, 1.0), pairs)
        r2 = combes_thomas_probe(h, 0.5, (-1.0, 1.0), pairs)
        slope_ratio = r2["log_slope"] / r1["log_slope"]
        geo_ratio = r2["geo_mean"] / r1["geo_mean"]
        assert abs(slope_ratio - geo_ratio) <= 0.25 * geo_ratio

    def test_trace_mode_fits(self):
        spec = free_dirac_spec(mu=1.0, side=10, points_per_cell=2, buffer=0,
                               backend="wilson_sparse")
        h = build_model(spec)
        pairs = default_mask_pairs(spec.grid, 2, (0, 0), [1.0, 2.0, 3.0])
        rep = combes_thomas_probe(h, 0.0, (-1.0, 1.0), pairs, mode="trace_norm")
        assert rep["alpha_fit"] > 0
        assert rep["D_fit"] > 0
        assert rep["bound_holds"]

    def test_outside_gap_rejected(self, dirac):
        spec, h = dirac
        pairs = default_mask_pairs(spec.grid, 2, (0, 0), [1.0])
        with pytest.raises(PreconditionError):
            combes_thomas_probe(h, 1.5, (-1.0, 1.0), pairs)

    def test_separation_must_fit(self, dirac):
        spec, h = dirac
        with pytest.raises(InvalidInputError):
            default_mask_pairs(spec.grid, 2, (0, 0), [10.0])


@pytest.fixture(scope="module")
def bs_setup():
    spec = free_dirac_spec(mu=1.0, side=8, points_per_cell=4, buffer=0,
                           backend="wilson_sparse")
    h0 = build_model(spec)
    dm = make_disorder_model(dim=2, comp=2)
    mesh = spec.grid.coord_mesh()
    scal = dm.u.evaluate(mesh - np.zeros(2))
    u = (scal[..., None, None] * np.eye(2)).astype(complex)
    return spec, h0, u


class TestBirmanSchwinger:
    def test_zero_potential_rejected(self, bs_setup):
        spec, h0, u = bs_setup
        with pytest.raises(DegeneratePotentialError):
            birman_schwinger_coupling(h0, 0.0 * u, 0.0, (-1.0, 1.0))

    def test_planted_eigenvalue_lands_on_target(self, bs_setup):
        spec, h0, u = bs_setup
        rep = birman_schwinger_coupling(h0, u, 0.0, (-1.0, 1.0))
        assert np.isfinite(rep["tau0"]) and rep["tau0"] != 0
        assert abs(rep["verified_eigenvalue"] - 0.0) <= 1e-6
        assert rep["verify_ok"]

    def test_branch_monotone(self, bs_setup):
        spec, h0, u = bs_setup
        rep = birman_schwinger_coupling(h0, u, 0.0, (-1.0, 1.0))
        branch = rep["branch"]
        good = np.flatnonzero(np.isfinite(branch))
        assert len(good) >= 2
        diffs = np.diff(branch[good])
        assert np.all(diffs >= -1e-8)

    def test_off_gap_target_rejected(self, bs_setup):
        spec, h0, u = bs_setup
        with pytest.raises(PreconditionError):
            birman_schwinger_coupling(h0, u, 1.5, (-1.0, 1.0))


class TestSpectralAveraging:
    def test_degenerate_interval(self):
        h0 = np.diag([0.0, 1.0]).astype(complex)
        v = np.eye(2, dtype=complex)
        rep = spectral_averaging_check(h0, v, np.eye(2, dtype=complex),
                                       UniformDensity(0.0, 1.0), (0.3, 0.3),
                                       quad_points=4, c0=1.0)
        assert rep["lhs_norm"] <= 1e-12
        assert rep["passes"]

    def test_scalar_closed_form(self):
        # n = 1, V = B = 1, h uniform on [0,1]: the average is the Lebesgue
        # measure of {lam in [0,1] : h0 + lam in J}, at most |J|
        h0v = -0.2
        j = (0.1, 0.5)
        expect = max(0.0, min(j[1] - h0v, 1.0) - max(j[0] - h0v, 0.0))
        rep = spectral_averaging_check(
            np.array([[h0v]], dtype=complex), np.eye(1, dtype=complex),
            np.eye(1, dtype=complex), UniformDensity(0.0, 1.0), j,
            quad_points=12, c0=1.0)
        assert abs(rep["lhs_norm"] - expect) < 1e-8
        assert rep["lhs_norm"] <= (j[1] - j[0]) * (1 + 1e-12)
        assert rep["passes"]

    def test_random_trials_pass_with_refinement_stability(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            n = 50
            a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
            h0 = (a + a.conj().T) / 2
            g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
            v = g @ g.conj().T / n + 0.1 * np.eye(n)
            b = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
            b = (b + b.conj().T) / 2
            rep = spectral_averaging_check(h0, v, b, UniformDensity(0.0, 1.0),
                                           (-0.5, 0.5), quad_points=8)
            assert rep["passes"]
            assert rep["refinement_drift"] <= 1e-4

    def test_certificate_enforced(self):
        h0 = np.zeros((2, 2), dtype=complex)
        v = 0.1 * np.eye(2, dtype=complex)
        b = np.eye(2, dtype=complex)
        with pytest.raises(InvalidInputError):
            spectral_averaging_check(h0, v, b, UniformDensity(0.0, 1.0),
                                     (0.0, 0.1), c0=1.0)


class TestEdgeDistance:
    def _setup(self):
        spec = gal_spec(0.5, 4.0, side=8, points_per_cell=2, buffer=4,
                        backend="wilson_sparse")
        dm = make_disorder_model(dim=2, comp=2, m=2.5, M=2.5, R=0.3,
                                 beta_tail=1.0)
        edge_data = {"B_minus": -0.15, "B_plus": 0.15,
                     "Btilde_minus": -0.1, "Btilde_plus": 0.1}
        return spec, dm, edge_data

    def test_delta_zero_vacuous_pass(self):
        spec, dm, edge_data = self._setup()
        out = edge_distance_probe(spec, dm, 0.0, 5, edge_data,
                                  coupling_scale=0.5)
        assert out["vacuous"]
        assert out["unconditional_prob"] == 1.0

    def test_delta_range_enforced(self):
        spec, dm, edge_data = self._setup()
        with pytest.raises(PreconditionError):
            edge_distance_probe(spec, dm, 1.0, 2, edge_data,
                                coupling_scale=0.5)

    def test_no_new_spectrum_rejected(self):
        spec, dm, edge_data = self._setup()
        edge_data["Btilde_minus"] = edge_data["B_minus"]
        with pytest.raises(PreconditionError):
            edge_distance_probe(spec, dm, 0.0, 2, edge_data,
                                coupling_scale=0.5)

    def test_bound_closed_form(self):
        # analytic integration of the edge density tails
        spec, dm, edge_data = self._setup()
        m_inf_eff = 0.5 * dm.M_infinity
        dmin2 = min(0.025, 0.025) ** 2
        delta = 0.25 * dmin2 / m_inf_eff
        out = edge_distance_probe(spec, dm, delta, 3, edge_data,
                                  coupling_scale=0.5)
        frac = 1.0 - out["shrink_fraction"]
        tail_hi = 1.0 - dm.density.cdf(frac * dm.M)
        tail_lo = dm.density.cdf(-frac * dm.m)
        want = 1.0 - 2.0 * spec.grid.side ** 2 * max(tail_lo, tail_hi)
        assert abs(out["bound"] - want) < 1e-12

    def test_conditional_check_on_fresh_samples(self):
        # measure the perturbed edges on one seed range, then probe fresh
        # realizations: every conditioned sample must keep its spectrum at
        # distance delta from the measured edges
        import numpy as np
        from diraclab.disorder import (assemble_random_potential,
                                       sample_realization)
        from diraclab.estimators.gaps import (reduce_union_spectra,
                                              spectral_gap_about)
        from diraclab.operators import build_model
        from diraclab.spectra import SpectralWindow, eigs_window
        spec = gal_spec(0.5, 4.0, side=8, points_per_cell=2, buffer=4,
                        backend="wilson_sparse")
        dm = make_disorder_model(dim=2, comp=2, m=2.5, M=2.5, R=0.3,
                                 beta_tail=1.0)
        coup = 0.8
        h0 = build_model(spec)
        b_lo, b_hi = spectral_gap_about(h0, 0.0)
        margin = (b_hi - b_lo) / 400
        union = []
        for s in range(25):
            real = sample_realization(dm, spec.grid, 10_000 + s,
                                      coupling_scale=coup)
            h = h0.with_extra_potential(
                assemble_random_potential(real, dm, spec.grid).values)
            union.append(eigs_window(
                h, SpectralWindow(b_lo + margin, b_hi - margin)).eigenvalues)
        rep = reduce_union_spectra(union, b_lo, b_hi, spec.grid, min_count=1)
        edge_data = {"B_minus": rep.B_minus, "B_plus": rep.B_plus,
                     "Btilde_minus": rep.Btilde_minus,
                     "Btilde_plus": rep.Btilde_plus}
        m_inf_eff = coup * dm.M_infinity
        dmin = 0.5 * min(abs(rep.Btilde_minus - rep.B_minus),
                         abs(rep.Btilde_plus - rep.B_plus))
        delta = 0.25 * dmin ** 2 / m_inf_eff
        out = edge_distance_probe(spec, dm, delta, 12, edge_data,
                                  base_seed=777, coupling_scale=coup)
        if out["conditional_total"] > 0:
            assert out["conditional_prob"] == 1.0
        assert 0.0 <= out["unconditional_prob"] <= 1.0
        assert out["bound"] <= 1.0
