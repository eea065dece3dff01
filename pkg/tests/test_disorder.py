import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import kstest

from diraclab.disorder import (EdgeBetaDensity, UniformDensity,
                               assemble_random_potential, compute_m_infinity,
                               make_disorder_model, profile_preset,
                               sample_realization, site_draws)
from diraclab.errors import InvalidInputError
from diraclab.model import GridBox


@pytest.fixture(scope="module")
def dm():
    return make_disorder_model(dim=2, comp=2, m=1.0, M=1.0, R=0.3, beta_tail=1.0)


@pytest.fixture(scope="module")
def box():
    return GridBox(center=(0, 0), side=6, points_per_cell=4, buffer=8,
                   backend="wilson_sparse")


class TestDensities:
    def test_edge_beta_is_normalized(self):
        d = EdgeBetaDensity(1.0, 1.0, 1.0)
        xs = np.linspace(-1, 1, 20001)
        mass = np.trapezoid(d.pdf(xs), xs)
        assert abs(mass - 1.0) < 1e-6

    def test_ppf_inverts_cdf(self):
        d = EdgeBetaDensity(1.0, 2.0, 1.5)
        us = np.linspace(0.001, 0.999, 101)
        xs = d.ppf(us)
        assert np.abs(d.cdf(xs) - us).max() < 1e-10

    def test_edge_decay_holds_for_default(self, dm):
        # Assumption on the tails: exact closed-form mass under eps^(d/2+beta)
        assert dm.edge_decay_ok()
        for eps in (0.1, 0.05, 0.01):
            assert dm.density.tail_mass(eps) <= eps ** (2 / 2 + 1.0)

    def test_uniform_violates_edge_decay(self):
        m = make_disorder_model(dim=2, comp=2, m=1.0, M=1.0, R=0.3,
                                beta_tail=1.0, density="uniform")
        assert not m.edge_decay_ok()

    def test_kappa_floor_enforced(self):
        with pytest.raises(InvalidInputError):
            make_disorder_model(dim=2, comp=2, beta_tail=1.0, kappa=0.5)


class TestSampling:
    def test_marginal_ks_below_critical(self, dm):
        # 10^4 draws against the exact CDF; 1% KS critical value 1.628/sqrt(n)
        draws = np.array([site_draws(dm, 7, (i, j))[0]
                          for i in range(100) for j in range(100)])
        stat = kstest(draws, dm.density.cdf).statistic
        assert stat < 1.628 / np.sqrt(len(draws))

    def test_uniform_mean_within_3_sigma(self):
        # exact moments of the uniform law on [-1, 1]: sd = 1/sqrt(3)
        m = make_disorder_model(dim=2, comp=2, m=1.0, M=1.0, R=0.3,
                                beta_tail=1.0, density="uniform")
        draws = np.array([site_draws(m, 11, (i, j))[0]
                          for i in range(100) for j in range(100)])
        assert abs(draws.mean()) < 3 * (1 / np.sqrt(3)) / 100

    def test_xi_inside_sup_ball(self, dm, box):
        real = sample_realization(dm, box, seed=3)
        assert np.abs(real.xis).max() <= dm.R
        assert real.lambdas.min() >= -dm.m and real.lambdas.max() <= dm.M

    def test_overlapping_boxes_agree(self, dm):
        b1 = GridBox(center=(0, 0), side=6, points_per_cell=4, buffer=8)
        b2 = GridBox(center=(2, 2), side=6, points_per_cell=4, buffer=8)
        r1 = sample_realization(dm, b1, seed=42)
        r2 = sample_realization(dm, b2, seed=42)
        m1 = {tuple(s): (l, tuple(x)) for s, l, x
              in zip(r1.sites, r1.lambdas, r1.xis)}
        m2 = {tuple(s): (l, tuple(x)) for s, l, x
              in zip(r2.sites, r2.lambdas, r2.xis)}
        shared = set(m1) & set(m2)
        assert len(shared) > 0
        for s in shared:
            assert m1[s] == m2[s]

    def test_disjoint_boxes_uncorrelated(self, dm):
        # independence: Pearson correlation of site sums within +-0.1 of 0
        b1 = GridBox(center=(0, 0), side=4, points_per_cell=2, buffer=4)
        b2 = GridBox(center=(100, 100), side=4, points_per_cell=2, buffer=4)
        sums1, sums2 = [], []
        for seed in range(1000):
            sums1.append(sample_realization(dm, b1, seed).lambdas.sum())
            sums2.append(sample_realization(dm, b2, seed).lambdas.sum())
        corr = np.corrcoef(sums1, sums2)[0, 1]
        assert abs(corr) < 0.1

    @given(st.integers(min_value=0, max_value=2 ** 62),
           st.tuples(st.integers(-100, 100), st.integers(-100, 100)))
    def test_site_draws_reproducible(self, seed, site):
        dm_local = make_disorder_model(dim=2, comp=2)
        a = site_draws(dm_local, seed, site)
        b = site_draws(dm_local, seed, site)
        assert a[0] == b[0]
        assert np.array_equal(a[1], b[1])


class TestMInfinity:
    def test_cos2_bump_closed_form(self):
        # per-axis shifted-max factors sum to exactly 2 (cos^2 + sin^2), so
        # the worst-case envelope is 2^d
        prof = profile_preset("cos2_bump")
        val = compute_m_infinity(1.0, 1.0, prof, dim=2)
        assert abs(val - 4.0) < 1e-10
        val1d = compute_m_infinity(0.5, 2.0, prof, dim=1)
        assert abs(val1d - 2.0 * 2.0) < 1e-10

    def test_field_bounded_by_m_infinity(self, dm, box):
        for seed in range(5):
            real = sample_realization(dm, box, seed)
            f = assemble_random_potential(real, dm, box)
            norms = np.linalg.norm(f.values, 2, axis=(-2, -1))
            assert norms.max() <= dm.M_infinity + 1e-12


class TestAssembly:
    def test_zero_couplings_zero_field(self, dm, box):
        real = sample_realization(dm, box, seed=1, coupling_scale=0.0)
        f = assemble_random_potential(real, dm, box)
        assert np.abs(f.values).max() == 0.0

    def test_single_site_matches_profile(self, dm):
        box = GridBox(center=(0, 0), side=2, points_per_cell=8, buffer=8)
        real = sample_realization(dm, box, seed=5)
        # keep exactly one site with lambda = 1, xi = 0
        keep = np.all(real.sites == 0, axis=1)
        from dataclasses import replace as drep
        real = drep(real, sites=real.sites[keep],
                    lambdas=np.array([1.0]), xis=np.zeros((1, 2)))
        f = assemble_random_potential(real, dm, box)
        mesh = box.coord_mesh()
        expect = dm.u.evaluate(mesh)
        got = f.values[..., 0, 0].real
        assert np.abs(got - expect).max() < 1e-12

    def test_zero_outside_dilated_box(self, dm, box):
        real = sample_realization(dm, box, seed=9)
        f = assemble_random_potential(real, dm, box)
        dist = box.sup_distance(box.center)
        outside = dist > box.side / 2 + dm.u.radius + dm.R
        assert outside.any()
        assert np.abs(f.values[outside]).max() == 0.0

    def test_box_containment_checked(self, dm):
        small = GridBox(center=(0, 0), side=4, points_per_cell=2, buffer=0)
        big = GridBox(center=(0, 0), side=12, points_per_cell=2, buffer=4)
        real = sample_realization(dm, big, seed=2)
        with pytest.raises(InvalidInputError):
            assemble_random_potential(real, dm, small)

    def test_monotone_in_coupling_constant(self, dm, box):
        # raising one lambda with u >= 0 raises the field in Hermitian order
        from dataclasses import replace as drep
        real = sample_realization(dm, box, seed=13)
        bumped = drep(real, lambdas=real.lambdas + np.eye(len(real.lambdas))[0] * 0.3)
        f0 = assemble_random_potential(real, dm, box).values
        f1 = assemble_random_potential(bumped, dm, box).values
        diff = (f1 - f0).reshape(-1, 2, 2)
        ev = np.linalg.eigvalsh(diff)
        assert ev.min() >= -1e-12

    def test_realization_json_roundtrip(self, dm, box):
        import json
        real = sample_realization(dm, box, seed=77, coupling_scale=0.5)
        blob = json.loads(real.to_json(dm))
        assert blob["seed"] == 77
        assert blob["coupling_scale"] == 0.5
        assert blob["model_hash"] == dm.model_hash()
