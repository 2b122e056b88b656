import numpy as np
import pytest
from scipy import integrate, stats

from fiberpack.distributions import (MvmfParams, SchladitzParams, VmfParams,
                                     combine_mvmf, sample_schladitz,
                                     sample_vmf, schladitz_cos_cdf,
                                     schladitz_density)
from fiberpack.geometry import RngState

EZ = np.array([0.0, 0.0, 1.0])


class TestSchladitzDensity:
    def test_isotropic_equator_value(self):
        assert schladitz_density(np.pi / 2, 0.0, SchladitzParams(1.0)) == \
            pytest.approx(1.0 / (4.0 * np.pi))

    def test_pole_is_zero(self):
        for beta in (0.2, 1.0, 4.0):
            assert schladitz_density(0.0, 1.0, SchladitzParams(beta)) == 0.0

    @pytest.mark.parametrize("beta", [0.1, 1.0, 3.0])
    def test_normalization_by_quadrature(self, beta):
        p = SchladitzParams(beta)
        val, _ = integrate.dblquad(lambda t, f: schladitz_density(t, f, p),
                                   0.0, 2.0 * np.pi - 1e-12,
                                   0.0, np.pi - 1e-12, epsabs=1e-10)
        assert val == pytest.approx(1.0, abs=1e-8)

    def test_out_of_range_rejected(self):
        p = SchladitzParams(1.0)
        with pytest.raises(ValueError):
            schladitz_density(-0.1, 0.0, p)
        with pytest.raises(ValueError):
            schladitz_density(1.0, 7.0, p)

    def test_cdf_matches_quadrature_of_density(self):
        # the analytic cosine CDF used by the sampler, checked against
        # direct integration of the marginal density
        beta = 0.5
        p = SchladitzParams(beta)

        def marginal(t):
            return schladitz_density(t, 0.0, p) * 2.0 * np.pi

        for u in (-0.8, -0.2, 0.3, 0.9):
            theta_hi = np.arccos(u)          # cos decreasing: theta in [acos(u), pi)
            val, _ = integrate.quad(marginal, theta_hi, np.pi - 1e-13)
            assert schladitz_cos_cdf(u, beta) == pytest.approx(val, abs=1e-8)


class TestSampleSchladitz:
    def test_isotropic_cosine_uniform(self):
        xs = sample_schladitz(SchladitzParams(1.0), RngState(5), n=100_000)
        d = stats.kstest(xs[:, 2], stats.uniform(loc=-1, scale=2).cdf)
        assert d.pvalue > 0.01

    def test_equatorial_symmetry_point(self):
        # w = 0 maps to the equator for every beta
        from fiberpack.distributions import schladitz_cos_from_uniform
        for beta in (0.1, 1.0, 5.0):
            assert schladitz_cos_from_uniform(0.0, beta) == 0.0

    def test_empirical_cdf_matches_analytic(self):
        beta = 0.5
        xs = sample_schladitz(SchladitzParams(beta), RngState(6), n=100_000)
        res = stats.kstest(xs[:, 2], lambda u: schladitz_cos_cdf(u, beta))
        assert res.statistic < 0.01

    def test_unit_norm(self):
        xs = sample_schladitz(SchladitzParams(2.0), RngState(7), n=1000)
        np.testing.assert_allclose(np.linalg.norm(xs, axis=1), 1.0, atol=1e-12)

    def test_octant_uniformity_chi2(self):
        xs = sample_schladitz(SchladitzParams(1.0), RngState(8), n=100_000)
        octant = (xs[:, 0] > 0) * 4 + (xs[:, 1] > 0) * 2 + (xs[:, 2] > 0)
        counts = np.bincount(octant, minlength=8)
        res = stats.chisquare(counts)
        assert res.pvalue > 0.01


class TestSampleVmf:
    def test_kappa_zero_uniform(self):
        xs = sample_vmf(VmfParams(EZ, 0.0), RngState(9), n=100_000)
        octant = (xs[:, 0] > 0) * 4 + (xs[:, 1] > 0) * 2 + (xs[:, 2] > 0)
        assert stats.chisquare(np.bincount(octant, minlength=8)).pvalue > 0.01

    def test_mean_resultant_high_concentration(self):
        kappa = 100.0
        n = 100_000
        xs = sample_vmf(VmfParams(EZ, kappa), RngState(10), n=n)
        target = 1.0 / np.tanh(kappa) - 1.0 / kappa   # 0.99
        m = xs[:, 2].mean()
        se = xs[:, 2].std() / np.sqrt(n)
        assert abs(m - target) < 3.0 * se

    def test_matches_rejection_sampling_oracle(self):
        # Wood-style rejection sampler (dim = 2 for the sphere) as an
        # independent reference
        kappa, n = 5.0, 60_000
        rng = np.random.default_rng(123)
        b = 2.0 / (np.sqrt(4.0 * kappa ** 2 + 4.0) + 2.0 * kappa)
        x0 = (1.0 - b) / (1.0 + b)
        c = kappa * x0 + 2.0 * np.log(1.0 - x0 * x0)
        ws = []
        while len(ws) < n:
            z = rng.beta(1.0, 1.0, size=4 * n)
            w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z)
            u = rng.uniform(size=4 * n)
            acc = kappa * w + 2.0 * np.log(1.0 - x0 * w) - c >= np.log(u)
            ws.extend(w[acc][: n - len(ws)])
        ours = sample_vmf(VmfParams(EZ, kappa), RngState(11), n=n)[:, 2]
        res = stats.ks_2samp(np.asarray(ws), ours)
        assert res.pvalue > 0.01

    def test_cosine_matches_analytic_cdf(self):
        kappa = 5.0
        xs = sample_vmf(VmfParams(EZ, kappa), RngState(21), n=100_000)

        def cdf(w):
            return (np.exp(kappa * np.asarray(w)) - np.exp(-kappa)) / \
                (np.exp(kappa) - np.exp(-kappa))

        assert stats.kstest(xs[:, 2], cdf).pvalue > 0.01

    def test_unit_norm(self):
        xs = sample_vmf(VmfParams(EZ, 50.0), RngState(12), n=2000)
        np.testing.assert_allclose(np.linalg.norm(xs, axis=1), 1.0, atol=1e-12)

    def test_rotational_symmetry_about_mu(self):
        mu = np.array([1.0, 0.0, 0.0])
        xs = sample_vmf(VmfParams(mu, 20.0), RngState(13), n=50_000)
        # azimuth around mu should be uniform
        az = np.arctan2(xs[:, 2], xs[:, 1])
        assert stats.kstest(az, stats.uniform(loc=-np.pi, scale=2 * np.pi).cdf).pvalue > 0.01


class TestCombineMvmf:
    def test_parallel(self):
        p = combine_mvmf(MvmfParams(EZ, 10.0, EZ, 100.0))
        assert p.kappa == pytest.approx(110.0)
        np.testing.assert_allclose(p.mu, EZ)

    def test_pythagorean(self):
        ex = np.array([1.0, 0.0, 0.0])
        ey = np.array([0.0, 1.0, 0.0])
        p = combine_mvmf(MvmfParams(ex, 3.0, ey, 4.0))
        assert p.kappa == pytest.approx(5.0)
        np.testing.assert_allclose(p.mu, [0.6, 0.8, 0.0])

    def test_antiparallel_degenerates_to_uniform(self):
        p = combine_mvmf(MvmfParams(EZ, 7.0, -EZ, 7.0))
        assert p.kappa == 0.0
        xs = sample_vmf(p, RngState(14), n=50_000)
        octant = (xs[:, 0] > 0) * 4 + (xs[:, 1] > 0) * 2 + (xs[:, 2] > 0)
        assert stats.chisquare(np.bincount(octant, minlength=8)).pvalue > 0.01

    def test_rotation_equivariance(self):
        rng = np.random.default_rng(15)
        for _ in range(50):
            a = rng.normal(size=3)
            a /= np.linalg.norm(a)
            b = rng.normal(size=3)
            b /= np.linalg.norm(b)
            q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
            base = combine_mvmf(MvmfParams(a, 2.0, b, 3.0))
            rot = combine_mvmf(MvmfParams(q @ a, 2.0, q @ b, 3.0))
            assert rot.kappa == pytest.approx(base.kappa, abs=1e-12)
            np.testing.assert_allclose(rot.mu, q @ base.mu, atol=1e-12)


class TestVmfDensityNormalization:
    @pytest.mark.parametrize("kappa", [0.5, 5.0, 50.0])
    def test_normalization_by_quadrature(self, kappa):
        # density over the sphere: kappa e^(kappa u) / (4 pi sinh kappa)
        def dens(u):
            return kappa * np.exp(kappa * u) / (4.0 * np.pi * np.sinh(kappa)) * 2.0 * np.pi

        val, _ = integrate.quad(dens, -1.0, 1.0, epsabs=1e-12)
        assert val == pytest.approx(1.0, abs=1e-8)
