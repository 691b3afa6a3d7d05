""" Test descriptive statistics, normality and unit-root tests, and correlations. """
import itertools
import math
import unittest

import numpy as np
from scipy import stats as sps

import test
from test.sample_data_generator import white_noise_panel
from r2connectedness.panel import ReturnPanel
from r2connectedness.stats import CorrelationMatrix, StatsError, adf_test, correlation_matrix, describe, \
    describe_frame, jarque_bera, pearson_pvalue, sample_moments, significance_mask, stars


class TestMoments(unittest.TestCase):

    def test_symmetric_series(self):
        mean, sd, skewness, _ = sample_moments([-1.0, 0.0, 1.0])
        self.assertEqual(mean, 0.0)
        self.assertAlmostEqual(skewness, 0.0, places=15)
        self.assertAlmostEqual(sd, 1.0, places=15)

    def test_gaussian_kurtosis_is_raw(self):
        x = np.random.default_rng(42).standard_normal(100000)
        _, _, _, kurtosis = sample_moments(x)
        self.assertGreaterEqual(kurtosis, 2.9)
        self.assertLessEqual(kurtosis, 3.1)

    def test_mean_and_sd_match_two_pass_sums(self):
        x = 0.01 * np.random.default_rng(3).standard_normal(777) + 0.002
        total = 0.0
        for value in x:
            total += value
        mean = total / len(x)
        squares = 0.0
        for value in x:
            squares += (value - mean) ** 2
        sd = math.sqrt(squares / (len(x) - 1))
        got_mean, got_sd, _, _ = sample_moments(x)
        self.assertAlmostEqual(got_mean, mean, delta=1e-12)
        self.assertAlmostEqual(got_sd, sd, delta=1e-12)

    def test_constant_series(self):
        with self.assertRaisesRegex(StatsError, "constant"):
            sample_moments(np.ones(30))


class TestJarqueBera(unittest.TestCase):

    def test_two_point_distribution(self):
        """ ±1 with equal counts: skewness 0, raw kurtosis 1, so JB = n/6. """
        x = np.tile([1.0, -1.0], 300)
        stat, p = jarque_bera(x)
        self.assertAlmostEqual(stat, 100.0, delta=1e-9)
        self.assertAlmostEqual(p, math.exp(-50.0), delta=1e-12)

    def test_closed_form(self):
        x = np.random.default_rng(5).exponential(size=600)
        n = x.size
        m = x - x.mean()
        skewness = np.mean(m ** 3) / np.mean(m ** 2) ** 1.5
        kurtosis = np.mean(m ** 4) / np.mean(m ** 2) ** 2
        expected = n / 6 * (skewness ** 2 + (kurtosis - 3) ** 2 / 4)
        stat, p = jarque_bera(x)
        self.assertAlmostEqual(stat / expected, 1.0, delta=1e-9)
        self.assertAlmostEqual(p, sps.chi2.sf(expected, 2), delta=1e-9)

    def test_affine_invariance(self):
        x = np.random.default_rng(6).standard_t(5, size=400)
        reference, _ = jarque_bera(x)
        for a, b in ((2.0, 1.0), (-0.5, 3.0), (1000.0, -7.0)):
            with self.subTest(a=a, b=b):
                self.assertAlmostEqual(jarque_bera(a * x + b)[0], reference, delta=1e-9 * max(1.0, reference))

    def test_uniform_is_rejected(self):
        rejections = sum(jarque_bera(np.random.default_rng(seed).uniform(size=5000))[1] < 0.01 for seed in range(50))
        self.assertGreaterEqual(rejections, 50)

    def test_too_short(self):
        with self.assertRaises(StatsError):
            jarque_bera(np.arange(7.0))


class TestAdf(unittest.TestCase):
    """ Monte Carlo power and size checks of the Dickey-Fuller classification. """

    def test_white_noise_is_stationary(self):
        levels = [adf_test(np.random.default_rng(seed).standard_normal(500)).level for seed in range(500)]
        self.assertGreaterEqual(levels.count("1%") / len(levels), 0.90)

    def test_random_walk_is_not(self):
        levels = [adf_test(np.cumsum(np.random.default_rng(10000 + seed).standard_normal(500))).level
                  for seed in range(500)]
        self.assertLessEqual(sum(level != "none" for level in levels) / len(levels), 0.15)

    def test_deterministic_trend(self):
        result = adf_test(np.arange(200.0))
        self.assertEqual(result.level, "none")

    def test_more_negative_is_more_stationary(self):
        result = adf_test(np.random.default_rng(1).standard_normal(300))
        self.assertLess(result.stat, result.critical_values["1%"])
        self.assertEqual(result.level, "1%")

    def test_too_short(self):
        with self.assertRaises(StatsError):
            adf_test(np.random.default_rng(1).standard_normal(30))


class TestCorrelation(unittest.TestCase):

    def _panel(self, *columns):
        return ReturnPanel.from_array(np.column_stack(columns))

    def test_identity(self):
        x = np.random.default_rng(0).standard_normal(60)
        for method in ("pearson", "spearman", "kendall"):
            with self.subTest(method=method):
                corr = correlation_matrix(self._panel(x, x.copy()), method)
                self.assertAlmostEqual(corr.values[0, 1], 1.0, places=12)

    def test_rank_reversal(self):
        x = np.random.default_rng(1).standard_normal(40)
        corr = correlation_matrix(self._panel(x, -x ** 3), "spearman")
        self.assertAlmostEqual(corr.values[0, 1], -1.0, places=12)

    def test_kendall_against_pair_counting(self):
        x = np.array([0.3, -1.2, 2.5, 0.1, -0.4, 1.7])
        y = np.array([0.5, -0.2, 1.9, -0.8, 0.0, 0.7])
        concordant = discordant = 0
        for i, j in itertools.combinations(range(6), 2):
            sign = np.sign(x[i] - x[j]) * np.sign(y[i] - y[j])
            concordant += sign > 0
            discordant += sign < 0
        expected = (concordant - discordant) / 15
        corr = correlation_matrix(self._panel(x, y), "kendall")
        self.assertAlmostEqual(corr.values[0, 1], expected, places=12)

    def test_rank_methods_ignore_monotone_transforms(self):
        panel = white_noise_panel(2, K=3, T=200)
        values = np.asarray(panel.returns)
        transformed = ReturnPanel.from_array(np.column_stack([np.exp(values[:, 0]), values[:, 1] ** 3,
                                                              5 * values[:, 2] + 1]))
        for method in ("spearman", "kendall"):
            with self.subTest(method=method):
                np.testing.assert_allclose(correlation_matrix(transformed, method).values,
                                           correlation_matrix(panel, method).values, atol=1e-12)

    def test_matrix_shape(self):
        corr = correlation_matrix(white_noise_panel(4, K=4, T=300), "pearson")
        np.testing.assert_array_equal(corr.values, corr.values.T)
        np.testing.assert_array_equal(np.diag(corr.values), np.ones(4))
        np.testing.assert_array_equal(np.diag(corr.pvalues), np.zeros(4))
        self.assertGreaterEqual(np.linalg.eigvalsh(corr.values).min(), -1e-8)

    def test_constant_series(self):
        with self.assertRaisesRegex(StatsError, "constant"):
            correlation_matrix(self._panel(np.ones(30), np.arange(30.0)))


class TestSignificanceMask(unittest.TestCase):

    def test_zero_correlation_is_masked(self):
        corr = CorrelationMatrix(method="pearson", labels=("a", "b"), values=np.eye(2),
                                 pvalues=np.array([[0.0, 1.0], [1.0, 0.0]]), n_obs=100)
        masked = significance_mask(corr, 0.99)
        self.assertTrue(masked.mask[0, 1])
        self.assertFalse(masked.mask[0, 0])

    def test_strong_correlation_is_kept(self):
        self.assertLess(pearson_pvalue(0.74, 700), 0.10)

    def test_size_under_independence(self):
        masked = 0
        for seed in range(200):
            corr = correlation_matrix(white_noise_panel(seed, K=2, T=300), "pearson")
            masked += bool(significance_mask(corr, 0.10).mask[0, 1])
        self.assertGreaterEqual(masked / 200, 0.82)
        self.assertLessEqual(masked / 200, 0.97)

    def test_invalid_level(self):
        corr = correlation_matrix(white_noise_panel(0, K=2, T=50))
        with self.assertRaises(StatsError):
            significance_mask(corr, 1.0)


class TestDescribe(unittest.TestCase):

    def test_rows_and_stars(self):
        rows = describe(white_noise_panel(9, K=3, T=400))
        self.assertEqual([row.label for row in rows], ["S1", "S2", "S3"])
        for row in rows:
            self.assertGreater(row.sd, 0)
            self.assertTrue(0 <= row.jb_p <= 1)
            self.assertEqual(row.adf_level, "1%")
        frame = describe_frame(rows)
        self.assertEqual(list(frame.columns), ["series", "mean", "sd", "skewness", "kurtosis", "jarque_bera", "adf"])
        self.assertTrue(all(cell.endswith("***") for cell in frame["adf"]))

    def test_stars(self):
        self.assertEqual(stars(0.001), "***")
        self.assertEqual(stars(0.03), "**")
        self.assertEqual(stars(0.07), "*")
        self.assertEqual(stars(0.5), "")

    def test_too_few_observations(self):
        with self.assertRaises(StatsError):
            describe(white_noise_panel(0, K=2, T=19))

    def test_short_panel_skips_adf(self):
        rows = describe(white_noise_panel(0, K=2, T=30))
        self.assertEqual(len(rows), 2)
        for row in rows:
            self.assertEqual(row.n_obs, 30)
            self.assertTrue(math.isnan(row.adf_stat))
            self.assertEqual(row.adf_level, "none")
        self.assertEqual(list(describe_frame(rows)["adf"]), ["NA", "NA"])


if __name__ == "__main__":
    unittest.main()
