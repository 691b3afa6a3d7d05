""" Test the planted-VAR price simulator. """
import unittest

import numpy as np
from pydantic import ValidationError

import test
from r2connectedness.panel import compute_log_returns
from r2connectedness.simulation import SimulationError, SimulationSpec, simulate_prices, simulate_var


class TestSimulationSpec(unittest.TestCase):

    def test_coupling_is_source_to_target(self):
        spec = SimulationSpec(n_series=3, coupling=["1:3:0.25"], persistence=0.1)
        A = spec.coefficient_matrix()
        self.assertEqual(A[2, 0], 0.25)
        self.assertEqual(A[0, 2], 0.0)
        np.testing.assert_array_equal(np.diag(A), [0.1, 0.1, 0.1])

    def test_bad_coupling(self):
        with self.assertRaises(ValidationError):
            SimulationSpec(coupling=["1-2-0.3"])
        with self.assertRaises(SimulationError):
            SimulationSpec(n_series=2, coupling=["1:5:0.3"]).coefficient_matrix()

    def test_labels(self):
        self.assertEqual(SimulationSpec(n_series=2).series_labels(), ["S1", "S2"])
        with self.assertRaises(SimulationError):
            SimulationSpec(n_series=2, labels=["a"]).series_labels()


class TestSimulatePrices(unittest.TestCase):

    def test_format_and_calendar(self):
        prices = simulate_prices(SimulationSpec(n_series=2, n_obs=50, seed=1))
        self.assertEqual(prices.T, 51)
        self.assertEqual(prices.dates[0].strftime("%Y-%m-%d"), "2020-12-01")
        np.testing.assert_array_equal(prices.prices[0], [100.0, 100.0])
        self.assertTrue(np.all(prices.prices > 0))

    def test_same_seed(self):
        spec = SimulationSpec(n_series=3, n_obs=100, seed=5)
        np.testing.assert_array_equal(simulate_prices(spec).prices, simulate_prices(spec).prices)

    def test_independent_noise(self):
        spec = SimulationSpec(n_series=3, n_obs=5000, seed=2)
        returns = np.asarray(compute_log_returns(simulate_prices(spec)).returns)
        corr = np.corrcoef(returns.T)
        self.assertLess(np.max(np.abs(corr - np.eye(3))), 0.05)
        self.assertAlmostEqual(returns.std(), 0.01, delta=0.0005)

    def test_unstable(self):
        with self.assertRaisesRegex(SimulationError, "not stable"):
            simulate_var(np.array([[1.1]]), np.eye(1), 10, np.random.default_rng(0))

    def test_covariance_must_be_positive_definite(self):
        with self.assertRaises(SimulationError):
            simulate_var(np.zeros((2, 2)), np.array([[1.0, 2.0], [2.0, 1.0]]), 10, np.random.default_rng(0))


if __name__ == "__main__":
    unittest.main()
