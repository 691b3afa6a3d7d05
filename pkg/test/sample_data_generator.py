""" Generate sample data for testing

Execute and writes to file. Then do whatever you need.
"""
import os

import numpy as np

from r2connectedness.panel import ReturnPanel
from r2connectedness.simulation import SimulationSpec, simulate_prices, simulate_var


def white_noise_panel(seed, K=4, T=1000, scale=0.01) -> ReturnPanel:
    rng = np.random.default_rng(seed)
    return ReturnPanel.from_array(scale * rng.standard_normal((T, K)))


def var1_panel(seed, coeff, T=1000, noise_corr=0.0, scale=0.01, burn_in=100) -> ReturnPanel:
    coeff = np.asarray(coeff, dtype=float)
    K = coeff.shape[0]
    covariance = np.full((K, K), noise_corr)
    np.fill_diagonal(covariance, 1.0)
    values = simulate_var(coeff, scale ** 2 * covariance, T, np.random.default_rng(seed), burn_in)
    return ReturnPanel.from_array(values)


def planted_panel(seed, K=4, T=600, coupling=0.4) -> ReturnPanel:
    """ Series 1 drives series 2 with the given lag-one coefficient; nothing else is linked. """
    A = np.zeros((K, K))
    A[1, 0] = coupling
    return var1_panel(seed, A, T)


def regime_panel(seed, K=6, T=900, correlations=(0.1, 0.7, 0.3), coupling=0.2) -> ReturnPanel:
    """ Noise correlation switches between regimes of equal length, so connectedness moves over time. """
    rng = np.random.default_rng(seed)
    A = np.zeros((K, K))
    A[1, 0] = coupling
    bounds = np.linspace(0, T, len(correlations) + 1).astype(int)
    shocks = []
    for rho, start, stop in zip(correlations, bounds[:-1], bounds[1:]):
        corr = np.full((K, K), rho)
        np.fill_diagonal(corr, 1.0)
        shocks.append(rng.standard_normal((stop - start, K)) @ np.linalg.cholesky(corr).T)
    shocks = 0.01 * np.vstack(shocks)
    values = np.zeros((T, K))
    values[0] = shocks[0]
    for t in range(1, T):
        values[t] = A @ values[t - 1] + shocks[t]
    return ReturnPanel.from_array(values)


def price_csv_text(rows, header="date,A,B") -> str:
    """ CSV text of a price table given as (date, price, price, ...) tuples. """
    lines = [header] + [",".join(str(cell) for cell in row) for row in rows]
    return "\n".join(lines) + "\n"


if __name__ == "__main__":
    spec = SimulationSpec(n_series=4, n_obs=600, coupling=["1:2:0.4"], seed=7,
                          labels=["BRs", "USs", "ZAm", "CNc"])
    path = os.path.join(os.path.dirname(__file__), "data", "sample_prices.csv")
    simulate_prices(spec).to_csv(path)
    print(f"Wrote {path}")
