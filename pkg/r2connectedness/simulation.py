""" Synthetic price panels with a planted VAR(1) spillover structure. """
from typing import Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, field_validator

from r2connectedness import logger
from r2connectedness.panel import PricePanel


class SimulationError(ValueError):
    """ The requested simulation is not a stable, well-defined process. """


class SimulationSpec(BaseModel):
    """ VAR(1) returns r_t = A r_{t-1} + e_t with e_t ~ N(0, noise_scale² · equicorrelation(noise_corr)).

    `coupling` entries "i:j:value" (1-based) make series i drive series j,
    i.e. A[j, i] = value. `persistence` sits on the diagonal of A.
    """
    n_series: int = Field(4, ge=1)
    n_obs: int = Field(600, ge=2)
    coupling: list[str] = Field(default_factory=list)
    persistence: float = 0.0
    noise_scale: float = Field(0.01, gt=0)
    noise_corr: float = Field(0.0, gt=-1, lt=1)
    start_price: float = Field(100.0, gt=0)
    start_date: str = "2020-12-01"
    burn_in: int = Field(100, ge=0)
    seed: int = 0
    labels: Optional[list[str]] = None

    @field_validator("coupling")
    @classmethod
    def _parse_coupling(cls, value):
        for entry in value:
            parts = entry.split(":")
            if len(parts) != 3:
                raise ValueError(f"coupling {entry!r} is not of the form i:j:value")
            try:
                int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError as e:
                raise ValueError(f"coupling {entry!r} is not of the form i:j:value") from e
        return value

    def series_labels(self) -> list[str]:
        if self.labels is not None:
            if len(self.labels) != self.n_series:
                raise SimulationError(f"{len(self.labels)} labels for {self.n_series} series")
            return list(self.labels)
        return [f"S{i + 1}" for i in range(self.n_series)]

    def coefficient_matrix(self) -> np.ndarray:
        K = self.n_series
        A = self.persistence * np.eye(K)
        for entry in self.coupling:
            source, target, value = entry.split(":")
            i, j = int(source) - 1, int(target) - 1
            if not (0 <= i < K and 0 <= j < K):
                raise SimulationError(f"coupling {entry!r} refers to a series outside 1..{K}")
            A[j, i] = float(value)
        return A

    def noise_covariance(self) -> np.ndarray:
        K = self.n_series
        corr = np.full((K, K), self.noise_corr)
        np.fill_diagonal(corr, 1.0)
        return self.noise_scale ** 2 * corr


def simulate_var(coeff, covariance, n_obs: int, rng: np.random.Generator, burn_in: int = 100) -> np.ndarray:
    """ n_obs draws of a stable VAR(1) after discarding `burn_in` warm-up rows. """
    coeff = np.asarray(coeff, dtype=float)
    radius = float(np.max(np.abs(np.linalg.eigvals(coeff)))) if coeff.size else 0.0
    if radius >= 1.0:
        raise SimulationError(f"planted VAR is not stable: spectral radius {radius:.4f}")
    try:
        chol = np.linalg.cholesky(np.asarray(covariance, dtype=float))
    except np.linalg.LinAlgError as e:
        raise SimulationError("noise covariance is not positive definite") from e
    K = coeff.shape[0]
    shocks = rng.standard_normal((n_obs + burn_in, K)) @ chol.T
    values = np.zeros((n_obs + burn_in, K))
    for t in range(1, n_obs + burn_in):
        values[t] = coeff @ values[t - 1] + shocks[t]
    return values[burn_in:]


def simulate_prices(spec: SimulationSpec) -> PricePanel:
    """ Price panel of n_obs + 1 business days whose log returns follow the spec. """
    rng = np.random.default_rng(spec.seed)
    returns = simulate_var(spec.coefficient_matrix(), spec.noise_covariance(), spec.n_obs, rng, spec.burn_in)
    log_prices = np.vstack([np.zeros((1, spec.n_series)), np.cumsum(returns, axis=0)])
    dates = pd.bdate_range(start=spec.start_date, periods=spec.n_obs + 1)
    logger.info(f"Simulated {spec.n_obs} returns of {spec.n_series} series with seed {spec.seed}")
    return PricePanel(dates, tuple(spec.series_labels()), spec.start_price * np.exp(log_prices))
