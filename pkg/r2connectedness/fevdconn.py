""" Variance decomposition connectedness: Diebold-Yilmaz (VAR) and quantile VAR. """
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from r2connectedness import logger
from r2connectedness.estimators import EstimationError, VarModel, check_var_sample, split_lags, lag_matrix, \
    quantile_fit, var_fit
from r2connectedness.panel import ReturnPanel
from r2connectedness.r2conn import ConnectednessError, ConnectednessTable, SpilloverIndices, aggregate_indices
from r2connectedness.scheduler import parallel_map

DEFAULT_HORIZON = 10
DEFAULT_TAU = 0.5


@dataclass(frozen=True)
class GfevdTable:
    """ Row-normalized generalized forecast error variance shares at horizon H. """
    labels: tuple
    theta: np.ndarray
    horizon: int
    unnormalized: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def table(self) -> ConnectednessTable:
        return gfevd_to_connectedness(self)

    @property
    def indices(self) -> SpilloverIndices:
        return aggregate_indices(self.table)


def ma_coefficients(model: VarModel, H: int) -> list:
    """ Wold matrices A_0 = I, A_h = Σ_{j=1..min(h,p)} Φ_j·A_{h-j}, for h < H. """
    if H < 1:
        raise ConnectednessError(f"horizon must be at least 1, got {H}")
    K = model.K
    A = [np.eye(K)]
    for h in range(1, H):
        A.append(sum(model.coeff[j - 1] @ A[h - j] for j in range(1, min(h, model.p) + 1)))
    return A


def gfevd(model: VarModel, H: int = DEFAULT_HORIZON) -> GfevdTable:
    """ Generalized FEVD; invariant to the ordering of the series. """
    sigma = np.asarray(model.sigma, dtype=float)
    variances = np.diag(sigma)
    if np.any(variances <= 0):
        k = int(np.argmin(variances))
        raise ConnectednessError("zero residual variance", model.labels[k])
    A = np.stack(ma_coefficients(model, H))
    A_sigma = A @ sigma
    numerator = (A_sigma ** 2).sum(axis=0) / variances[None, :]
    denominator = np.einsum("hik,hik->i", A_sigma, A)
    unnormalized = numerator / denominator[:, None]
    theta = unnormalized / unnormalized.sum(axis=1, keepdims=True)
    metadata = dict(model.metadata)
    metadata.update({"horizon": H, "p": model.p})
    return GfevdTable(labels=model.labels, theta=theta, horizon=H, unnormalized=unnormalized, metadata=metadata)


def gfevd_to_connectedness(table: GfevdTable) -> ConnectednessTable:
    """ Percent table with no contemporaneous/lagged split. """
    return ConnectednessTable.from_total(table.labels, 100.0 * table.theta, table.metadata)


def dy_connectedness(returns: ReturnPanel, p: int = 1, H: int = DEFAULT_HORIZON) -> GfevdTable:
    """ Diebold-Yilmaz connectedness from an OLS VAR(p). """
    try:
        model = var_fit(returns, p)
    except EstimationError as e:
        raise ConnectednessError(str(e)) from e
    table = gfevd(model, H)
    table.metadata["method"] = "dy"
    return table


def _quantile_equation(Z: np.ndarray, Y: np.ndarray, tau: float, labels: tuple, k: int):
    try:
        return quantile_fit(Z, Y[:, k], tau)
    except EstimationError as e:
        raise ConnectednessError(str(e), labels[k]) from e


def qvar_connectedness(returns: ReturnPanel, p: int = 1, H: int = DEFAULT_HORIZON, tau: float = DEFAULT_TAU,
                       threads: int = 1) -> GfevdTable:
    """ Connectedness of a quantile VAR estimated equation by equation at `tau`.

    The residual covariance is the centered moment covariance of the quantile
    residuals with denominator T - p.
    """
    if not 0.0 < tau < 1.0:
        raise ConnectednessError(f"quantile tau must be in (0, 1), got {tau}")
    values = np.asarray(returns.returns)
    T, K = values.shape
    try:
        check_var_sample(T, K, p)
    except EstimationError as e:
        raise ConnectednessError(str(e)) from e
    Y, Z = lag_matrix(values, p)

    fits = parallel_map(partial(_quantile_equation, Z, Y, tau, returns.labels), range(K), threads)
    B = np.vstack([fit.coefficients for fit in fits])
    residuals = np.column_stack([fit.residuals for fit in fits])
    centered = residuals - residuals.mean(axis=0)
    sigma = centered.T @ centered / (T - p)
    converged = {label: fit.converged for label, fit in zip(returns.labels, fits)}
    if not all(converged.values()):
        logger.warning(f"Quantile VAR at tau={tau}: non-convergent equations "
                       f"{[label for label, ok in converged.items() if not ok]}")

    model = VarModel(p=p, labels=returns.labels, coeff=split_lags(B, K, p),
                     intercept=np.array([fit.intercept for fit in fits]), sigma=(sigma + sigma.T) / 2.0,
                     residuals=residuals, metadata={"converged": converged})
    model.metadata["spectral_radius"] = model.spectral_radius
    table = gfevd(model, H)
    table.metadata.update({"method": "qvar", "tau": tau})
    return table
