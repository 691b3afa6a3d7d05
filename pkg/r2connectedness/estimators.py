""" Numerical kernels shared by the connectedness engines.

Least squares goes through a column-pivoted QR factorization so collinear
designs are detected instead of silently solved. Quantile regression uses
smoothed iteratively reweighted least squares.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from r2connectedness import logger
from r2connectedness.panel import ReturnPanel

RANK_TOLERANCE = 1e-10
SYMMETRY_TOLERANCE = 1e-10
PSD_FLOOR = 1e-10

IRLS_MAX_ITER = 200
IRLS_MIN_SMOOTHING = 1e-6
IRLS_TOLERANCE = 1e-8


class EstimationError(ValueError):
    """ A model cannot be estimated from the given data. """


class RankDeficiencyError(EstimationError):
    """ Design matrix columns are (numerically) collinear. """

    def __init__(self, message, column: Optional[int] = None):
        super().__init__(message)
        self.column = column


@dataclass(frozen=True)
class LinearFit:
    coefficients: np.ndarray
    intercept: float
    residuals: np.ndarray
    r_squared: float
    bic: float

    @property
    def ssr(self) -> float:
        return float(self.residuals @ self.residuals)


@dataclass(frozen=True)
class QuantileFit:
    tau: float
    coefficients: np.ndarray
    intercept: float
    residuals: np.ndarray
    objective: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class VarModel:
    """ VAR(p) with coefficient matrices A_1..A_p (row = equation). """
    p: int
    labels: tuple
    coeff: list
    intercept: np.ndarray
    sigma: np.ndarray
    residuals: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def K(self) -> int:
        return len(self.labels)

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(companion_matrix(self)))))

    @property
    def is_stable(self) -> bool:
        return self.spectral_radius < 1.0


def check_loss(residuals: np.ndarray, tau: float) -> float:
    """ Σ ρ_tau(u), ρ_tau(u) = u·(tau - 1{u < 0}). """
    residuals = np.asarray(residuals, dtype=float)
    return float(np.sum(residuals * (tau - (residuals < 0))))


def _design(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise EstimationError(f"design {X.shape} does not match response {y.shape}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise EstimationError("design or response contains non-finite values")
    return X, y


def _with_constant(X: np.ndarray, with_intercept: bool) -> np.ndarray:
    if not with_intercept:
        return X
    return np.hstack([np.ones((X.shape[0], 1)), X])


def _lstsq_qr(A: np.ndarray, y: np.ndarray, offset: int = 0) -> np.ndarray:
    """ Least squares through pivoted QR; raises on a numerically dependent column. """
    Q, R, pivots = scipy.linalg.qr(A, mode="economic", pivoting=True)
    diagonal = np.abs(np.diag(R))
    if diagonal.size and diagonal[0] > 0:
        dependent = np.flatnonzero(diagonal < RANK_TOLERANCE * diagonal[0])
    else:
        dependent = np.arange(A.shape[1])
    if dependent.size:
        column = int(pivots[dependent[0]]) - offset
        raise RankDeficiencyError(f"design is rank deficient (column {column} is collinear with the others)",
                                  column=column)
    solution = np.empty(A.shape[1])
    solution[pivots] = scipy.linalg.solve_triangular(R, Q.T @ y)
    return solution


def ols_fit(X, y, with_intercept: bool = True) -> LinearFit:
    """ Ordinary least squares with R² and a Gaussian BIC. """
    X, y = _design(X, y)
    T, m = X.shape
    if T <= m + 1:
        raise EstimationError(f"need more than {m + 1} observations for {m} regressors, got {T}")
    A = _with_constant(X, with_intercept)
    solution = _lstsq_qr(A, y, offset=int(with_intercept))
    intercept = float(solution[0]) if with_intercept else 0.0
    coefficients = solution[1:] if with_intercept else solution
    residuals = y - A @ solution

    ssr = float(residuals @ residuals)
    centered = y - y.mean() if with_intercept else y
    sst = float(centered @ centered)
    r_squared = float(np.clip(1.0 - ssr / sst, 0.0, 1.0)) if sst > 0 else 0.0
    bic = T * np.log(max(ssr, np.finfo(float).tiny) / T) + (m + 1) * np.log(T)
    return LinearFit(coefficients=coefficients, intercept=intercept, residuals=residuals,
                     r_squared=r_squared, bic=float(bic))


def _weighted_solve(A: np.ndarray, y: np.ndarray, weights: np.ndarray) -> np.ndarray:
    root = np.sqrt(weights)
    solution, *_ = np.linalg.lstsq(A * root[:, None], y * root, rcond=None)
    return solution


def quantile_fit(X, y, tau: float, with_intercept: bool = True) -> QuantileFit:
    """ Minimize the check loss at quantile `tau` by smoothed IRLS.

    Starts from the least squares solution. Each step solves a weighted least
    squares problem with weights tau/|u| (or (1 - tau)/|u| below the fit),
    where |u| is floored at a smoothing constant that halves every iteration
    down to 1e-6. The best iterate by check loss is returned; `converged` is
    False when the coefficient change never fell below 1e-8 at the final
    smoothing level.
    """
    if not 0.0 < tau < 1.0:
        raise EstimationError(f"quantile tau must be in (0, 1), got {tau}")
    X, y = _design(X, y)
    T, m = X.shape
    if T <= m + 1:
        raise EstimationError(f"need more than {m + 1} observations for {m} regressors, got {T}")
    A = _with_constant(X, with_intercept)
    beta = _lstsq_qr(A, y, offset=int(with_intercept))

    residuals = y - A @ beta
    best, best_objective = beta, check_loss(residuals, tau)
    smoothing = max(float(np.median(np.abs(residuals))), IRLS_MIN_SMOOTHING)
    converged = False
    iterations = 0
    for iterations in range(1, IRLS_MAX_ITER + 1):
        asymmetry = np.where(residuals >= 0, tau, 1.0 - tau)
        weights = asymmetry / np.maximum(np.abs(residuals), smoothing)
        updated = _weighted_solve(A, y, weights)
        change = float(np.max(np.abs(updated - beta)))
        beta = updated
        residuals = y - A @ beta
        objective = check_loss(residuals, tau)
        if objective < best_objective:
            best, best_objective = beta, objective
        if smoothing <= IRLS_MIN_SMOOTHING and change < IRLS_TOLERANCE:
            converged = True
            break
        smoothing = max(smoothing / 2.0, IRLS_MIN_SMOOTHING)

    if not converged:
        logger.warning(f"Quantile fit at tau={tau} did not converge after {iterations} iterations")
    intercept = float(best[0]) if with_intercept else 0.0
    coefficients = best[1:] if with_intercept else best
    return QuantileFit(tau=tau, coefficients=coefficients, intercept=intercept, residuals=y - A @ best,
                       objective=best_objective, iterations=iterations, converged=converged)


def lag_matrix(values, p: int, offset: Optional[int] = None) -> tuple[np.ndarray, np.ndarray]:
    """ Responses values[offset:] and the stacked lags 1..p of every column.

    `offset` defaults to p. A larger offset drops extra leading rows so fits
    with different p share one estimation sample.
    """
    values = np.asarray(values, dtype=float)
    offset = p if offset is None else offset
    if p < 1 or offset < p:
        raise EstimationError(f"invalid lag order {p} with offset {offset}")
    T = values.shape[0]
    if T <= offset:
        raise EstimationError(f"need more than {offset} observations, got {T}")
    Y = values[offset:]
    Z = np.hstack([values[offset - lag:T - lag] for lag in range(1, p + 1)])
    return Y, Z


def split_lags(B: np.ndarray, K: int, p: int) -> list:
    """ Rows of B are equations; columns are lag 1 of all series, then lag 2, ... """
    return [B[:, lag * K:(lag + 1) * K].copy() for lag in range(p)]


def check_var_sample(T: int, K: int, p: int):
    if p < 1:
        raise EstimationError(f"lag order must be at least 1, got {p}")
    if T - p <= K * p + 1:
        raise EstimationError(f"VAR({p}) with {K} series needs more than {K * p + 1 + p} observations, got {T}")


def var_fit(returns: ReturnPanel, p: int) -> VarModel:
    """ Equation by equation OLS of every series on p lags of all series plus a constant. """
    values = np.asarray(returns.returns)
    T, K = values.shape
    check_var_sample(T, K, p)
    Y, Z = lag_matrix(values, p)

    B = np.empty((K, K * p))
    intercept = np.empty(K)
    residuals = np.empty_like(Y)
    for k in range(K):
        try:
            fit = ols_fit(Z, Y[:, k])
        except RankDeficiencyError as e:
            raise RankDeficiencyError(f"VAR equation {returns.labels[k]}: {e}", column=e.column) from e
        B[k], intercept[k], residuals[:, k] = fit.coefficients, fit.intercept, fit.residuals

    sigma = residuals.T @ residuals / (T - p)
    model = VarModel(p=p, labels=returns.labels, coeff=split_lags(B, K, p), intercept=intercept,
                     sigma=(sigma + sigma.T) / 2.0, residuals=residuals)
    radius = model.spectral_radius
    model.metadata["spectral_radius"] = radius
    if radius >= 1.0:
        logger.warning(f"VAR({p}) fit is not stable: companion spectral radius {radius:.4f}")
    return model


def companion_matrix(model: VarModel) -> np.ndarray:
    K, p = model.K, model.p
    companion = np.zeros((K * p, K * p))
    companion[:K] = np.hstack(model.coeff)
    if p > 1:
        companion[K:, :-K] = np.eye(K * (p - 1))
    return companion


def select_lag_bic(returns: ReturnPanel, p_max: int) -> int:
    """ Lag order in 1..p_max minimizing ln det Σ_p + p·K²·ln(T_eff)/T_eff on a common sample. """
    values = np.asarray(returns.returns)
    T, K = values.shape
    if p_max < 1:
        raise EstimationError(f"p_max must be at least 1, got {p_max}")
    T_eff = T - p_max
    if T_eff <= K * p_max + 1:
        raise EstimationError(f"p_max={p_max} is infeasible for {T} observations of {K} series")

    best_p, best_bic = 1, np.inf
    for p in range(1, p_max + 1):
        Y, Z = lag_matrix(values, p, offset=p_max)
        A = _with_constant(Z, True)
        residuals = np.column_stack([Y[:, k] - A @ _lstsq_qr(A, Y[:, k], offset=1) for k in range(K)])
        sign, logdet = np.linalg.slogdet(residuals.T @ residuals / T_eff)
        bic = (logdet if sign > 0 else -np.inf) + p * K * K * np.log(T_eff) / T_eff
        logger.debug(f"BIC(p={p}) = {bic:.6f}")
        if bic < best_bic:
            best_p, best_bic = p, bic
    return best_p


def symmetric_sqrt(M) -> np.ndarray:
    """ V·Λ^{1/2}·V' with negative eigenvalues clipped to zero. """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise EstimationError(f"expected a square matrix, got shape {M.shape}")
    asymmetry = float(np.max(np.abs(M - M.T))) if M.size else 0.0
    if asymmetry > SYMMETRY_TOLERANCE:
        raise EstimationError(f"matrix is not symmetric (max deviation {asymmetry:.3g})")
    eigenvalues, eigenvectors = np.linalg.eigh((M + M.T) / 2.0)
    root = np.sqrt(np.clip(eigenvalues, 0.0, None))
    return (eigenvectors * root) @ eigenvectors.T


def nearest_psd(M) -> np.ndarray:
    """ Clip eigenvalues at 1e-10 and rescale back to a unit diagonal. """
    M = np.asarray(M, dtype=float)
    symmetric = (M + M.T) / 2.0
    eigenvalues, eigenvectors = np.linalg.eigh(symmetric)
    if eigenvalues.size and eigenvalues[0] >= PSD_FLOOR:
        return symmetric
    repaired = (eigenvectors * np.clip(eigenvalues, PSD_FLOOR, None)) @ eigenvectors.T
    scale = 1.0 / np.sqrt(np.diag(repaired))
    repaired = repaired * np.outer(scale, scale)
    repaired = (repaired + repaired.T) / 2.0
    np.fill_diagonal(repaired, 1.0)
    return repaired
