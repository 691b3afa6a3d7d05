""" Descriptive statistics, normality and unit-root tests, correlation matrices. """
import math
from typing import Literal, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field
from scipy import stats as sps
from statsmodels.tools.sm_exceptions import MissingDataError
from statsmodels.tsa.stattools import adfuller

from r2connectedness import logger
from r2connectedness.panel import ReturnPanel

CorrMethod = Literal["pearson", "spearman", "kendall"]
CORR_METHODS = ("pearson", "spearman", "kendall")

# Reported significance levels, strictest first.
STAR_LEVELS = ((0.01, "***"), (0.05, "**"), (0.10, "*"))


class StatsError(ValueError):
    """ Input series cannot be summarized. """


class AdfSpec(BaseModel):
    """ Augmented Dickey-Fuller configuration. Constant only, no trend. """
    regression: Literal["c"] = "c"
    autolag: Optional[Literal["t-stat", "AIC", "BIC"]] = "t-stat"
    maxlag: Optional[int] = Field(None, ge=0)
    min_obs: int = 50


class AdfResult(BaseModel):
    stat: float
    level: Literal["none", "10%", "5%", "1%"]
    used_lag: int = 0
    critical_values: dict[str, float] = Field(default_factory=dict)


class DescriptiveRow(BaseModel):
    """ One line of the descriptive statistics table. """
    label: str
    n_obs: int
    mean: float
    sd: float = Field(ge=0)
    skewness: float
    kurtosis: float
    jb_stat: float = Field(ge=0)
    jb_p: float = Field(ge=0, le=1)
    adf_stat: float
    adf_level: Literal["none", "10%", "5%", "1%"]


class CorrelationMatrix(BaseModel):
    """ Symmetric correlation matrix with pairwise p-values. """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    method: CorrMethod
    labels: tuple
    values: np.ndarray
    pvalues: np.ndarray
    n_obs: int
    mask_level: float = 0.10

    def to_frame(self, masked: bool = False) -> pd.DataFrame:
        """ Values as a labelled frame; `masked` blanks entries not significant at `mask_level`. """
        values = significance_mask(self, self.mask_level).filled(np.nan) if masked else self.values
        return pd.DataFrame(values, index=list(self.labels), columns=list(self.labels))


def _as_series(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise StatsError(f"expected a 1-dimensional series, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise StatsError("series contains non-finite values")
    return x


def _check_nonconstant(x: np.ndarray, label: str = "series"):
    if x.size == 0 or np.all(x == x[0]):
        raise StatsError(f"{label} is constant")


def sample_moments(x) -> tuple[float, float, float, float]:
    """ Mean, sd (n - 1), skewness and raw kurtosis (population moments, normal = 3). """
    x = _as_series(x)
    if x.size < 2:
        raise StatsError(f"need at least 2 observations, got {x.size}")
    _check_nonconstant(x)
    mean = float(np.mean(x))
    sd = float(np.std(x, ddof=1))
    skewness = float(sps.skew(x, bias=True))
    kurtosis = float(sps.kurtosis(x, fisher=False, bias=True))
    return mean, sd, skewness, kurtosis


def jarque_bera(x) -> tuple[float, float]:
    """ JB = n/6 (S² + (K - 3)²/4), chi-square with 2 degrees of freedom. """
    x = _as_series(x)
    if x.size < 8:
        raise StatsError(f"Jarque-Bera needs at least 8 observations, got {x.size}")
    _, _, skewness, kurtosis = sample_moments(x)
    stat = x.size / 6.0 * (skewness ** 2 + (kurtosis - 3.0) ** 2 / 4.0)
    return float(stat), float(sps.chi2.sf(stat, 2))


def schwert_maxlag(n: int) -> int:
    return int(math.floor(12 * (n / 100.0) ** 0.25))


def adf_test(x, spec: Optional[AdfSpec] = None) -> AdfResult:
    """ Dickey-Fuller t-statistic with a constant, classified against MacKinnon critical values.

    Lags start from the Schwert rule and are pruned by significance of the
    last lag. A series whose first difference is constant (a pure trend)
    carries no stochastic information and is reported as non-stationary.
    """
    spec = spec or AdfSpec()
    x = _as_series(x)
    if x.size < spec.min_obs:
        raise StatsError(f"ADF needs at least {spec.min_obs} observations, got {x.size}")
    diffs = np.diff(x)
    if np.allclose(diffs, diffs[0], rtol=0, atol=1e-12 * max(1.0, abs(diffs[0]))):
        logger.debug("Constant first difference, ADF regression is degenerate")
        return AdfResult(stat=float("nan"), level="none")

    maxlag = spec.maxlag if spec.maxlag is not None else schwert_maxlag(x.size)
    try:
        stat, _, used_lag, _, critical, *_ = adfuller(x, maxlag=maxlag, regression=spec.regression,
                                                      autolag=spec.autolag)
    except (ValueError, np.linalg.LinAlgError, MissingDataError) as e:
        raise StatsError(f"ADF regression failed: {e}") from e

    level = "none"
    for name in ("10%", "5%", "1%"):
        if stat < critical[name]:
            level = name
    return AdfResult(stat=float(stat), level=level, used_lag=int(used_lag),
                     critical_values={key: float(value) for key, value in critical.items()})


def pearson_pvalue(r, n: int):
    """ Two-sided p-value of t = r·sqrt((n - 2)/(1 - r²)) with n - 2 degrees of freedom. """
    r = np.clip(np.asarray(r, dtype=float), -1.0, 1.0)
    dof = n - 2
    with np.errstate(divide="ignore", invalid="ignore"):
        t = r * np.sqrt(dof / (1.0 - r ** 2))
    p = 2.0 * sps.t.sf(np.abs(t), dof)
    return np.where(np.abs(r) >= 1.0, 0.0, p)


def _kendall(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    K = values.shape[1]
    corr = np.eye(K)
    pvalues = np.zeros((K, K))
    for i in range(K):
        for j in range(i + 1, K):
            result = sps.kendalltau(values[:, i], values[:, j], variant="b", method="asymptotic")
            corr[i, j] = corr[j, i] = result.statistic
            pvalues[i, j] = pvalues[j, i] = result.pvalue
    return corr, pvalues


def correlation_values(values: np.ndarray, method: CorrMethod) -> np.ndarray:
    """ K×K correlation of the columns of `values`. Spearman uses average ranks. """
    if method == "pearson":
        corr = np.corrcoef(values, rowvar=False)
    elif method == "spearman":
        corr = np.corrcoef(sps.rankdata(values, axis=0), rowvar=False)
    elif method == "kendall":
        corr = _kendall(values)[0]
    else:
        raise StatsError(f"unknown correlation method {method!r}")
    corr = np.atleast_2d(corr)
    corr = (corr + corr.T) / 2.0
    np.fill_diagonal(corr, 1.0)
    return np.clip(corr, -1.0, 1.0)


def correlation_matrix(returns: ReturnPanel, method: CorrMethod = "pearson",
                       mask_level: float = 0.10) -> CorrelationMatrix:
    if returns.K < 2:
        raise StatsError(f"correlation needs at least 2 series, got {returns.K}")
    if returns.T < 3:
        raise StatsError(f"correlation needs at least 3 observations, got {returns.T}")
    values = np.asarray(returns.returns)
    for k, label in enumerate(returns.labels):
        _check_nonconstant(values[:, k], label)

    if method == "kendall":
        corr, pvalues = _kendall(values)
        corr = np.clip(corr, -1.0, 1.0)
    else:
        corr = correlation_values(values, method)
        pvalues = pearson_pvalue(corr, returns.T)
    np.fill_diagonal(pvalues, 0.0)
    return CorrelationMatrix(method=method, labels=returns.labels, values=corr,
                             pvalues=(pvalues + pvalues.T) / 2.0, n_obs=returns.T, mask_level=mask_level)


def significance_mask(corr: CorrelationMatrix, level: float = 0.10) -> np.ma.MaskedArray:
    """ Correlations with entries whose p-value exceeds `level` masked out. """
    if not 0.0 < level < 1.0:
        raise StatsError(f"significance level must be in (0, 1), got {level}")
    hidden = (corr.pvalues > level) | (corr.values == 0.0)
    np.fill_diagonal(hidden, False)
    return np.ma.masked_array(corr.values, mask=hidden)


def stars(p: float) -> str:
    for level, mark in STAR_LEVELS:
        if p <= level:
            return mark
    return ""


def describe(returns: ReturnPanel, adf_spec: Optional[AdfSpec] = None) -> list[DescriptiveRow]:
    """ One row of moments, Jarque-Bera and ADF results per series. """
    if returns.T < 20:
        raise StatsError(f"descriptive statistics need at least 20 observations, got {returns.T}")
    adf_spec = adf_spec or AdfSpec()
    rows = []
    for k, label in enumerate(returns.labels):
        x = np.asarray(returns.returns[:, k])
        try:
            mean, sd, skewness, kurtosis = sample_moments(x)
        except StatsError as e:
            raise StatsError(f"{label}: {e}") from e
        jb_stat, jb_p = jarque_bera(x)
        if x.size < adf_spec.min_obs:
            logger.warning(f"{label}: ADF skipped, {x.size} observations is below {adf_spec.min_obs}")
            adf = AdfResult(stat=math.nan, level="none")
        else:
            adf = adf_test(x, adf_spec)
        logger.debug(f"{label}: JB={jb_stat:.3f} (p={jb_p:.4f}), ADF={adf.stat:.3f} lag={adf.used_lag}")
        rows.append(DescriptiveRow(label=label, n_obs=x.size, mean=mean, sd=sd, skewness=skewness,
                                   kurtosis=kurtosis, jb_stat=jb_stat, jb_p=jb_p,
                                   adf_stat=adf.stat, adf_level=adf.level))
    return rows


def describe_frame(rows: list[DescriptiveRow], decimals: int = 3) -> pd.DataFrame:
    """ Table layout with significance stars on the JB and ADF columns. """
    adf_marks = {"none": "", "10%": "*", "5%": "**", "1%": "***"}
    records = []
    for row in rows:
        adf = "NA" if math.isnan(row.adf_stat) else f"{row.adf_stat:.{decimals}f}{adf_marks[row.adf_level]}"
        records.append({
            "series": row.label,
            "mean": f"{row.mean:.{decimals + 3}f}",
            "sd": f"{row.sd:.{decimals + 3}f}",
            "skewness": f"{row.skewness:.{decimals}f}",
            "kurtosis": f"{row.kurtosis:.{decimals}f}",
            "jarque_bera": f"{row.jb_stat:.{decimals}f}{stars(row.jb_p)}",
            "adf": adf,
        })
    return pd.DataFrame.from_records(records)
