""" R² decomposition connectedness.

Every series k is regressed on the same-day returns of the other series and
on lags 1..p of all series. The R² of that regression is split into
per-predictor contributions with the relative-weights method, computed from
a correlation matrix so Pearson, Spearman and Kendall bases all work. The
contributions of series i at time t form C[k, i], the contributions of its
lags form L[k, i] (own lags on the diagonal). Everything is in percent.
"""
from dataclasses import dataclass, field
from functools import partial
from typing import Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel

from r2connectedness import logger
from r2connectedness.estimators import EstimationError, nearest_psd, symmetric_sqrt
from r2connectedness.panel import ReturnPanel
from r2connectedness.scheduler import parallel_map
from r2connectedness.stats import CORR_METHODS, CorrMethod, correlation_values
from r2connectedness.utils import render_frame

SINGULAR_TOLERANCE = 1e-10
CONSTANT_TOLERANCE = 1e-12

SPLITS = ("overall", "contemporaneous", "lagged")


class ConnectednessError(ValueError):
    """ A connectedness equation cannot be computed. `equation` names the dependent series. """

    def __init__(self, message, equation: Optional[str] = None):
        super().__init__(f"equation {equation}: {message}" if equation is not None else message)
        self.equation = equation


class DesignSpec(BaseModel):
    """ Column layout of the design of equation k. """
    k: int
    p: int
    contemporaneous_idx: list[int]
    lag_idx: list[tuple[int, int]]
    columns: list[str]

    @property
    def n_predictors(self) -> int:
        return len(self.contemporaneous_idx) + len(self.lag_idx)


def _frozen(values) -> Optional[np.ndarray]:
    if values is None:
        return None
    array = np.array(values, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class ConnectednessTable:
    """ K×K spillover table; row = receiver, column = source, in percent.

    R² tables carry the contemporaneous/lagged split; tables built from a
    variance decomposition only carry `total`.
    """
    labels: tuple
    total: np.ndarray
    contemporaneous: Optional[np.ndarray] = None
    lagged: Optional[np.ndarray] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        for name in ("total", "contemporaneous", "lagged"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        K = len(self.labels)
        if self.total.shape != (K, K):
            raise ConnectednessError(f"table shape {self.total.shape} does not match {K} labels")
        if (self.contemporaneous is None) != (self.lagged is None):
            raise ConnectednessError("contemporaneous and lagged parts must be given together")

    @classmethod
    def from_split(cls, labels, contemporaneous, lagged, metadata=None) -> "ConnectednessTable":
        contemporaneous = np.array(contemporaneous, dtype=float)
        lagged = np.asarray(lagged, dtype=float)
        np.fill_diagonal(contemporaneous, 0.0)
        return cls(labels, contemporaneous + lagged, contemporaneous, lagged, dict(metadata or {}))

    @classmethod
    def from_total(cls, labels, total, metadata=None) -> "ConnectednessTable":
        return cls(labels, total, None, None, dict(metadata or {}))

    @property
    def K(self) -> int:
        return len(self.labels)

    @property
    def has_split(self) -> bool:
        return self.contemporaneous is not None

    @property
    def r_squared(self) -> np.ndarray:
        """ Implied R² of each equation (row sums, as fractions). """
        return self.total.sum(axis=1) / 100.0

    def part(self, split: str) -> np.ndarray:
        if split == "overall":
            return self.total
        if not self.has_split:
            raise ConnectednessError(f"table has no {split} part")
        if split == "contemporaneous":
            return self.contemporaneous
        if split == "lagged":
            return self.lagged
        raise ConnectednessError(f"unknown split {split!r}; expected one of {SPLITS}")


@dataclass(frozen=True)
class SpilloverIndices:
    """ Directional spillovers per series and the total connectedness index. """
    labels: tuple
    to: np.ndarray
    from_: np.ndarray
    net: np.ndarray
    inc_own: np.ndarray
    tci: float
    to_c: Optional[np.ndarray] = None
    to_l: Optional[np.ndarray] = None
    from_c: Optional[np.ndarray] = None
    from_l: Optional[np.ndarray] = None
    net_c: Optional[np.ndarray] = None
    net_l: Optional[np.ndarray] = None
    inc_own_c: Optional[np.ndarray] = None
    inc_own_l: Optional[np.ndarray] = None
    tci_c: Optional[float] = None
    tci_l: Optional[float] = None

    def to_frame(self) -> pd.DataFrame:
        columns = {"TO": self.to, "FROM": self.from_, "NET": self.net, "Inc.Own": self.inc_own}
        if self.to_c is not None:
            columns.update({"TO_C": self.to_c, "TO_L": self.to_l, "FROM_C": self.from_c, "FROM_L": self.from_l,
                            "NET_C": self.net_c, "NET_L": self.net_l})
        return pd.DataFrame(columns, index=list(self.labels))


@dataclass(frozen=True)
class NpdcMatrices:
    """ Net pairwise directional connectedness; [i, j] > 0 means i transmits to j on net. """
    labels: tuple
    overall: np.ndarray
    contemporaneous: Optional[np.ndarray] = None
    lagged: Optional[np.ndarray] = None

    def part(self, split: str) -> np.ndarray:
        value = {"overall": self.overall, "contemporaneous": self.contemporaneous,
                 "lagged": self.lagged}.get(split)
        if value is None:
            raise ConnectednessError(f"no {split} pairwise matrix")
        return value


def _standardize(block: np.ndarray, names: list[str], equation: str) -> np.ndarray:
    mean = block.mean(axis=0)
    sd = block.std(axis=0)
    scale = np.maximum(np.abs(mean), 1.0)
    constant = np.flatnonzero(sd <= CONSTANT_TOLERANCE * scale)
    if constant.size:
        raise ConnectednessError(f"column {names[constant[0]]} is constant over the estimation sample", equation)
    return (block - mean) / sd


def build_design(returns: ReturnPanel, k: int, p: int, standardize: bool = True):
    """ Response and predictors of equation k.

    y is series k at rows p..T-1; X holds the other series at the same rows
    followed by lag 1 of every series, lag 2 of every series, and so on.
    """
    values = np.asarray(returns.returns)
    T, K = values.shape
    label = returns.labels[k]
    if p < 1:
        raise ConnectednessError(f"lag order must be at least 1, got {p}", label)
    n_predictors = (K - 1) + K * p
    if T - p <= n_predictors:
        raise ConnectednessError(
            f"{T} observations leave {T - p} rows for {n_predictors} predictors (K={K}, p={p})", label)

    others = [i for i in range(K) if i != k]
    lags = [(i, lag) for lag in range(1, p + 1) for i in range(K)]
    columns = [returns.labels[i] for i in others] + [f"{returns.labels[i]}(-{lag})" for i, lag in lags]
    X = np.hstack([values[p:, others]] + [values[p - lag:T - lag] for lag in range(1, p + 1)])
    y = values[p:, k]
    spec = DesignSpec(k=k, p=p, contemporaneous_idx=others, lag_idx=lags, columns=columns)

    if standardize:
        X = _standardize(X, columns, label)
        y = _standardize(y[:, None], [label], label)[:, 0]
    else:
        _standardize(np.column_stack([X, y]), columns + [label], label)
    return X, y, spec


def _most_collinear_pair(R: np.ndarray, names: Optional[list]) -> str:
    off = np.abs(R - np.diag(np.diag(R)))
    i, j = np.unravel_index(np.argmax(off), off.shape)
    if names is None:
        names = [f"x{n}" for n in range(R.shape[0])]
    return f"{names[i]} and {names[j]} (correlation {R[i, j]:.6f})"


def decompose_r2(X, y, corr_method: CorrMethod = "pearson", names: Optional[list] = None) -> np.ndarray:
    """ Relative-weights split of the implied R² over the columns of X.

    With R_xx = V·Λ·V' and Δ = V·Λ^{1/2}·V', the response is regressed on
    the orthogonal counterpart of X (β = Δ⁻¹·r_xy) and the weights are
    mapped back through Δ²: ε_j = Σ_m Δ[j, m]²·β_m². Σ ε = r_xy'·R_xx⁻¹·r_xy.
    """
    if corr_method not in CORR_METHODS:
        raise ConnectednessError(f"unknown correlation method {corr_method!r}")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise ConnectednessError(f"design {X.shape} does not match response {y.shape}")
    m = X.shape[1]
    if m == 0:
        return np.zeros(0)

    joint = correlation_values(np.column_stack([X, y]), corr_method)
    R_xx, r_xy = joint[:m, :m], joint[:m, m]

    eigenvalues = np.linalg.eigvalsh(R_xx)
    if np.min(np.abs(eigenvalues)) < SINGULAR_TOLERANCE * max(1.0, np.max(np.abs(eigenvalues))):
        raise ConnectednessError(f"predictors are collinear: {_most_collinear_pair(R_xx, names)}")
    if eigenvalues[0] < 0:
        repaired = nearest_psd(R_xx)
        logger.debug(f"Repaired {corr_method} predictor correlation (min eigenvalue {eigenvalues[0]:.3g}, "
                     f"distance {np.linalg.norm(repaired - R_xx):.3g})")
        R_xx = repaired

    delta = symmetric_sqrt(R_xx)
    try:
        beta = np.linalg.solve(delta, r_xy)
    except np.linalg.LinAlgError as e:
        raise ConnectednessError(f"singular correlation root: {_most_collinear_pair(R_xx, names)}") from e
    return (delta ** 2) @ beta ** 2


def _equation(returns: ReturnPanel, p: int, corr_method: str, standardize: bool, k: int):
    label = returns.labels[k]
    try:
        X, y, spec = build_design(returns, k, p, standardize)
        weights = decompose_r2(X, y, corr_method, spec.columns)
    except ConnectednessError as e:
        if e.equation is not None:
            raise
        raise ConnectednessError(str(e), label) from e
    except EstimationError as e:
        raise ConnectednessError(str(e), label) from e
    logger.debug(f"Equation {label}: implied R² {weights.sum():.6f}")
    return weights


def connectedness_table(returns: ReturnPanel, p: int = 1, corr_method: CorrMethod = "pearson",
                        standardize: bool = True, threads: int = 1) -> ConnectednessTable:
    """ Assemble the R² connectedness table from the K equations. """
    K = returns.K
    if K < 1:
        raise ConnectednessError("no series in panel")
    weights = parallel_map(partial(_equation, returns, p, corr_method, standardize), range(K), threads)

    C = np.zeros((K, K))
    L = np.zeros((K, K))
    for k, epsilon in enumerate(weights):
        others = [i for i in range(K) if i != k]
        C[k, others] = epsilon[:K - 1]
        L[k] = epsilon[K - 1:].reshape(p, K).sum(axis=0)
    metadata = {"method": "r2", "p": p, "corr_method": corr_method,
                "standardize": "window" if standardize else "none", "n_obs": returns.T}
    return ConnectednessTable.from_split(returns.labels, 100.0 * C, 100.0 * L, metadata)


def _off_diagonal(M: np.ndarray) -> np.ndarray:
    return M - np.diag(np.diag(M))


def _directional(M: np.ndarray):
    off = _off_diagonal(M)
    to = off.sum(axis=0)
    from_ = off.sum(axis=1)
    return to, from_, to - from_


def aggregate_indices(table: ConnectednessTable) -> SpilloverIndices:
    """ TO, FROM, NET, Inc.Own and TCI; own-lag diagonal excluded from TCI. """
    K = table.K
    to, from_, net = _directional(table.total)
    own = np.diag(table.total)
    indices = {"labels": table.labels, "to": to, "from_": from_, "net": net,
               "inc_own": to + own, "tci": float(to.sum() / K)}
    if table.has_split:
        to_c, from_c, net_c = _directional(table.contemporaneous)
        to_l, from_l, net_l = _directional(table.lagged)
        indices.update({"to_c": to_c, "to_l": to_l, "from_c": from_c, "from_l": from_l,
                        "net_c": net_c, "net_l": net_l,
                        "inc_own_c": to_c, "inc_own_l": to_l + np.diag(table.lagged),
                        "tci_c": float(to_c.sum() / K), "tci_l": float(to_l.sum() / K)})
    return SpilloverIndices(**indices)


def npdc(table: ConnectednessTable) -> NpdcMatrices:
    """ NPDC[i, j] = table[j, i] - table[i, j], for the total and each part. """
    def pairwise(M):
        return None if M is None else M.T - M

    return NpdcMatrices(labels=table.labels, overall=pairwise(table.total),
                        contemporaneous=pairwise(table.contemporaneous), lagged=pairwise(table.lagged))


def _pair(c: float, l: float, fmt: str) -> str:
    return f"({c:{fmt}}, {l:{fmt}})"


def table_to_frame(table: ConnectednessTable, raw: bool = False) -> pd.DataFrame:
    """ Appendix layout: cells, FROM column, TO / Inc.Own / NET rows and the TCI corner.

    Split tables get a second line under every row with the (contemporaneous,
    lagged) pair. `raw` reports fractions with four decimals instead of percent.
    """
    scale, fmt = (0.01, ".4f") if raw else (1.0, ".2f")
    labels = list(table.labels)
    idx = aggregate_indices(table)
    split = table.has_split
    rows = []

    def add(name, values, pairs=None):
        rows.append([name] + [f"{v * scale:{fmt}}" if isinstance(v, float) else v for v in values])
        if split:
            rows.append([""] + [_pair(c * scale, l * scale, fmt) if c is not None else l for c, l in pairs])

    for k, label in enumerate(labels):
        values = [float(v) for v in table.total[k]] + [float(idx.from_[k])]
        pairs = None
        if split:
            pairs = [(table.contemporaneous[k, i], table.lagged[k, i]) for i in range(table.K)]
            pairs.append((idx.from_c[k], idx.from_l[k]))
        add(label, values, pairs)

    add("TO", [float(v) for v in idx.to] + [float(idx.to.sum())],
        list(zip(idx.to_c, idx.to_l)) + [(idx.to_c.sum(), idx.to_l.sum())] if split else None)
    add("Inc.Own", [float(v) for v in idx.inc_own] + ["TCI"],
        list(zip(idx.inc_own_c, idx.inc_own_l)) + [(None, "(TCI_C, TCI_L)")] if split else None)
    add("NET", [float(v) for v in idx.net] + [float(idx.tci)],
        list(zip(idx.net_c, idx.net_l)) + [(idx.tci_c, idx.tci_l)] if split else None)
    return pd.DataFrame(rows, columns=[""] + labels + ["FROM"])


def render_table(table: ConnectednessTable, raw: bool = False, title: Optional[str] = None) -> str:
    return render_frame(table_to_frame(table, raw), title)
