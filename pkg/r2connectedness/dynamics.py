""" Rolling-window connectedness, subsample splits and the robustness battery. """
from dataclasses import dataclass, field
from datetime import date
from functools import cached_property, partial
from typing import Literal, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, field_validator

from r2connectedness import logger
from r2connectedness.estimators import EstimationError, select_lag_bic
from r2connectedness.fevdconn import DEFAULT_HORIZON, DEFAULT_TAU, dy_connectedness, qvar_connectedness
from r2connectedness.panel import ReturnPanel
from r2connectedness.r2conn import ConnectednessError, ConnectednessTable, aggregate_indices, connectedness_table, \
    npdc
from r2connectedness.scheduler import parallel_map

EVENT_MARKERS = {
    date(2022, 2, 24): "conflict outbreak",
    date(2023, 3, 18): "BSGI extension shortened",
}
DEFAULT_SEGMENT_LABELS = ("pre_conflict", "conflict", "bsgi")


class WindowError(ValueError):
    """ A rolling or subsample request cannot be served. `date` is the window end date when known. """

    def __init__(self, message, date=None):
        super().__init__(message)
        self.date = date


class EngineSpec(BaseModel):
    """ Connectedness engine and its parameters. """
    method: Literal["r2", "dy", "qvar"] = "r2"
    p: int = Field(1, ge=1)
    horizon: int = Field(DEFAULT_HORIZON, ge=1)
    tau: float = Field(DEFAULT_TAU, gt=0, lt=1)
    corr_method: Literal["pearson", "spearman", "kendall"] = "pearson"
    standardize: bool = True
    reselect_lag: bool = False
    p_max: int = Field(5, ge=1)

    def describe(self) -> dict:
        """ Parameters that matter for this method, for metadata and manifests. """
        values = {"method": self.method, "p": self.p, "reselect_lag": self.reselect_lag}
        if self.reselect_lag:
            values["p_max"] = self.p_max
        if self.method == "r2":
            values.update({"corr_method": self.corr_method,
                           "standardize": "window" if self.standardize else "none"})
        else:
            values["horizon"] = self.horizon
        if self.method == "qvar":
            values["tau"] = self.tau
        return values

    def min_observations(self, K: int) -> int:
        """ Smallest number of return rows the engine can estimate on. """
        p = self.p_max if self.reselect_lag else self.p
        if self.method == "r2":
            return (K - 1) + K * p + p + 1
        return K * p + p + 2


def static_connectedness(returns: ReturnPanel, engine: Optional[EngineSpec] = None,
                         threads: int = 1) -> ConnectednessTable:
    """ One connectedness table over the whole panel with the chosen engine. """
    engine = engine or EngineSpec()
    p = engine.p
    if engine.reselect_lag:
        try:
            p = select_lag_bic(returns, engine.p_max)
        except EstimationError as e:
            raise ConnectednessError(str(e)) from e
        logger.debug(f"BIC selected lag order {p}")
    if engine.method == "r2":
        table = connectedness_table(returns, p, engine.corr_method, engine.standardize, threads)
    elif engine.method == "dy":
        table = dy_connectedness(returns, p, engine.horizon).table
    else:
        table = qvar_connectedness(returns, p, engine.horizon, engine.tau, threads).table
    table.metadata["p"] = p
    return table


@dataclass(frozen=True)
class RollingSeries:
    """ One connectedness table per completed window, stamped with the window end date. """
    dates: pd.DatetimeIndex
    labels: tuple
    tables: list
    metadata: dict = field(default_factory=dict)
    skipped: list = field(default_factory=list)

    def __len__(self):
        return len(self.tables)

    @cached_property
    def indices(self) -> list:
        return [aggregate_indices(table) for table in self.tables]

    @property
    def has_split(self) -> bool:
        return bool(self.tables) and self.tables[0].has_split

    def _series(self, name: str) -> np.ndarray:
        return np.array([getattr(idx, name) for idx in self.indices], dtype=float)

    @property
    def tci(self) -> pd.Series:
        return pd.Series(self._series("tci"), index=self.dates, name="tci")

    @property
    def tci_c(self) -> Optional[pd.Series]:
        return pd.Series(self._series("tci_c"), index=self.dates, name="tci_c") if self.has_split else None

    @property
    def tci_l(self) -> Optional[pd.Series]:
        return pd.Series(self._series("tci_l"), index=self.dates, name="tci_l") if self.has_split else None

    def directional(self, name: str) -> pd.DataFrame:
        """ Dates x series frame of one directional measure, e.g. `net` or `to_c`. """
        if not self.tables:
            return pd.DataFrame(columns=list(self.labels))
        return pd.DataFrame(self._series(name), index=self.dates, columns=list(self.labels))

    @property
    def npdc(self) -> np.ndarray:
        """ n_windows x K x K net pairwise matrices. """
        return np.stack([npdc(table).overall for table in self.tables])

    def select(self, mask) -> "RollingSeries":
        mask = np.asarray(mask, dtype=bool)
        return RollingSeries(self.dates[mask], self.labels, [t for t, keep in zip(self.tables, mask) if keep],
                             dict(self.metadata), list(self.skipped))

    def to_long_frame(self) -> pd.DataFrame:
        """ Long format: date, measure, series, value, split. """
        if not self.tables:
            return pd.DataFrame(columns=["date", "measure", "series", "value", "split"])
        splits = ("overall", "contemporaneous", "lagged") if self.has_split else ("overall",)
        suffix = {"overall": "", "contemporaneous": "_c", "lagged": "_l"}
        labels = list(self.labels)
        K = len(labels)
        pairs = [(i, j) for i in range(K) for j in range(K) if i != j]
        frames = []
        for split in splits:
            tci = self._series("tci" + suffix[split])
            frames.append(pd.DataFrame({"date": self.dates, "measure": "tci", "series": "", "value": tci,
                                        "split": split}))
            for measure, attribute in (("to", "to"), ("from", "from_"), ("net", "net")):
                values = self._series((attribute + suffix[split]).replace("__", "_"))
                for k, label in enumerate(labels):
                    frames.append(pd.DataFrame({"date": self.dates, "measure": measure, "series": label,
                                                "value": values[:, k], "split": split}))
            pairwise = np.stack([npdc(table).part(split) for table in self.tables]) if self.tables \
                else np.zeros((0, K, K))
            for i, j in pairs:
                frames.append(pd.DataFrame({"date": self.dates, "measure": "npdc",
                                            "series": f"{labels[i]}->{labels[j]}", "value": pairwise[:, i, j],
                                            "split": split}))
        frame = pd.concat(frames, ignore_index=True)
        frame["date"] = pd.DatetimeIndex(frame["date"]).strftime("%Y-%m-%d")
        return frame


def _window_job(returns: ReturnPanel, window: int, engine: EngineSpec, start: int):
    panel = returns.slice(start, start + window)
    end = panel.dates[-1]
    try:
        table = static_connectedness(panel, engine)
    except (EstimationError, ConnectednessError) as e:
        logger.warning(f"Skipping window ending {end.date()}: {e}")
        return end, None, str(e)
    logger.debug(f"Window ending {end.date()}: TCI {aggregate_indices(table).tci:.4f}")
    return end, table, None


def rolling_connectedness(returns: ReturnPanel, window: int, engine: Optional[EngineSpec] = None,
                          step: int = 1, threads: int = 1) -> RollingSeries:
    """ Run the engine on every `window` consecutive return rows, `step` rows apart.

    Windows are evaluated independently and collected in date order, so the
    result does not depend on `threads`. Degenerate windows are skipped and
    listed in `skipped`.
    """
    engine = engine or EngineSpec()
    T, K = returns.T, returns.K
    if window < 2 or window > T:
        raise WindowError(f"window must be between 2 and {T} return rows, got {window}")
    if step < 1:
        raise WindowError(f"step must be at least 1, got {step}")
    needed = engine.min_observations(K)
    if window < needed:
        raise WindowError(f"window {window} is too short for {engine.method} with {K} series; "
                          f"need at least {needed} rows")

    # anchored on the last row so runs with different windows share end dates
    starts = range(T - window, -1, -step)[::-1]
    logger.info(f"Rolling {engine.method} over {len(starts)} windows of {window} rows")
    results = parallel_map(partial(_window_job, returns, window, engine), starts, threads)

    dates = [end for end, table, _ in results if table is not None]
    tables = [table for _, table, _ in results if table is not None]
    skipped = [{"date": end.strftime("%Y-%m-%d"), "reason": reason} for end, table, reason in results
               if table is None]
    if not tables:
        raise WindowError(f"all {len(results)} windows are degenerate", date=results[-1][0])
    if skipped:
        logger.info(f"Skipped {len(skipped)} of {len(results)} windows")

    metadata = engine.describe()
    metadata.update({"window": window, "step": step, "n_windows": len(tables)})
    if engine.method == "qvar":
        metadata["non_converged"] = [
            {"date": end.strftime("%Y-%m-%d"),
             "series": [label for label, ok in table.metadata["converged"].items() if not ok]}
            for end, table in zip(dates, tables) if not all(table.metadata["converged"].values())]
        if metadata["non_converged"]:
            logger.warning(f"Quantile regressions did not converge in {len(metadata['non_converged'])} "
                           f"of {len(tables)} windows")
    return RollingSeries(pd.DatetimeIndex(dates), returns.labels, tables, metadata, skipped)


def average_dynamic_table(rolling: RollingSeries) -> ConnectednessTable:
    """ Element-wise mean of the per-window tables; aggregates follow from the averaged cells. """
    if not rolling.tables:
        raise WindowError("no windows to average")
    metadata = dict(rolling.metadata)
    metadata["averaged_windows"] = len(rolling.tables)
    if rolling.has_split:
        contemporaneous = np.mean([table.contemporaneous for table in rolling.tables], axis=0)
        lagged = np.mean([table.lagged for table in rolling.tables], axis=0)
        return ConnectednessTable.from_split(rolling.labels, contemporaneous, lagged, metadata)
    return ConnectednessTable.from_total(rolling.labels, np.mean([t.total for t in rolling.tables], axis=0), metadata)


class SubsampleSpec(BaseModel):
    """ Calendar breakpoints; each breakpoint is the first date of a new segment. """
    breakpoints: list[date] = Field(default_factory=lambda: [date(2022, 2, 24), date(2022, 7, 22)])
    labels: Optional[list[str]] = None

    @field_validator("breakpoints")
    @classmethod
    def _increasing(cls, value):
        if not value:
            raise ValueError("at least one breakpoint is required")
        if any(later <= earlier for earlier, later in zip(value, value[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        return value

    def segment_labels(self) -> list[str]:
        if self.labels is not None:
            if len(self.labels) != len(self.breakpoints) + 1:
                raise WindowError(f"{len(self.breakpoints)} breakpoints need {len(self.breakpoints) + 1} labels")
            return list(self.labels)
        if len(self.breakpoints) == len(DEFAULT_SEGMENT_LABELS) - 1:
            return list(DEFAULT_SEGMENT_LABELS)
        return [f"segment{i + 1}" for i in range(len(self.breakpoints) + 1)]

    def assign(self, dates: pd.DatetimeIndex) -> np.ndarray:
        """ Segment number of every date. """
        edges = pd.DatetimeIndex([pd.Timestamp(bp) for bp in self.breakpoints])
        return np.searchsorted(edges.values, pd.DatetimeIndex(dates).values, side="right")


def subsample_split(returns: ReturnPanel, spec: Optional[SubsampleSpec] = None) -> list:
    """ Partition the panel by date. Segment i runs from breakpoint i-1 (inclusive) to breakpoint i (exclusive). """
    spec = spec or SubsampleSpec()
    first, last = returns.dates[0], returns.dates[-1]
    for bp in spec.breakpoints:
        stamp = pd.Timestamp(bp)
        if not first < stamp <= last:
            raise WindowError(f"breakpoint {bp} is outside the sample {first.date()}..{last.date()}", date=bp)
    segment = spec.assign(returns.dates)
    labels = spec.segment_labels()
    panels = []
    for i, label in enumerate(labels):
        rows = np.flatnonzero(segment == i)
        if rows.size == 0:
            raise WindowError(f"segment {label} is empty")
        panels.append(returns.slice(int(rows[0]), int(rows[-1]) + 1))
        logger.info(f"Segment {label}: {rows.size} rows, {panels[-1].dates[0].date()}..{panels[-1].dates[-1].date()}")
    return panels


def split_rolling(rolling: RollingSeries, spec: Optional[SubsampleSpec] = None) -> list:
    """ Partition rolling output by window end date, using the same rule as `subsample_split`. """
    spec = spec or SubsampleSpec()
    segment = spec.assign(rolling.dates)
    parts = []
    for i, label in enumerate(spec.segment_labels()):
        part = rolling.select(segment == i)
        part.metadata["segment"] = label
        parts.append(part)
    return parts


@dataclass(frozen=True)
class RobustnessResult:
    series: dict
    aligned: pd.DataFrame
    correlation: pd.DataFrame
    non_converged: list = field(default_factory=list)


def robustness_battery(returns: ReturnPanel, window: int = 200, alt_window: int = 150, p: int = 1,
                       horizon: int = DEFAULT_HORIZON, tau: float = DEFAULT_TAU, step: int = 1,
                       threads: int = 1) -> RobustnessResult:
    """ TCI trajectories of alternative engines and their pairwise correlations on common dates. """
    runs = {
        "r2_pearson": (window, EngineSpec(method="r2", p=p, corr_method="pearson")),
        "r2_spearman": (window, EngineSpec(method="r2", p=p, corr_method="spearman")),
        "r2_kendall": (window, EngineSpec(method="r2", p=p, corr_method="kendall")),
        f"r2_pearson_w{alt_window}": (alt_window, EngineSpec(method="r2", p=p, corr_method="pearson")),
        "dy": (window, EngineSpec(method="dy", p=p, horizon=horizon)),
        "qvar": (window, EngineSpec(method="qvar", p=p, horizon=horizon, tau=tau)),
    }
    series = {}
    non_converged = []
    for name, (size, engine) in runs.items():
        logger.info(f"Robustness run {name}")
        rolling = rolling_connectedness(returns, size, engine, step, threads)
        series[name] = rolling.tci.rename(name)
        non_converged.extend(rolling.metadata.get("non_converged", []))
    aligned = pd.concat(series.values(), axis=1, join="inner")
    aligned.index.name = "date"
    return RobustnessResult(series=series, aligned=aligned, correlation=aligned.corr(), non_converged=non_converged)
