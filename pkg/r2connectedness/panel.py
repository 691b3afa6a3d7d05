""" Price ingestion and the log-return panel every estimator consumes. """
from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from r2connectedness import logger


class PanelError(ValueError):
    """ Input prices cannot be turned into an aligned panel. """


class IngestionSpec(BaseModel):
    """ How to read a price table. """
    date_column: str = "date"
    date_format: Optional[str] = None
    series: Optional[list[str]] = None
    missing_policy: Literal["drop", "ffill"] = "drop"
    max_gap: int = Field(5, ge=1)
    delimiter: str = ","


def _frozen(values) -> np.ndarray:
    array = np.array(values, dtype=float)
    array.setflags(write=False)
    return array


def _check_axes(dates: pd.DatetimeIndex, labels: tuple, values: np.ndarray):
    if values.ndim != 2:
        raise PanelError(f"expected a 2-dimensional panel, got {values.ndim} dimensions")
    if values.shape != (len(dates), len(labels)):
        raise PanelError(f"panel shape {values.shape} does not match {len(dates)} dates x {len(labels)} labels")
    if len(set(labels)) != len(labels):
        raise PanelError(f"duplicate series labels in {list(labels)}")
    if not dates.is_monotonic_increasing or dates.has_duplicates:
        raise PanelError("dates must be strictly increasing")


@dataclass(frozen=True)
class PricePanel:
    """ Aligned T x K table of strictly positive prices. """
    dates: pd.DatetimeIndex
    labels: tuple
    prices: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dates", pd.DatetimeIndex(self.dates))
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "prices", _frozen(self.prices))
        _check_axes(self.dates, self.labels, self.prices)
        if not np.all(np.isfinite(self.prices)):
            raise PanelError("prices contain missing or non-finite entries")
        if np.any(self.prices <= 0):
            raise PanelError("prices must be strictly positive")

    @property
    def T(self) -> int:
        return self.prices.shape[0]

    @property
    def K(self) -> int:
        return self.prices.shape[1]

    def select(self, labels: Sequence[str]) -> "PricePanel":
        return PricePanel(self.dates, tuple(labels), self.prices[:, _positions(self.labels, labels)])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(np.asarray(self.prices), index=self.dates.rename("date"), columns=list(self.labels))

    def to_csv(self, path_or_buf, delimiter=","):
        """ Write in the same format `load_price_panel` reads. """
        self.to_frame().to_csv(path_or_buf, sep=delimiter, date_format="%Y-%m-%d",
                               float_format="%.10g", lineterminator="\n")


@dataclass(frozen=True)
class ReturnPanel:
    """ (T-1) x K log returns with the dates of the later price of each pair. """
    dates: pd.DatetimeIndex
    labels: tuple
    returns: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dates", pd.DatetimeIndex(self.dates))
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "returns", _frozen(self.returns))
        _check_axes(self.dates, self.labels, self.returns)
        if not np.all(np.isfinite(self.returns)):
            raise PanelError("returns contain non-finite entries")

    @classmethod
    def from_array(cls, values, labels=None, start="2020-12-01") -> "ReturnPanel":
        """ Wrap a plain array, stamping it with a business-day calendar. """
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if labels is None:
            labels = [f"S{i + 1}" for i in range(values.shape[1])]
        return cls(pd.bdate_range(start=start, periods=values.shape[0]), tuple(labels), values)

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> "ReturnPanel":
        return cls(pd.DatetimeIndex(frame.index), tuple(str(c) for c in frame.columns), frame.to_numpy(dtype=float))

    @classmethod
    def concat(cls, panels: Sequence["ReturnPanel"]) -> "ReturnPanel":
        if not panels:
            raise PanelError("nothing to concatenate")
        labels = panels[0].labels
        if any(panel.labels != labels for panel in panels):
            raise PanelError("panels with different series cannot be concatenated")
        dates = panels[0].dates.append([panel.dates for panel in panels[1:]])
        return cls(dates, labels, np.vstack([panel.returns for panel in panels]))

    @property
    def T(self) -> int:
        return self.returns.shape[0]

    @property
    def K(self) -> int:
        return self.returns.shape[1]

    def slice(self, start: int, stop: int) -> "ReturnPanel":
        return ReturnPanel(self.dates[start:stop], self.labels, self.returns[start:stop])

    def select(self, labels: Sequence[str]) -> "ReturnPanel":
        return ReturnPanel(self.dates, tuple(labels), self.returns[:, _positions(self.labels, labels)])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(np.asarray(self.returns), index=self.dates.rename("date"), columns=list(self.labels))

    def to_csv(self, path_or_buf, delimiter=","):
        self.to_frame().to_csv(path_or_buf, sep=delimiter, date_format="%Y-%m-%d",
                               float_format="%.17g", lineterminator="\n")


def _positions(available: tuple, wanted: Sequence[str]) -> list:
    unknown = [label for label in wanted if label not in available]
    if unknown:
        raise PanelError(f"unknown series {unknown}; available: {list(available)}")
    if len(set(wanted)) != len(wanted):
        raise PanelError(f"series selected more than once in {list(wanted)}")
    return [available.index(label) for label in wanted]


def select_series(panel, labels: Sequence[str]):
    """ Column subset of a PricePanel or ReturnPanel, in the requested order. """
    return panel.select(labels)


def _parse_dates(raw: pd.Series, date_format: Optional[str]) -> pd.DatetimeIndex:
    if raw.isna().any():
        row = int(np.flatnonzero(raw.isna().to_numpy())[0])
        raise PanelError(f"unparseable date: empty date in data row {row + 1}")
    if raw.str.contains(":").any():
        bad = raw[raw.str.contains(":")].iloc[0]
        raise PanelError(f"intraday timestamps are not supported: {bad!r}")
    try:
        dates = pd.to_datetime(raw, format=date_format, errors="raise")
    except (ValueError, TypeError) as e:
        raise PanelError(f"unparseable date: {e}") from e
    dates = pd.DatetimeIndex(dates)
    if (dates != dates.normalize()).any():
        raise PanelError("intraday timestamps are not supported")
    return dates


def _longest_gap(column: pd.Series) -> int:
    """ Longest run of missing values after the first observation of a series. """
    valid = column.notna().to_numpy()
    if not valid.any():
        return len(valid)
    run = longest = 0
    for present in valid[valid.argmax():]:
        run = 0 if present else run + 1
        longest = max(longest, run)
    return longest


def load_price_panel(source, spec: Optional[IngestionSpec] = None) -> PricePanel:
    """ Read a CSV price table and align the selected series on common dates.

    `source` is a path or a text stream. Rows may come in any order; the
    result is sorted by date. Missing prices are either dropped row-wise
    (intersection of trading calendars) or forward filled up to
    `spec.max_gap` rows.
    """
    spec = spec or IngestionSpec()
    try:
        frame = pd.read_csv(source, sep=spec.delimiter, dtype=str, encoding="utf-8", skipinitialspace=True)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise PanelError(f"cannot read price table: {e}") from e
    frame.columns = [str(column).strip() for column in frame.columns]

    if spec.date_column not in frame.columns:
        raise PanelError(f"date column {spec.date_column!r} not found in {list(frame.columns)}")
    labels = list(spec.series) if spec.series else [c for c in frame.columns if c != spec.date_column]
    if not labels:
        raise PanelError("no price columns selected")
    missing = [label for label in labels if label not in frame.columns]
    if missing:
        raise PanelError(f"price columns {missing} not found in {list(frame.columns)}")
    if len(set(labels)) != len(labels):
        raise PanelError(f"series selected more than once in {labels}")

    dates = _parse_dates(frame[spec.date_column].str.strip(), spec.date_format)
    if dates.has_duplicates:
        raise PanelError(f"duplicate date {dates[dates.duplicated()][0].date()}")

    text = frame[labels].apply(lambda column: column.str.strip())
    prices = text.apply(pd.to_numeric, errors="coerce")
    bad = (prices.isna() & text.notna()) | np.isinf(prices)
    if bad.to_numpy().any():
        row, col = np.argwhere(bad.to_numpy())[0]
        raise PanelError(f"non-numeric price {text.iat[row, col]!r} for {labels[col]} on {dates[row].date()}")
    if (prices <= 0).to_numpy().any():
        row, col = np.argwhere((prices <= 0).to_numpy())[0]
        raise PanelError(f"non-positive price {prices.iat[row, col]} for {labels[col]} on {dates[row].date()}")

    prices.index = dates
    prices = prices.sort_index(kind="mergesort")

    if spec.missing_policy == "ffill":
        for label in labels:
            gap = _longest_gap(prices[label])
            if gap > spec.max_gap:
                raise PanelError(f"forward-fill gap of {gap} rows in {label} exceeds max_gap={spec.max_gap}")
        prices = prices.ffill()
    aligned = prices.dropna(how="any")
    dropped = len(prices) - len(aligned)
    if dropped:
        logger.info(f"Dropped {dropped} of {len(prices)} rows with missing prices ({spec.missing_policy})")
    if aligned.empty:
        raise PanelError("empty intersection of dates across the selected series")

    return PricePanel(pd.DatetimeIndex(aligned.index), tuple(labels), aligned.to_numpy(dtype=float))


def compute_log_returns(panel: PricePanel) -> ReturnPanel:
    """ r[t, k] = ln p[t+1, k] - ln p[t, k]; the first date is dropped. """
    if panel.T < 2:
        raise PanelError(f"need at least 2 price rows for returns, got {panel.T}")
    returns = np.diff(np.log(panel.prices), axis=0)
    return ReturnPanel(panel.dates[1:], panel.labels, returns)
