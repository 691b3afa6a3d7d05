from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd
from prettytable import PrettyTable

from r2connectedness import logger


def render_frame(frame: pd.DataFrame, title: Optional[str] = None, index: bool = False) -> str:
    """ Render a DataFrame as a console table.

    NaN cells are shown blank, the same way masked correlations are blank in CSV.
    """
    if index:
        frame = frame.reset_index()
    pretty = PrettyTable()
    pretty.field_names = [str(column) for column in frame.columns]
    pretty.align = "r"
    for row in frame.itertuples(index=False):
        pretty.add_row(["" if isinstance(value, float) and np.isnan(value) else value for value in row])
    if title:
        pretty.title = title
    return pretty.get_string()


def write_frame(frame: pd.DataFrame, path, index: bool = False, float_format: str = "%.10g") -> Path:
    """ Write a CSV deterministically: UTF-8, LF line endings, fixed float format. """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=index, float_format=float_format, lineterminator="\n", encoding="utf-8",
                 date_format="%Y-%m-%d", na_rep="")
    logger.debug(f"Wrote {len(frame)} rows to {path}")
    return path


def ensure_inside(base, path) -> Path:
    """ Resolve `path` and refuse anything that escapes `base`. """
    base = Path(base).resolve()
    resolved = Path(path).resolve()
    if resolved != base and base not in resolved.parents:
        raise ValueError(f"output path {path} escapes output directory {base}")
    return resolved
