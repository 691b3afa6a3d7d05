"""
r2connectedness package

This package measures how shocks travel between markets from a panel of daily
prices. Every series is regressed on the same-day returns of the others and on
lagged returns of all series; the R² of each regression is decomposed into
per-series contributions, which gives a spillover table split into a
contemporaneous and a lagged part.

Features:
- Price ingestion, log returns, descriptive statistics and correlation heatmap data
- R² decomposition connectedness (TCI, TO, FROM, NET, NPDC) with contemporaneous/lagged split
- Diebold-Yilmaz (GFEVD) and quantile-VAR benchmark connectedness
- Rolling-window dynamics, subsample splits and robustness battery
- Threshold-filtered net pairwise spillover networks (JSON, DOT, GraphML)

Dependencies:
- numpy, pandas, scipy
- statsmodels
- networkx
- pydantic
"""
import logging
from r2connectedness.args_cache import ArgsCache

__version__ = "0.1.0"

verbosity_mapping = {
    0: logging.WARNING,  # Default to WARNING if -v is not provided
    1: logging.INFO,
    2: logging.DEBUG
}
args_cache = ArgsCache.get_arguments()

logger = logging.getLogger(__name__)
