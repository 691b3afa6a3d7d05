""" Module for running analysis tasks and recording them in a run manifest.

Every subcommand maps to one `run_*` function taking a validated RunConfig.
Outputs go to `config.output_dir` only; the manifest written next to them
echoes the configuration, the package version, skipped windows and timing.
"""
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import pandas as pd
from pydantic import BaseModel, Field

from r2connectedness import __version__, logger
from r2connectedness.args_cache import ConfigError, RunConfig
from r2connectedness.dynamics import EVENT_MARKERS, EngineSpec, RollingSeries, SubsampleSpec, \
    average_dynamic_table, robustness_battery, rolling_connectedness, split_rolling, static_connectedness, \
    subsample_split
from r2connectedness.netgraph import build_networks, export_graph
from r2connectedness.panel import IngestionSpec, ReturnPanel, compute_log_returns, load_price_panel
from r2connectedness.r2conn import ConnectednessTable, render_table, table_to_frame
from r2connectedness.simulation import SimulationSpec, simulate_prices
from r2connectedness.stats import correlation_matrix, describe, describe_frame
from r2connectedness.utils import ensure_inside, render_frame, write_frame

RUN_RECEIVED = "received"
RUN_INPROGRESS = "in-progress"
RUN_COMPLETED = "completed"
RUN_FAILED = "failed"

MANIFEST_NAME = "manifest.json"


class RunManifest(BaseModel):
    command: str
    status: str = RUN_RECEIVED
    version: str = __version__
    config: dict = Field(default_factory=dict)
    started_at: Optional[str] = None
    finished_at: Optional[str] = None
    elapsed_seconds: Optional[float] = None
    outputs: list[str] = Field(default_factory=list)
    skipped: list[dict] = Field(default_factory=list)
    non_converged_windows: int = 0
    non_converged: list[dict] = Field(default_factory=list)
    annotations: list[dict] = Field(default_factory=list)
    notes: list[str] = Field(default_factory=list)
    error: Optional[str] = None


class RunRecorder:
    """ Keeps the manifest of one run and writes outputs inside the output directory. """

    def __init__(self, command: str, config: RunConfig):
        self.config = config
        self.output_dir = Path(config.output_dir)
        self.manifest = RunManifest(command=command, config=config.model_dump(mode="json"))
        self._clock = None

    def modify_status(self, status: str, error: Optional[str] = None):
        logger.debug(f"Run {self.manifest.command}: {self.manifest.status} -> {status}")
        self.manifest.status = status
        now = datetime.now(timezone.utc).isoformat(timespec="seconds")
        if status == RUN_INPROGRESS:
            self.manifest.started_at = now
            self._clock = time.perf_counter()
        elif status in (RUN_COMPLETED, RUN_FAILED):
            self.manifest.finished_at = now
            if self._clock is not None:
                self.manifest.elapsed_seconds = round(time.perf_counter() - self._clock, 3)
            self.manifest.error = error
        self.save()

    def path(self, name: str) -> Path:
        return ensure_inside(self.output_dir, self.output_dir / name)

    def write_frame(self, frame: pd.DataFrame, name: str, index: bool = False, float_format: str = "%.10g") -> Path:
        path = write_frame(frame, self.path(name), index=index, float_format=float_format)
        self.manifest.outputs.append(name)
        return path

    def write_text(self, text: str, name: str) -> Path:
        path = self.path(name)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8", newline="\n")
        self.manifest.outputs.append(name)
        logger.debug(f"Wrote {path}")
        return path

    def record_non_converged(self, windows: list[dict]):
        """ Quantile VAR windows with at least one non-convergent equation. """
        if not windows:
            return
        self.manifest.non_converged.extend(windows)
        self.manifest.non_converged_windows = len(self.manifest.non_converged)
        self.note(f"{len(windows)} quantile VAR windows kept a non-convergent equation")

    def note(self, message: str):
        logger.info(message)
        self.manifest.notes.append(message)

    def save(self):
        path = self.path(MANIFEST_NAME)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.manifest.model_dump_json(indent=2) + "\n", encoding="utf-8", newline="\n")


def load_returns(config: RunConfig) -> ReturnPanel:
    if not config.input:
        raise ConfigError("an input price file is required (--input)")
    spec = IngestionSpec(date_column=config.date_column, date_format=config.date_format,
                         series=config.selected_series(), missing_policy=config.missing_policy,
                         max_gap=config.max_gap, delimiter=config.delimiter)
    returns = compute_log_returns(load_price_panel(config.input, spec))
    logger.info(f"Loaded {returns.T} returns of {returns.K} series {list(returns.labels)}")
    return returns


def engine_spec(config: RunConfig, method: Optional[str] = None) -> EngineSpec:
    return EngineSpec(method=method or config.engine, p=config.lags, horizon=config.horizon, tau=config.tau,
                      corr_method=config.corr_method, standardize=config.standardize,
                      reselect_lag=config.reselect_lag, p_max=config.p_max)


def subsample_spec(config: RunConfig) -> SubsampleSpec:
    return SubsampleSpec(breakpoints=config.breakpoints, labels=config.segment_labels)


def _log_defaults(config: RunConfig, recorder: RunRecorder):
    engine = engine_spec(config)
    if engine.method == "r2":
        recorder.note(f"R2 engine: {engine.corr_method} correlation, standardization "
                      f"{'within each estimation sample' if engine.standardize else 'off'}, p={engine.p}")
    else:
        recorder.note(f"{engine.method} engine: horizon H={engine.horizon}, p={engine.p}"
                      + (f", tau={engine.tau}" if engine.method == "qvar" else ""))


def _rolling(config: RunConfig, returns: ReturnPanel, recorder: RunRecorder,
             method: Optional[str] = None) -> RollingSeries:
    rolling = rolling_connectedness(returns, config.window, engine_spec(config, method), config.step,
                                    config.threads)
    recorder.manifest.skipped.extend(rolling.skipped)
    recorder.record_non_converged(rolling.metadata.get("non_converged", []))
    return rolling


def _write_table(table: ConnectednessTable, name: str, recorder: RunRecorder, title: str):
    recorder.write_frame(table_to_frame(table, recorder.config.raw), name)
    if recorder.config.show:
        print(render_table(table, recorder.config.raw, title))


def run_stats(config: RunConfig, recorder: RunRecorder):
    returns = load_returns(config)
    frame = describe_frame(describe(returns))
    recorder.write_frame(frame, "stats.csv")
    if config.show:
        print(render_frame(frame, "Descriptive statistics"))


def run_corr(config: RunConfig, recorder: RunRecorder):
    returns = load_returns(config)
    corr = correlation_matrix(returns, config.corr_method, config.mask_level)
    frame = corr.to_frame(masked=True)
    frame.index.name = ""
    recorder.write_frame(frame, f"corr_{config.corr_method}.csv", index=True, float_format="%.4f")
    recorder.note(f"Cells not significant at {config.mask_level:.0%} are blank")
    if config.show:
        print(render_frame(frame.round(2), f"{config.corr_method} correlation", index=True))


def connectedness_for(config: RunConfig, returns: ReturnPanel, recorder: RunRecorder,
                      method: Optional[str] = None) -> ConnectednessTable:
    """ Full-sample table with `static`, otherwise the averaged rolling table. """
    if config.static:
        table = static_connectedness(returns, engine_spec(config, method), config.threads)
        failed = [label for label, ok in table.metadata.get("converged", {}).items() if not ok]
        if failed:
            recorder.record_non_converged([{"date": returns.dates[-1].strftime("%Y-%m-%d"), "series": failed}])
        return table
    return average_dynamic_table(_rolling(config, returns, recorder, method))


def run_connect(config: RunConfig, recorder: RunRecorder):
    returns = load_returns(config)
    _log_defaults(config, recorder)
    table = connectedness_for(config, returns, recorder)
    _write_table(table, f"table_{config.engine}.csv", recorder, f"{config.engine} connectedness")


def run_rolling(config: RunConfig, recorder: RunRecorder):
    returns = load_returns(config)
    _log_defaults(config, recorder)
    rolling = _rolling(config, returns, recorder)
    recorder.write_frame(rolling.to_long_frame(), f"rolling_{config.engine}.csv", float_format="%.12g")
    _write_table(average_dynamic_table(rolling), f"rolling_{config.engine}_average.csv", recorder,
                 f"averaged dynamic {config.engine} connectedness")
    recorder.manifest.annotations = [{"date": day.isoformat(), "event": event}
                                     for day, event in EVENT_MARKERS.items()]


def run_split(config: RunConfig, recorder: RunRecorder):
    returns = load_returns(config)
    spec = subsample_spec(config)
    labels = spec.segment_labels()
    for label, segment in zip(labels, subsample_split(returns, spec)):
        buffer = recorder.path(f"segment_{label}.csv")
        buffer.parent.mkdir(parents=True, exist_ok=True)
        segment.to_csv(buffer, delimiter=config.delimiter)
        recorder.manifest.outputs.append(buffer.name)
    if not config.tables:
        return
    _log_defaults(config, recorder)
    for part in split_rolling(_rolling(config, returns, recorder), spec):
        label = part.metadata["segment"]
        if not len(part):
            recorder.note(f"No rolling window ends in segment {label}; table skipped")
            continue
        _write_table(average_dynamic_table(part), f"table_{config.engine}_{label}.csv", recorder,
                     f"{config.engine} connectedness, {label}")


def _write_networks(table: ConnectednessTable, prefix: str, recorder: RunRecorder):
    config = recorder.config
    networks = build_networks(table, config.threshold)
    splits = list(networks) if config.split == "all" else [config.split]
    for split in splits:
        if split not in networks:
            raise ConfigError(f"the {config.engine} engine has no {split} split")
        recorder.write_text(export_graph(networks[split], config.graph_format),
                            f"{prefix}{split}.{config.graph_format}")


def run_network(config: RunConfig, recorder: RunRecorder):
    returns = load_returns(config)
    _log_defaults(config, recorder)
    recorder.note(f"Edges kept where NPDC > {config.threshold} (percent units, strict)")
    spec = subsample_spec(config)
    if config.static:
        _write_networks(static_connectedness(returns, engine_spec(config), config.threads), "network_", recorder)
        if not config.subsamples:
            return
        for label, segment in zip(spec.segment_labels(), subsample_split(returns, spec)):
            table = static_connectedness(segment, engine_spec(config), config.threads)
            _write_networks(table, f"network_{label}_", recorder)
        return
    rolling = _rolling(config, returns, recorder)
    _write_networks(average_dynamic_table(rolling), "network_", recorder)
    if not config.subsamples:
        return
    for part in split_rolling(rolling, spec):
        label = part.metadata["segment"]
        if not len(part):
            recorder.note(f"No rolling window ends in segment {label}; network skipped")
            continue
        _write_networks(average_dynamic_table(part), f"network_{label}_", recorder)


def run_simulate(config: RunConfig, recorder: RunRecorder):
    spec = SimulationSpec(n_series=config.n_series, n_obs=config.n_obs, coupling=config.coupling,
                          persistence=config.persistence, noise_scale=config.noise_scale,
                          noise_corr=config.noise_corr, seed=config.seed, labels=config.series)
    prices = simulate_prices(spec)
    path = recorder.path("simulated.csv")
    path.parent.mkdir(parents=True, exist_ok=True)
    prices.to_csv(path, delimiter=config.delimiter)
    recorder.manifest.outputs.append(path.name)


def run_robustness(config: RunConfig, recorder: RunRecorder):
    returns = load_returns(config)
    result = robustness_battery(returns, config.window, config.alt_window, config.lags, config.horizon,
                                config.tau, config.step, config.threads)
    recorder.record_non_converged(result.non_converged)
    recorder.write_frame(result.aligned, "robustness_tci.csv", index=True, float_format="%.12g")
    correlation = result.correlation.copy()
    correlation.index.name = ""
    recorder.write_frame(correlation, "robustness_corr.csv", index=True, float_format="%.6f")
    if config.show:
        print(render_frame(correlation.round(3), "TCI correlation across engines", index=True))


COMMANDS = {
    "stats": run_stats,
    "corr": run_corr,
    "connect": run_connect,
    "rolling": run_rolling,
    "split": run_split,
    "network": run_network,
    "simulate": run_simulate,
    "robustness": run_robustness,
}


def run_task(command: str, config: RunConfig) -> RunManifest:
    """ Run one command, keeping the manifest status current. Exceptions propagate after being recorded. """
    recorder = RunRecorder(command, config)
    recorder.modify_status(RUN_INPROGRESS)
    try:
        COMMANDS[command](config, recorder)
    except Exception as e:
        recorder.modify_status(RUN_FAILED, error=str(e))
        raise
    recorder.modify_status(RUN_COMPLETED)
    logger.info(f"Run {command} completed: {len(recorder.manifest.outputs)} outputs in {recorder.output_dir}")
    return recorder.manifest


def read_manifest(output_dir) -> RunManifest:
    path = Path(output_dir) / MANIFEST_NAME
    return RunManifest.model_validate_json(path.read_text(encoding="utf-8"))
