""" Configuration and variables.

Defaults are read from `R2C_` environment variables, the same way a deployed
service would be configured. On top of them a run can load a TOML config file
and, finally, command line flags: flags override the config file, which
overrides the environment, which overrides the built-in defaults.

The effective configuration is validated by `RunConfig` and echoed into the
run manifest, so every output directory can be reproduced.
"""
import os
from datetime import date
from pathlib import Path
from typing import Literal, Optional

import toml
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator


class ConfigError(ValueError):
    """ Invalid or inconsistent run configuration. """


def strtobool(value):
    """ Convert a string to a boolean value. """
    return value.lower() in ('yes', 'true', 't', '1')


class Namespace:
    """ Namespace class to hold arguments. """
    # Variables used in load_arguments
    verbosity: int
    engine: Optional[str]
    corr_method: Optional[str]
    lags: Optional[int]
    window: Optional[int]
    horizon: Optional[int]
    tau: Optional[float]
    threshold: Optional[float]
    threads: Optional[int]
    output_dir: Optional[str]
    seed: Optional[int]
    raw: bool

    def __init__(self, **kwargs):
        self.__dict__.update(kwargs)

    def as_defaults(self) -> dict:
        """ The environment values that were actually set, ready to feed RunConfig. """
        return {key: value for key, value in self.__dict__.items()
                if value is not None and key != 'verbosity'}


def _env_int(name):
    value = os.getenv(name)
    return int(value) if value not in (None, '') else None


def _env_float(name):
    value = os.getenv(name)
    return float(value) if value not in (None, '') else None


class ArgsCache:
    """ Cache for arguments. """
    _args = None

    @staticmethod
    def get_arguments(test_args=None):
        """ Get the arguments from the cache or load them from the environment. """
        if test_args is not None:
            return Namespace(**test_args)
        if ArgsCache._args is None:
            ArgsCache._args = ArgsCache.load_arguments()
        return ArgsCache._args

    @staticmethod
    def load_arguments():
        """ Load the arguments from the environment """
        verbosity = os.getenv('R2C_VERBOSITY', str(0))
        return Namespace(
            verbosity=int(verbosity),

            # Engine and estimation defaults.
            engine=os.getenv('R2C_ENGINE') or None,
            corr_method=os.getenv('R2C_CORR_METHOD') or None,
            lags=_env_int('R2C_LAGS'),
            window=_env_int('R2C_WINDOW'),
            horizon=_env_int('R2C_HORIZON'),
            tau=_env_float('R2C_TAU'),

            # Network edge filter, in percent units.
            threshold=_env_float('R2C_THRESHOLD'),

            threads=_env_int('R2C_THREADS'),
            output_dir=os.getenv('R2C_OUTPUT_DIR') or None,
            seed=_env_int('R2C_SEED'),
            raw=strtobool(os.getenv('R2C_RAW', 'false')),
        )


DEFAULT_BREAKPOINTS = [date(2022, 2, 24), date(2022, 7, 22)]


class RunConfig(BaseModel):
    """ Validated configuration of one command line run. """
    # Ingestion
    input: Optional[str] = None
    date_column: str = "date"
    date_format: Optional[str] = None
    series: Optional[list[str]] = None
    system: Optional[str] = None
    systems: dict[str, list[str]] = Field(default_factory=dict)
    missing_policy: Literal["drop", "ffill"] = "drop"
    max_gap: int = Field(5, ge=1)
    delimiter: str = ","

    # Engines
    engine: Literal["r2", "dy", "qvar"] = "r2"
    corr_method: Literal["pearson", "spearman", "kendall"] = "pearson"
    lags: int = Field(1, ge=1)
    p_max: int = Field(5, ge=1)
    reselect_lag: bool = False
    standardize: bool = True
    horizon: int = Field(10, ge=1)
    tau: float = Field(0.5, gt=0, lt=1)

    # Dynamics
    window: int = Field(200, ge=2)
    alt_window: int = Field(150, ge=2)
    step: int = Field(1, ge=1)
    breakpoints: list[date] = Field(default_factory=lambda: list(DEFAULT_BREAKPOINTS))
    segment_labels: Optional[list[str]] = None
    tables: bool = False

    # Networks
    threshold: float = Field(0.2, ge=0)
    split: Literal["overall", "contemporaneous", "lagged", "all"] = "all"
    graph_format: Literal["json", "dot", "graphml"] = "json"
    subsamples: bool = False
    static: bool = False

    # Statistics
    mask_level: float = Field(0.10, gt=0, lt=1)

    # Simulation
    seed: int = 0
    n_series: int = Field(4, ge=1)
    n_obs: int = Field(600, ge=3)
    coupling: list[str] = Field(default_factory=list)
    persistence: float = 0.0
    noise_scale: float = Field(0.01, gt=0)
    noise_corr: float = Field(0.0, gt=-1, lt=1)

    # Output
    output_dir: str = "output"
    raw: bool = False
    show: bool = False
    threads: int = Field(1, ge=1)

    @field_validator("breakpoints")
    @classmethod
    def _increasing_breakpoints(cls, value):
        if any(later <= earlier for earlier, later in zip(value, value[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        return value

    @model_validator(mode="after")
    def _check_segments(self):
        if self.segment_labels is not None and len(self.segment_labels) != len(self.breakpoints) + 1:
            raise ValueError(
                f"{len(self.breakpoints)} breakpoints need {len(self.breakpoints) + 1} segment labels, "
                f"got {len(self.segment_labels)}")
        if self.system is not None and self.system not in self.systems:
            raise ValueError(f"unknown system {self.system!r}; configured: {sorted(self.systems)}")
        return self

    def selected_series(self) -> Optional[list[str]]:
        """ Series requested explicitly, or through a named system. """
        if self.series:
            return self.series
        if self.system is not None:
            return self.systems[self.system]
        return None

    @classmethod
    def resolve(cls, flags: dict, config_path: Optional[str] = None, env: Optional[Namespace] = None) -> "RunConfig":
        """ Merge environment defaults, an optional TOML file and flags, in that order. """
        values = {}
        if env is not None:
            values.update(env.as_defaults())
        if config_path is not None:
            values.update(load_config_file(config_path))
        values.update({key: value for key, value in flags.items() if value is not None})
        try:
            return cls.model_validate(values)
        except ValidationError as e:
            problems = "; ".join(
                f"{'.'.join(str(part) for part in error['loc']) or 'config'}: {error['msg']}"
                for error in e.errors())
            raise ConfigError(f"invalid configuration: {problems}") from e


def load_config_file(path) -> dict:
    """ Read a TOML config file. Top level keys are RunConfig fields; `[systems]` maps names to series lists. """
    path = Path(path)
    try:
        content = toml.load(path)
    except FileNotFoundError as e:
        raise ConfigError(f"config file {path} does not exist") from e
    except toml.TomlDecodeError as e:
        raise ConfigError(f"config file {path} is not valid TOML: {e}") from e
    unknown = sorted(set(content) - set(RunConfig.model_fields))
    if unknown:
        raise ConfigError(f"config file {path} has unknown keys: {', '.join(unknown)}")
    return content
