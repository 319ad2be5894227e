"""
Run configuration.

Values are resolved with this precedence, highest first: command-line flags,
the MLCMETA_OUTPUT_DIR environment variable (also read from a .env file),
a TOML config file whose keys mirror the flag names, built-in defaults.
"""

import logging
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union

from dotenv import load_dotenv

from .exceptions import ContractError, ParseError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

logger = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "MLCMETA_OUTPUT_DIR"
FORMATS = ("csv", "json")


@dataclass
class RunConfig:
    """Parameters of one command-line run."""

    command: str = ""
    inputs: Dict[str, str] = field(default_factory=dict)
    f_grid: List[float] = field(default_factory=lambda: [0.001, 0.01, 0.05, 0.1, 0.125])
    f_level: float = 0.05
    min_leaf: int = 2
    max_depth: Optional[int] = None
    dependence_alpha: float = 0.01
    small_set_threshold: int = 2
    k_top: int = 3
    measures: List[str] = field(default_factory=lambda: ["hamming_loss"])
    seed: int = 0
    output_dir: str = "outputs"
    formats: List[str] = field(default_factory=lambda: list(FORMATS))
    registry: Optional[str] = None
    catalogue: Optional[str] = None
    extended_features: bool = False
    allow_missing: bool = False

    @property
    def measure(self) -> str:
        """First configured measure."""
        return self.measures[0]

    def validate(self) -> "RunConfig":
        """Check parameter ranges and that every referenced path exists."""
        if not self.f_grid or any(not 0.0 < f < 1.0 for f in self.f_grid):
            raise ContractError(f"f_grid values must lie in (0, 1), got {self.f_grid}")
        if not 0.0 < self.f_level < 1.0:
            raise ContractError(f"f_level must lie in (0, 1), got {self.f_level}")
        if self.min_leaf < 1:
            raise ContractError(f"min_leaf must be at least 1, got {self.min_leaf}")
        if not 0.0 < self.dependence_alpha < 1.0:
            raise ContractError(f"dependence_alpha must lie in (0, 1), got {self.dependence_alpha}")
        if self.k_top < 1:
            raise ContractError(f"k_top must be at least 1, got {self.k_top}")
        if not self.measures:
            raise ContractError("at least one measure is required")
        unknown = sorted(set(self.formats) - set(FORMATS))
        if unknown or not self.formats:
            raise ContractError(f"output formats must be a non-empty subset of {FORMATS}")
        paths = dict(self.inputs)
        if self.registry:
            paths["registry"] = self.registry
        if self.catalogue:
            paths["catalogue"] = self.catalogue
        for role, path in sorted(paths.items()):
            if path and not Path(path).exists():
                raise ContractError(f"{role} path does not exist: {path}")
        return self

    def provenance(self) -> Dict[str, Any]:
        """Configuration recorded in every artifact (no output directory, no timestamps)."""
        record = asdict(self)
        record.pop("output_dir")
        return record


def _normalize_keys(values: Mapping[str, Any]) -> Dict[str, Any]:
    return {str(k).replace("-", "_"): v for k, v in values.items()}


def read_config_file(filepath: Union[str, Path]) -> Dict[str, Any]:
    """Read a TOML config file; keys may use flag spelling (dashes)."""
    path = Path(filepath)
    if not path.exists():
        raise ContractError(f"config file does not exist: {path}")
    try:
        with open(path, "rb") as handle:
            values = tomllib.load(handle)
    except tomllib.TOMLDecodeError as e:
        raise ParseError(str(e), source=path.name)
    known = {f.name for f in fields(RunConfig)} - {"command", "inputs"} | {"measure"}
    values = _normalize_keys(values)
    unknown = sorted(set(values) - known)
    if unknown:
        raise ParseError(f"unknown config keys: {unknown}", source=path.name)
    return values


def load_run_config(
    command: str,
    overrides: Mapping[str, Any],
    inputs: Optional[Mapping[str, str]] = None,
    config_file: Optional[Union[str, Path]] = None,
) -> RunConfig:
    """
    Resolve the run configuration.

    Parameters
    ----------
    command : str
        Subcommand name
    overrides : Mapping[str, Any]
        Values given on the command line; None means "not given"
    inputs : Mapping[str, str], optional
        Input paths by role
    config_file : str or Path, optional
        TOML file with defaults for this run

    Returns
    -------
    RunConfig
        Validated configuration
    """
    load_dotenv()
    values: Dict[str, Any] = {}
    if config_file:
        values.update(read_config_file(config_file))
        logger.debug(f"Loaded config file {config_file}")
    if os.environ.get(OUTPUT_DIR_ENV):
        values["output_dir"] = os.environ[OUTPUT_DIR_ENV]
    values.update({k: v for k, v in _normalize_keys(overrides).items() if v is not None})
    if "measure" in values:
        measure = values.pop("measure")
        values["measures"] = [measure] if isinstance(measure, str) else list(measure)

    config = RunConfig(command=command, inputs=dict(inputs or {}))
    for name, value in values.items():
        setattr(config, name, value)
    config.f_grid = [float(f) for f in config.f_grid]
    return config.validate()
