"""Result and configuration file helpers.

Reports are CSV (RFC 4180 quoting via the csv module) or JSON lines, both opened by
a versioned schema header. Config files are flat key=value files read with
python-dotenv.
"""

import csv
import json
import math
import re
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping, Sequence, TextIO

import pydantic
from dotenv import dotenv_values

from percolab.config import settings
from percolab.exceptions import ConfigError
from percolab.schemas.experiment import ExperimentConfig
from percolab.utils.logger import get_logger

logger = get_logger(__name__)

_ASSIGNMENT = re.compile(r"^\s*(export\s+)?([A-Za-z_][A-Za-z0-9_]*)\s*=")


def _json_value(value: Any) -> Any:
    """Non-finite floats have no JSON form; they are written as null."""
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def schema_tag(report: str) -> str:
    return f"{report}/v{settings.OUTPUT_SCHEMA_VERSION}"


@contextmanager
def open_output(path: str | Path | None) -> Iterator[TextIO]:
    """Open a result stream; None or "-" means stdout."""
    if path is None or str(path) == "-":
        yield sys.stdout
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as stream:
        yield stream


def write_csv(
    path: str | Path | None,
    report: str,
    columns: Sequence[str],
    rows: Iterable[Sequence[Any]],
    config: ExperimentConfig | None = None,
) -> None:
    """Write a CSV report headed by its schema tag and, optionally, the run config.

    Args:
        path: Output file, or None for stdout
        report: Report type, e.g. "gap"
        columns: Column names fixed for the report type
        rows: Row values in column order
        config: Resolved config echoed as comment lines
    """
    with open_output(path) as stream:
        stream.write(f"# percolab-schema: {schema_tag(report)}\n")
        if config is not None:
            for key, value in config.as_flat().items():
                stream.write(f"# {key}={value}\n")
        writer = csv.writer(stream)
        writer.writerow(columns)
        count = 0
        for row in rows:
            writer.writerow(row)
            count += 1
    logger.info("Report written", report=report, path=str(path or "-"), rows=count)


def write_jsonl(
    path: str | Path | None,
    report: str,
    columns: Sequence[str],
    rows: Iterable[Sequence[Any]],
    config: ExperimentConfig | None = None,
) -> None:
    """Write a JSON-lines report; the first record carries schema and config."""
    with open_output(path) as stream:
        header: dict[str, Any] = {"schema": schema_tag(report)}
        if config is not None:
            header["config"] = config.as_flat()
        stream.write(json.dumps(header) + "\n")
        count = 0
        for row in rows:
            record = {key: _json_value(value) for key, value in zip(columns, row)}
            stream.write(json.dumps(record, default=str, allow_nan=False) + "\n")
            count += 1
    logger.info("Report written", report=report, path=str(path or "-"), rows=count)


def write_report(
    config: ExperimentConfig,
    report: str,
    columns: Sequence[str],
    rows: Iterable[Sequence[Any]],
) -> None:
    """Write rows in the configured format and a config sidecar next to file outputs."""
    writer = write_jsonl if config.format.value == "jsonl" else write_csv
    writer(config.output, report, columns, rows, config)
    if config.output not in (None, "-"):
        write_config(config, f"{config.output}.config")


def write_config(config: ExperimentConfig, path: str | Path) -> None:
    """Write a config file that load_config reads back to an identical model."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as stream:
        for key, value in config.as_flat().items():
            stream.write(f"{key}={value}\n")


def read_config_values(path: str | Path) -> dict[str, str]:
    """Parse a flat key=value file, reporting the first malformed line.

    Raises:
        ConfigError: If the file is missing or a line is not an assignment
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError("Config file not found", path=str(path))
    with open(path, "r", encoding="utf-8") as file:
        for number, line in enumerate(file, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if not _ASSIGNMENT.match(line):
                raise ConfigError(
                    f"Cannot parse line {number}: {stripped!r}",
                    path=str(path),
                    line=number,
                )
    values = dotenv_values(path)
    return {key: value for key, value in values.items() if value is not None}


def _key_line(path: str | Path | None, key: str) -> int | None:
    if path is None:
        return None
    with open(path, "r", encoding="utf-8") as file:
        for number, line in enumerate(file, start=1):
            match = _ASSIGNMENT.match(line)
            if match and match.group(2) == key:
                return number
    return None


def resolve_config(
    file_values: Mapping[str, Any],
    flag_values: Mapping[str, Any],
    path: str | Path | None = None,
) -> ExperimentConfig:
    """Merge defaults < file < flags into a validated ExperimentConfig.

    Raises:
        ConfigError: With the offending field (and file line when it came from a file)
    """
    merged = {**file_values, **flag_values}
    try:
        config = ExperimentConfig.model_validate(merged)
    except pydantic.ValidationError as exc:
        error = exc.errors()[0]
        field = str(error["loc"][0]) if error["loc"] else None
        line = _key_line(path, field) if field in file_values else None
        raise ConfigError(
            f"Invalid value for {field}: {error['msg']}",
            path=str(path) if path else None,
            line=line,
            field=field,
        ) from exc
    missing = config.missing_fields()
    if missing:
        raise ConfigError(
            f"Missing required parameter for {config.subcommand.value}: {missing[0]}",
            field=missing[0],
        )
    return config


def load_config(
    path: str | Path, overrides: Mapping[str, Any] | None = None
) -> ExperimentConfig:
    """Load a config file; `overrides` (command-line flags) win over file values."""
    return resolve_config(read_config_values(path), overrides or {}, path)
