# app/services/report_service.py

import json
from pathlib import Path

from loguru import logger

from app import __version__
from app.core.errors import ReportIOError
from app.schemas import OutputConfig, ScenarioConfig
from app.services.command_service import CommandResult
from app.services.scenario_service import config_echo, config_hash

TOOL_NAME = "patchy-ide"


def build_summary(result: CommandResult, config: ScenarioConfig, status: str = "ok") -> dict:
    return {
        "tool": {"name": TOOL_NAME, "version": __version__},
        "command": result.command,
        "status": status,
        "exit_code": result.exit_code,
        "config_hash": config_hash(config),
        "config": config_echo(config),
        "results": result.results,
    }


def _write(path: Path, text: str):
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    except OSError as e:
        raise ReportIOError(f"cannot write report: {e.strerror}", str(path)) from e


def emit_reports(
    result: CommandResult,
    config: ScenarioConfig,
    output: OutputConfig,
    out_dir: str | Path | None = None,
    status: str = "ok",
) -> list[Path]:
    """
    Writes the JSON summary and the CSV tables of one command.
    Same inputs give byte-identical files: no timestamps, sorted keys,
    full-precision floats, LF line endings.
    """
    directory = Path(out_dir) if out_dir is not None else Path(output.directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ReportIOError(f"cannot create output directory: {e.strerror}", str(directory)) from e

    written = []
    if "json" in output.formats:
        path = directory / f"{result.command}_summary.json"
        summary = build_summary(result, config, status)
        _write(path, json.dumps(summary, indent=2, sort_keys=True, allow_nan=False) + "\n")
        written.append(path)

    if "csv" in output.formats:
        for name, frame in result.tables.items():
            path = directory / f"{name}.csv"
            _write(path, frame.to_csv(index=False, lineterminator="\n", float_format="%.17g"))
            written.append(path)

    for path in written:
        logger.info(f"Wrote {path}")
    return written
