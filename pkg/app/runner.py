# app/runner.py

from pathlib import Path

from loguru import logger

from app.core.errors import NUMERICAL_ERRORS
from app.schemas import ScenarioConfig
from app.services.command_service import COMMANDS, EXIT_NUMERICAL, CommandResult
from app.services.report_service import emit_reports
from app.services.scenario_service import PreparedScenario


def run_command(command: str, config: ScenarioConfig, out_dir: str | Path | None = None) -> tuple[int, list[Path]]:
    """
    Runs one command on a loaded scenario and writes its reports.

    Numerical breakdowns still produce a summary (status "numerical_error")
    so failed runs stay auditable; config errors propagate to the caller.
    """
    if command not in COMMANDS:
        raise ValueError(f"unknown command {command!r}; expected one of {sorted(COMMANDS)}")

    logger.info(f"--- Running '{command}' ---")
    prep = PreparedScenario(config)
    try:
        result = COMMANDS[command](prep)
        status = "ok" if result.exit_code == 0 else "verification_failed"
    except NUMERICAL_ERRORS as e:
        logger.error(f"'{command}' stopped on a numerical error: {type(e).__name__}: {e}")
        error = {"type": type(e).__name__, "message": str(e)}
        result = CommandResult(command, {"error": error}, exit_code=EXIT_NUMERICAL)
        status = "numerical_error"

    written = emit_reports(result, config, config.output, out_dir, status)
    logger.info(f"--- '{command}' finished with exit status {result.exit_code} ---")
    return result.exit_code, written
