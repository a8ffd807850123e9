# app/cli.py

import sys

import click
from loguru import logger

from app import __version__
from app.core.errors import CONFIG_ERRORS, ReportIOError
from app.core.log import configure_logging
from app.runner import run_command
from app.services.command_service import EXIT_CONFIG, EXIT_IO
from app.services.scenario_service import load_config


def _run(command: str, config_path: str, out: str | None, quiet: bool):
    configure_logging(quiet)
    try:
        config = load_config(config_path)
        code, _ = run_command(command, config, out)
    except CONFIG_ERRORS as e:
        logger.error(str(e))
        sys.exit(EXIT_CONFIG)
    except ReportIOError as e:
        logger.error(str(e))
        sys.exit(EXIT_IO)
    sys.exit(code)


def _command(name: str, help_text: str):
    @click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False), help="Scenario JSON file.")
    @click.option("--out", default=None, type=click.Path(file_okay=False), help="Report directory (overrides output.directory).")
    @click.option("--quiet", is_flag=True, help="Only log warnings and errors.")
    def run(config_path: str, out: str | None, quiet: bool):
        _run(name, config_path, out, quiet)

    run.__doc__ = help_text
    return cli.command(name=name)(run)


@click.group()
@click.version_option(__version__, prog_name="patchy-ide")
def cli():
    """Extinction and persistence of a population on a patchy landscape."""


_command("eigen", "Principal eigenpair of the linearized operator and its bound checks.")
_command("simulate", "Stationary state, regime and generation norms.")
_command("threshold", "Critical r0 and a one-parameter phase table.")
_command("verify", "Check every hypothesis and conclusion; exit 4 on any violation.")


def main():
    cli()


if __name__ == "__main__":
    main()
