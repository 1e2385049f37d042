"""Global cli combining all of the commands into one larger piece

Exit codes: 0 success, 1 usage or config error, 2 runtime error.
"""
import logging
import sys
from typing import List, Optional

import click

from aegisnet.exceptions import AegisnetError, ConfigInvalid

from .dump_keys import cli_entrypoint as dump_keys_command
from .emit_vectors import cli_entrypoint as emit_vectors_command
from .run_scenario import cli_entrypoint as run_scenario_command

LOGGER = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

main_cli = click.Group(help="Secure clustered-aggregation simulator")
main_cli.add_command(run_scenario_command, "run")
main_cli.add_command(emit_vectors_command, "vectors")
main_cli.add_command(dump_keys_command, "keys")


def main(args: Optional[List[str]] = None) -> None:
    try:
        main_cli.main(args=args, prog_name="aegisnet", standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("Aborted!", err=True)
        sys.exit(EXIT_USAGE)
    except click.ClickException as err:
        err.show()
        sys.exit(EXIT_USAGE)
    except ConfigInvalid as err:
        LOGGER.error("Invalid configuration: %s", err.message)
        click.echo(f"Error: {err.message}", err=True)
        sys.exit(EXIT_USAGE)
    except (AegisnetError, OSError) as err:
        LOGGER.error("Run failed: %s", err)
        click.echo(f"Error: {err}", err=True)
        sys.exit(EXIT_RUNTIME)
    except Exception as err:
        LOGGER.exception("Unexpected failure")
        click.echo(f"Error: {type(err).__name__}: {err}", err=True)
        sys.exit(EXIT_RUNTIME)
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()
