import logging

import click

from aegisnet import log
from aegisnet.vectors import vector_lines

LOGGER = logging.getLogger(__name__)


@click.command(help="Write hex test vectors for the crypto primitives")
@click.option("--output", default="-", help="Vector file path, '-' for stdout")
@click.option("--debug", is_flag=True, default=False, help="Debug logging")
def cli_entrypoint(output: str, debug: bool):
    main(output=output, debug=debug)


def main(output: str = "-", debug: bool = False) -> int:
    log.init(debug=debug)
    lines = vector_lines()
    text = "\n".join(lines) + "\n"
    if output == "-":
        click.echo(text, nl=False)
    else:
        with open(output, "w") as handle:
            handle.write(text)
        LOGGER.info("Wrote %d vectors to %s", len(lines), output)
    return len(lines)
