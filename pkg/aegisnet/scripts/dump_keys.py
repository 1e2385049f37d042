import logging
from typing import Optional

import click
import yaml

from aegisnet import log
from aegisnet.config import load_config, resolve_seed
from aegisnet.simulator import Simulation

LOGGER = logging.getLogger(__name__)


@click.command(help="Show a node's link key states, optionally after some rounds")
@click.option("--config", "config_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--node", type=int, required=True, help="Node id, 0 is the base station")
@click.option("--rounds", type=int, default=0, help="Rounds to simulate first")
@click.option("--seed", type=int, default=None)
@click.option("--reveal", is_flag=True, default=False, help="Print key material in hex")
@click.option("--debug", is_flag=True, default=False, help="Debug logging")
def cli_entrypoint(
    config_file: str, node: int, rounds: int, seed: Optional[int], reveal: bool, debug: bool
):
    click.echo(
        main(config_file=config_file, node=node, rounds=rounds, seed=seed, reveal=reveal, debug=debug),
        nl=False,
    )


def main(
    config_file: str,
    node: int,
    rounds: int = 0,
    seed: Optional[int] = None,
    reveal: bool = False,
    debug: bool = False,
) -> str:
    log.init(debug=debug)
    if rounds < 0:
        raise click.BadParameter("must be >= 0", param_hint="--rounds")
    config = load_config(config_file)
    if rounds:
        config = config.copy(update={"run": config.run.copy(update={"rounds": rounds})})
    simulation = Simulation(config, resolve_seed(seed, config))
    if node not in simulation.nodes:
        raise click.BadParameter(
            f"no node {node} in a {len(simulation.nodes)}-node scenario", param_hint="--node"
        )
    if rounds:
        simulation.run()
    else:
        simulation.rebuild_topology()
    state = simulation.nodes[node]
    agent = simulation.agents.get(node)
    if not reveal:
        LOGGER.debug("Key material redacted, pass --reveal to print it")
    return yaml.safe_dump(
        {
            "node": node,
            "role": state.role.value,
            "alive": state.alive,
            "cluster": state.cluster,
            "rounds": len(simulation.records),
            "links": agent.ring.describe(reveal=reveal) if agent else [],
        },
        default_flow_style=False,
        sort_keys=False,
    )
