import csv
import logging
import os
from concurrent.futures import ProcessPoolExecutor, as_completed
from typing import Dict, Iterable, List, Optional, Tuple

import click
from toolz.itertoolz import groupby
from tqdm import tqdm

from aegisnet import log
from aegisnet.config import ScenarioConfig, load_config, resolve_seed
from aegisnet.simulator import METRICS_HEADER, MetricsRecord, Simulation, flexibility_sweep, run

LOGGER = logging.getLogger(__name__)

AGGREGATE_HEADER = ["round", "runs"] + METRICS_HEADER[1:]


class SeedOutputs(object):
    """What one simulation instance hands back to the parent process"""

    def __init__(self, seed: int, simulation: Simulation) -> None:
        self.seed = seed
        self.rows = simulation.metrics_rows()
        self.records = simulation.records
        self.trace = simulation.trace_lines()
        self.auth_log = simulation.auth_log_lines()
        self.topology = simulation.initial_topology


def parse_seeds(value: Optional[str]) -> Optional[List[int]]:
    """'1..10' (inclusive) or '1,4,9'"""
    if not value:
        return None
    try:
        if ".." in value:
            low, high = value.split("..", 1)
            seeds = list(range(int(low), int(high) + 1))
        else:
            seeds = [int(part) for part in value.split(",") if part.strip()]
    except ValueError:
        raise click.BadParameter(f"expected A..B or a comma list, got {value!r}", param_hint="--seeds")
    if not seeds:
        raise click.BadParameter(f"{value!r} selects no seeds", param_hint="--seeds")
    return seeds


def parse_intensities(value: str) -> List[float]:
    try:
        return [float(part) for part in value.split(",") if part.strip()]
    except ValueError:
        raise click.BadParameter(
            f"expected comma separated numbers, got {value!r}", param_hint="--flexibility"
        )


def suffixed(path: str, suffix: str) -> str:
    stem, extension = os.path.splitext(path)
    return f"{stem}_{suffix}{extension or '.csv'}"


def write_rows(path: str, rows: Iterable[List[str]]) -> None:
    with open(path, "w", newline="") as handle:
        csv.writer(handle, lineterminator="\n").writerows(rows)


def write_lines(path: str, lines: List[str]) -> None:
    with open(path, "w") as handle:
        handle.write("\n".join(lines) + "\n")


def _run_seed(config_json: str, seed: int) -> SeedOutputs:
    config = ScenarioConfig.parse_raw(config_json)
    _, simulation = run(config, seed)
    return SeedOutputs(seed, simulation)


def _mean(values: List[Optional[float]]) -> Optional[float]:
    defined = [value for value in values if value is not None]
    return sum(defined) / len(defined) if defined else None


def aggregate_rows(runs: List[SeedOutputs]) -> List[List[str]]:
    """Per-round means across seeds; undefined pdr/delay values are skipped"""
    by_round: Dict[int, List[MetricsRecord]] = groupby(
        lambda record: record.round, [record for outputs in runs for record in outputs.records]
    )
    rows = [AGGREGATE_HEADER]
    for round_index in sorted(by_round):
        records = by_round[round_index]
        means = [
            _mean([record.alive for record in records]),
            _mean([record.total_energy for record in records]),
            _mean([record.sent for record in records]),
            _mean([record.delivered for record in records]),
            _mean([record.pdr for record in records]),
            _mean([record.mean_delay for record in records]),
            _mean([record.bytes_tx for record in records]),
            _mean([record.attack_attempts for record in records]),
            _mean([record.attack_accepted for record in records]),
        ]
        rows.append(
            [str(round_index), str(len(records))]
            + ["NA" if mean is None else f"{mean:.6f}" for mean in means]
        )
    return rows


def run_seeds(config: ScenarioConfig, seeds: List[int], workers: int) -> List[SeedOutputs]:
    """Independent instances; results are ordered by seed once all have finished"""
    if workers <= 1 or len(seeds) == 1:
        return [_run_seed(config.json(), seed) for seed in tqdm(seeds, disable=len(seeds) == 1)]
    outputs = []
    with ProcessPoolExecutor(max_workers=workers) as executor:
        futures = [executor.submit(_run_seed, config.json(), seed) for seed in seeds]
        for future in tqdm(as_completed(futures), total=len(futures)):
            outputs.append(future.result())
    return sorted(outputs, key=lambda outputs: outputs.seed)


def write_outputs(
    outputs: SeedOutputs,
    metrics: str,
    trace: Optional[str],
    auth_log: Optional[str],
    topology: Optional[str],
) -> None:
    write_rows(metrics, outputs.rows)
    if trace:
        write_lines(trace, outputs.trace)
    if auth_log:
        write_lines(auth_log, outputs.auth_log)
    if topology:
        write_lines(topology, outputs.topology)
    LOGGER.info("Wrote metrics for seed %d to %s", outputs.seed, metrics)


@click.command(help="Run a scenario and write its metrics CSV")
@click.option("--config", "config_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", type=int, default=None, help="Overrides run.seed and AEGISNET_SEED")
@click.option("--seeds", default=None, help="Seed sweep, 'A..B' or a comma list")
@click.option("--output", default=None, help="Metrics CSV path, overrides run.metrics")
@click.option("--trace", default=None, help="Traffic trace CSV path")
@click.option("--auth-log", default=None, help="Handshake log CSV path")
@click.option("--dump-topology", default=None, help="Write the phase-1 trees here")
@click.option("--baseline", is_flag=True, default=False, help="Store-and-forward, no aggregation")
@click.option("--flexibility", default=None, help="Comma separated tamper probabilities to sweep")
@click.option("--workers", type=int, default=1, help="Processes for seed sweeps")
@click.option("--debug", is_flag=True, default=False, help="Debug logging")
def cli_entrypoint(
    config_file: str,
    seed: Optional[int],
    seeds: Optional[str],
    output: Optional[str],
    trace: Optional[str],
    auth_log: Optional[str],
    dump_topology: Optional[str],
    baseline: bool,
    flexibility: Optional[str],
    workers: int,
    debug: bool,
):
    main(
        config_file=config_file,
        seed=seed,
        seeds=parse_seeds(seeds),
        output=output,
        trace=trace,
        auth_log=auth_log,
        dump_topology=dump_topology,
        baseline=baseline,
        flexibility=parse_intensities(flexibility) if flexibility else None,
        workers=workers,
        debug=debug,
    )


def main(
    config_file: str,
    seed: Optional[int] = None,
    seeds: Optional[List[int]] = None,
    output: Optional[str] = None,
    trace: Optional[str] = None,
    auth_log: Optional[str] = None,
    dump_topology: Optional[str] = None,
    baseline: bool = False,
    flexibility: Optional[List[float]] = None,
    workers: int = 1,
    debug: bool = False,
) -> List[str]:
    """Returns the paths written"""
    log.init(debug=debug)
    config = load_config(config_file)
    run_settings = config.run.copy(
        update={
            "metrics": output or config.run.metrics,
            "trace": trace or config.run.trace,
            "auth_log": auth_log or config.run.auth_log,
            "topology": dump_topology or config.run.topology,
            "baseline": baseline or config.run.baseline,
        }
    )
    config = config.copy(update={"run": run_settings})
    written: List[str] = []

    if flexibility is not None:
        chosen = resolve_seed(seed, config)
        path = suffixed(run_settings.metrics, "flexibility")
        curve = flexibility_sweep(config, chosen, flexibility)
        write_rows(
            path,
            [["intensity", "pdr"]]
            + [[f"{p:.6f}", "NA" if pdr is None else f"{pdr:.6f}"] for p, pdr in curve],
        )
        return [path]

    if seeds is None:
        chosen = resolve_seed(seed, config)
        LOGGER.info("Running %s with seed %d", config_file, chosen)
        (outputs,) = run_seeds(config, [chosen], workers=1)
        write_outputs(
            outputs,
            run_settings.metrics,
            run_settings.trace,
            run_settings.auth_log,
            run_settings.topology,
        )
        return [
            path
            for path in (
                run_settings.metrics,
                run_settings.trace,
                run_settings.auth_log,
                run_settings.topology,
            )
            if path
        ]

    LOGGER.info("Sweeping %d seeds with %d worker(s)", len(seeds), workers)
    results = run_seeds(config, seeds, workers)
    for outputs in results:
        paths: Tuple[Optional[str], ...] = tuple(
            suffixed(path, f"seed{outputs.seed}") if path else None
            for path in (
                run_settings.metrics,
                run_settings.trace,
                run_settings.auth_log,
                run_settings.topology,
            )
        )
        write_outputs(outputs, *paths)
        written.extend(path for path in paths if path)
    aggregate = suffixed(run_settings.metrics, "aggregate")
    write_rows(aggregate, aggregate_rows(results))
    written.append(aggregate)
    return written
