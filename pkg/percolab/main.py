"""Command-line experiment runner.

Every estimator is a subcommand. Parameters resolve as model defaults < --config
file < flags, each run writes its report together with the resolved config, and the
process exit code follows the exception hierarchy (0 success, 2 invalid input,
3 unresolved estimate, 4 soundness failure).
"""

import argparse
import sys
from typing import Any, Callable, Sequence

from percolab.exceptions import (
    PercolabException,
    UnresolvedEstimateError,
    ValidationError,
)
from percolab.schemas.experiment import ExperimentConfig, Subcommand
from percolab.schemas.reports import (
    CERTIFICATE_COLUMNS,
    CORRELATION_COLUMNS,
    DSV_COLUMNS,
    ESTIMATE_COLUMNS,
    GAP_COLUMNS,
    INVASION_COLUMNS,
    NU_COLUMNS,
    SELFTEST_COLUMNS,
    VOLUME_COLUMNS,
    GapReport,
    Geometry,
    estimate_csv_row,
    nu_csv_row,
)
from percolab.schemas.seeds import SeedSpec
from percolab.services.domination import (
    box_variant_gap,
    certificate_cross_check,
    default_grid,
    dsv_event_counter,
    gap_test,
    ipc_certificate_bound,
    optimize_certificate,
)
from percolab.services.iic import (
    conditioned_volume_profile,
    nu_annulus_estimate,
    one_arm_probability,
)
from percolab.services.invasion import (
    StopRule,
    export_trace,
    invasion_volume_profile,
    run_invasion,
    running_max_trace,
)
from percolab.services.lattice import Annulus, Region
from percolab.services.near_critical import (
    crossing_probability,
    divergence_table,
    estimate_pn,
)
from percolab.services.random_field import sample_weights
from percolab.services.selftest import run_selftest
from percolab.utils.io import read_config_values, resolve_config, write_report
from percolab.utils.logger import configure_logger, get_logger

logger = get_logger(__name__)

# flag -> help; dest is the config key with dashes turned into underscores.
FLAGS: dict[str, str] = {
    "n": "Box or annulus scale n",
    "N": "Conditioning radius N",
    "n-list": "Comma-separated increasing scales, e.g. 4,8,16",
    "p": "Percolation level p",
    "grid": "Comma-separated levels p for the certificate optimization",
    "epsilon": "Crossing deficit defining p_n",
    "tolerance": "Bisection half-width for p_n",
    "replicas": "Replicas per estimate",
    "horizon": "Horizon box radius M",
    "steps": "Invasion step cap",
    "burn-in": "Steps dropped before reporting running maxima",
    "height": "Crossing rectangle height",
    "windows": "Comma-separated annulus windows inner:outer",
    "source": "Cluster source, ipc or iic",
    "radii": "Comma-separated profile radii",
    "cross-check": "Fields for the certificate soundness cross-check",
    "trace": "Export the invasion trace here (.csv or .npy)",
}

SUBCOMMAND_FLAGS: dict[Subcommand, tuple[str, ...]] = {
    Subcommand.INVADE: ("horizon", "steps", "burn-in", "trace"),
    Subcommand.CROSSING: ("p", "n", "height", "replicas"),
    Subcommand.CORRLEN: ("n-list", "epsilon", "tolerance"),
    Subcommand.ONEARM: ("n", "replicas"),
    Subcommand.IIC_NU: ("n", "N", "replicas"),
    Subcommand.CERTIFICATE: (
        "n",
        "p",
        "grid",
        "epsilon",
        "tolerance",
        "replicas",
        "cross-check",
    ),
    Subcommand.GAP: ("n-list", "epsilon", "tolerance", "grid", "replicas"),
    Subcommand.BOX_GAP: ("n-list", "epsilon", "tolerance", "grid", "replicas"),
    Subcommand.DSV_COUNT: ("windows", "horizon", "source", "replicas"),
    Subcommand.SELFTEST: (),
    Subcommand.VOLUME: ("N", "radii", "replicas"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="percolab", description="Invasion percolation and IIC experiments"
    )
    subparsers = parser.add_subparsers(dest="subcommand", required=True)
    for subcommand, flags in SUBCOMMAND_FLAGS.items():
        sub = subparsers.add_parser(subcommand.value, allow_abbrev=False)
        # SUPPRESS keeps unset flags out of the namespace so file values survive.
        sub.add_argument("--config", default=None, help="key=value config file")
        sub.add_argument("--seed", default=argparse.SUPPRESS, help="Master seed")
        sub.add_argument(
            "--workers",
            default=argparse.SUPPRESS,
            help="Worker processes (default: PERCOLAB_WORKERS or all cores)",
        )
        sub.add_argument(
            "--output", default=argparse.SUPPRESS, help="Report path, - for stdout"
        )
        sub.add_argument(
            "--format", default=argparse.SUPPRESS, choices=("csv", "jsonl")
        )
        for flag in flags:
            sub.add_argument(
                f"--{flag}",
                dest=flag.replace("-", "_"),
                default=argparse.SUPPRESS,
                help=FLAGS[flag],
            )
    return parser


def parse_config(argv: Sequence[str] | None = None) -> ExperimentConfig:
    args = vars(build_parser().parse_args(argv))
    path = args.pop("config")
    file_values = read_config_values(path) if path else {}
    return resolve_config(file_values, args, path)


def _seed(config: ExperimentConfig) -> SeedSpec:
    return SeedSpec(master_seed=config.seed, purpose_tag=config.subcommand.value)


def run_invade(config: ExperimentConfig) -> None:
    assert config.horizon is not None
    field_ = sample_weights(Region.box(config.horizon), _seed(config))
    state = run_invasion(
        field_, StopRule(max_steps=config.steps, exit_radius=config.horizon)
    )
    if config.trace:
        fmt = "npy" if config.trace.endswith(".npy") else "csv"
        export_trace(state, config.trace, fmt)
    maxima = running_max_trace(state, config.burn_in)
    weights = state.trace_weights[config.burn_in :]
    logger.info(
        "Invasion run",
        steps=state.step_count,
        censored=state.censored,
        max_norm=state.max_norm,
        burn_in=config.burn_in,
        max_after_burn_in=float(maxima[0]),
    )
    rows = (
        (config.burn_in + k + 1, weight, float(running))
        for k, (weight, running) in enumerate(zip(weights, maxima))
    )
    write_report(config, "invasion", INVASION_COLUMNS, rows)


def run_crossing(config: ExperimentConfig) -> None:
    assert config.p is not None and config.n is not None
    estimate = crossing_probability(
        config.p,
        config.n,
        config.replicas,
        _seed(config),
        config.resolved_workers(),
        height=config.height,
    )
    write_report(config, "crossing", ESTIMATE_COLUMNS, [estimate_csv_row(estimate)])


def run_corrlen(config: ExperimentConfig) -> None:
    assert config.n_list is not None
    table = divergence_table(
        config.n_list,
        config.epsilon,
        _seed(config),
        config.tolerance,
        config.resolved_workers(),
    )
    if not table.rows:
        raise UnresolvedEstimateError(
            "No resolved p_n row", n_list=config.n_list
        )
    write_report(config, "corrlen", CORRELATION_COLUMNS, table.csv_rows())


def run_onearm(config: ExperimentConfig) -> None:
    assert config.n is not None
    estimate = one_arm_probability(
        config.n, config.replicas, _seed(config), config.resolved_workers()
    )
    write_report(config, "onearm", ESTIMATE_COLUMNS, [estimate_csv_row(estimate)])


def run_iic_nu(config: ExperimentConfig) -> None:
    assert config.n is not None and config.N is not None
    nu = nu_annulus_estimate(
        config.n, config.N, config.replicas, _seed(config), config.resolved_workers()
    )
    write_report(config, "iic-nu", NU_COLUMNS, [nu_csv_row(nu)])


def run_certificate(config: ExperimentConfig) -> None:
    assert config.n is not None
    seed = _seed(config)
    workers = config.resolved_workers()
    if config.p is not None:
        outcome = ipc_certificate_bound(
            config.n,
            config.p,
            config.replicas,
            seed,
            workers,
            cross_check=config.cross_check,
        )
    else:
        grid = config.grid
        if grid is None:
            pn = estimate_pn(
                config.n, config.epsilon, config.tolerance, seed.child("pn"), workers
            )
            grid = default_grid(pn.p_hat)
        _, outcome = optimize_certificate(
            config.n, grid, config.replicas, seed, workers
        )
        if config.cross_check:
            tally = certificate_cross_check(
                config.n, outcome.p, config.cross_check, seed.child("cross-check")
            )
            outcome = outcome.model_copy(update={"cross_check": tally})
    tally = outcome.cross_check
    row = (
        outcome.n,
        outcome.p,
        Geometry.ANNULUS.value,
        outcome.support_edges,
        outcome.disconnection.value,
        outcome.disconnection.lower,
        outcome.disconnection.upper,
        outcome.log10_bound,
        outcome.log10_bound_lower,
        tally.certified if tally else "",
        tally.covered if tally else "",
        seed.label(),
    )
    write_report(config, "certificate", CERTIFICATE_COLUMNS, [row])


def _write_gap(config: ExperimentConfig, report: GapReport) -> None:
    if not report.rows:
        raise UnresolvedEstimateError(
            "Every gap row is unresolved", skipped=report.skipped
        )
    print(report.summary(), file=sys.stderr)
    write_report(config, config.subcommand.value, GAP_COLUMNS, report.csv_rows())


def run_gap(config: ExperimentConfig) -> None:
    assert config.n_list is not None
    pipeline = box_variant_gap if config.subcommand == Subcommand.BOX_GAP else gap_test
    report = pipeline(
        config.n_list,
        config.epsilon,
        _seed(config),
        config.replicas,
        config.tolerance,
        config.resolved_workers(),
        p_grid=config.grid,
    )
    _write_gap(config, report)


def run_dsv_count(config: ExperimentConfig) -> None:
    assert config.windows is not None and config.horizon is not None
    try:
        windows = [Annulus(inner, outer) for inner, outer in config.windows]
    except PercolabException as exc:
        raise ValidationError(exc.message, field="windows") from exc
    report = dsv_event_counter(
        config.source, windows, config.horizon, config.replicas, _seed(config)
    )
    write_report(config, "dsv-count", DSV_COLUMNS, report.csv_rows())


def run_selftest_command(config: ExperimentConfig) -> None:
    report = run_selftest(SeedSpec(master_seed=config.seed, purpose_tag="selftest"))
    write_report(config, "selftest", SELFTEST_COLUMNS, report.csv_rows())


def run_volume(config: ExperimentConfig) -> None:
    assert config.N is not None and config.radii is not None
    seed = _seed(config)
    ipc = invasion_volume_profile(
        config.N, config.radii, config.replicas, seed.child("ipc")
    )
    iic = conditioned_volume_profile(
        config.N, config.radii, config.replicas, seed.child("iic")
    )
    write_report(config, "volume", VOLUME_COLUMNS, list(zip(config.radii, ipc, iic)))


HANDLERS: dict[Subcommand, Callable[[ExperimentConfig], None]] = {
    Subcommand.INVADE: run_invade,
    Subcommand.CROSSING: run_crossing,
    Subcommand.CORRLEN: run_corrlen,
    Subcommand.ONEARM: run_onearm,
    Subcommand.IIC_NU: run_iic_nu,
    Subcommand.CERTIFICATE: run_certificate,
    Subcommand.GAP: run_gap,
    Subcommand.BOX_GAP: run_gap,
    Subcommand.DSV_COUNT: run_dsv_count,
    Subcommand.SELFTEST: run_selftest_command,
    Subcommand.VOLUME: run_volume,
}


def main(argv: Sequence[str] | None = None) -> int:
    """Run one experiment and return the process exit code."""
    configure_logger()
    try:
        config = parse_config(argv)
    except SystemExit as exc:
        # argparse usage errors and --help
        return exc.code if isinstance(exc.code, int) else 2
    try:
        context: dict[str, Any] = config.as_flat()
        logger.info("Experiment started", **context)
        HANDLERS[config.subcommand](config)
        logger.info("Experiment finished", subcommand=config.subcommand.value)
    except PercolabException as exc:
        logger.error(
            "Experiment failed",
            error_code=exc.error_code,
            message=exc.message,
            exit_code=exc.exit_code,
            details=exc.details,
        )
        return exc.exit_code
    return 0


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
