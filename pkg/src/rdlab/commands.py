import json
import logging
from contextlib import contextmanager
from typing import Any, Dict, Iterator, Optional

import click
from click import Command, Group
from rdlab import fileformats
from rdlab.assignment import (
    build_assignment,
    check_u_consistency_for,
    decompose_subspace,
    is_u_consistent_all,
)
from rdlab.constants import (
    DEFAULT_CAMPAIGN_UNITARIES,
    DEFAULT_SEED,
    ETA_CMI,
    ETA_PSD,
    SEED_ENVVAR,
    TOLERANCES,
)
from rdlab.errors import DimMismatchError
from rdlab.experiments import (
    SweepReport,
    markov_campaign,
    run_commuting_family,
    run_theta_sweep,
)
from rdlab.qmaps import classify, operator_sum
from rdlab.reference import generalized_steer, markov_test, reduced_dynamics, steer

logger = logging.getLogger(__name__)

DEFAULT_T_GRID = "0.1:3.0:30"


class RdlabCommandError(click.ClickException):
    """Any failure to load, validate or compute; the message goes to stderr."""

    exit_code = 2


@contextmanager
def reported_errors() -> Iterator[None]:
    try:
        yield
    except (ValueError, TypeError, KeyError, OSError) as e:
        raise RdlabCommandError(f"{type(e).__name__}: {e}") from e


def _echo_json(payload: Any, output: Optional[str] = None) -> None:
    if output is not None:
        fileformats.write_json(output, payload)
    click.echo(json.dumps(payload, indent=2))


def _write_sweep(report: SweepReport, csv_path: Optional[str]) -> Dict[str, Any]:
    summary = report.summary()
    if csv_path is not None:
        report.to_csv(csv_path)
        summary["csv"] = csv_path
    return summary


tol_psd_option = click.option(
    "--tol-psd",
    type=float,
    default=ETA_PSD,
    show_default=True,
    help="Choi eigenvalues at or above -tol count as positive",
)
tol_cmi_option = click.option(
    "--tol-cmi",
    type=float,
    default=ETA_CMI,
    show_default=True,
    help="Largest conditional mutual information (nats) still called Markov",
)
output_option = click.option(
    "--output", "-o", type=click.Path(dir_okay=False), help="Also write the JSON here"
)
csv_option = click.option(
    "--csv", "csv_path", type=click.Path(dir_okay=False), help="Write sweep rows as CSV"
)
processes_option = click.option(
    "--processes", type=click.IntRange(min=1), default=None, help="Worker processes"
)


def create_rdlab_command(cli: Group) -> Command:
    """Creates the rdlab command line utility."""

    @cli.group(
        "rdlab",
        short_help="Reference states, assignment maps and reduced dynamics",
    )
    @click.option("-v", "--verbose", count=True, help="Repeat for more logging")
    def rdlab(verbose: int) -> None:
        level = logging.WARNING - 10 * min(verbose, 2)
        logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    @rdlab.command("markov-test", short_help="Test a tripartite reference state")
    @click.argument("reference", type=click.Path(exists=True, dir_okay=False))
    @click.option(
        "--tol",
        "--tol-cmi",
        "tol_cmi",
        type=float,
        default=ETA_CMI,
        show_default=True,
        help="Largest conditional mutual information (nats) still called Markov",
    )
    @output_option
    @click.pass_context
    def markov_test_command(
        ctx: click.Context, reference: str, tol_cmi: float, output: Optional[str]
    ) -> None:
        """Decides whether REFERENCE, a state on R (x) S (x) E, is a Markov state.

        Exits 0 when it is, 1 when it is not.

        Args:
            reference (str): matrix JSON with dims [m, d_S, d_E]
        """
        with reported_errors():
            ref = fileformats.read_reference(reference)
            if not ref.is_tripartite:
                raise DimMismatchError("markov-test needs dims [m, d_S, d_E]")
            verdict = markov_test(ref, tol_cmi=tol_cmi)
        payload = verdict.to_dict()
        payload[TOLERANCES] = {"tol_cmi": tol_cmi}
        _echo_json(payload, output)
        ctx.exit(0 if verdict.is_markov else 1)

    @rdlab.command("opsum", short_help="Signed operator-sum form of a map")
    @click.argument("qmap", type=click.Path(exists=True, dir_okay=False))
    @output_option
    def opsum_command(qmap: str, output: Optional[str]) -> None:
        """Writes map(X) = sum_k e_k K_k X K_k^dagger for the map in QMAP."""
        with reported_errors():
            source = fileformats.read_qmap(qmap)
            decomposition = operator_sum(source)
        _echo_json(
            {
                "coeffs": list(decomposition.coeffs),
                "kraus": fileformats.operator_list_to_dict(decomposition.kraus),
                "residual": decomposition.residual(source),
                "tp_residual": decomposition.tp_residual(),
            },
            output,
        )

    @rdlab.command("classify", short_help="Hermiticity, trace and CP checks")
    @click.argument("qmap", type=click.Path(exists=True, dir_okay=False))
    @tol_psd_option
    @click.pass_context
    def classify_command(ctx: click.Context, qmap: str, tol_psd: float) -> None:
        """Classifies the map in QMAP; exits 0 when it is CP and 1 otherwise."""
        with reported_errors():
            classification = classify(fileformats.read_qmap(qmap), tol_psd=tol_psd)
        payload = classification.to_dict()
        payload[TOLERANCES] = {"tol_psd": tol_psd}
        _echo_json(payload)
        ctx.exit(0 if classification.cp else 1)

    @rdlab.command("steer", short_help="Steer a reference state through R")
    @click.argument("reference", type=click.Path(exists=True, dir_okay=False))
    @click.argument("operator", type=click.Path(exists=True, dir_okay=False))
    @click.option(
        "--generalized",
        is_flag=True,
        help="Accept any operator on R and skip normalization",
    )
    @output_option
    def steer_command(
        reference: str, operator: str, generalized: bool, output: Optional[str]
    ) -> None:
        """Conditional S(E) operator after OPERATOR is applied on the flag system."""
        with reported_errors():
            ref = fileformats.read_reference(reference)
            op = fileformats.read_matrix(operator)
            result = generalized_steer(ref, op) if generalized else steer(ref, op)
        _echo_json(fileformats.matrix_to_dict(result), output)

    @rdlab.command("reduce", short_help="Reduced dynamics of a paired basis")
    @click.argument("basis", type=click.Path(exists=True, dir_okay=False))
    @click.argument("unitary", type=click.Path(exists=True, dir_okay=False))
    @tol_psd_option
    @output_option
    def reduce_command(
        basis: str, unitary: str, tol_psd: float, output: Optional[str]
    ) -> None:
        """Builds Tr_E o Ad_U o Lambda_S from the pairs in BASIS and UNITARY."""
        with reported_errors():
            assignment = build_assignment(fileformats.read_paired_basis(basis))
            dynamics = reduced_dynamics(assignment, fileformats.read_unitary(unitary))
            classification = classify(dynamics, tol_psd=tol_psd)
        payload = fileformats.qmap_to_dict(dynamics)
        payload["classification"] = classification.to_dict()
        payload[TOLERANCES] = {"tol_psd": tol_psd}
        _echo_json(payload, output)

    @rdlab.command("sweep-theta", short_help="CP sweep over the theta family")
    @click.argument("config", type=click.Path(exists=True, dir_okay=False))
    @click.option("--grid", help="Override the theta grid as start:stop:count")
    @csv_option
    @processes_option
    @tol_psd_option
    def sweep_theta_command(
        config: str,
        grid: Optional[str],
        csv_path: Optional[str],
        processes: Optional[int],
        tol_psd: float,
    ) -> None:
        """Runs the theta sweep for the scenario in CONFIG (TOML or JSON).

        A non-CP row is a result, not an error: the exit code stays 0.
        """
        with reported_errors():
            scenario = fileformats.load_scenario(config)
            if grid is not None:
                scenario.theta_grid = fileformats.parse_grid(grid)
            report = run_theta_sweep(scenario, tol_psd=tol_psd, processes=processes)
            summary = _write_sweep(report, csv_path)
        summary[TOLERANCES] = {"tol_psd": tol_psd}
        _echo_json(summary)

    @rdlab.command("commuting-family", short_help="CP sweep over commuting unitaries")
    @click.argument("config", type=click.Path(exists=True, dir_okay=False))
    @click.option("--t-grid", default=DEFAULT_T_GRID, show_default=True)
    @csv_option
    @processes_option
    @tol_psd_option
    def commuting_family_command(
        config: str,
        t_grid: str,
        csv_path: Optional[str],
        processes: Optional[int],
        tol_psd: float,
    ) -> None:
        """Reduced dynamics under exp(-i t sum_i sigma_i (x) sigma_i)."""
        with reported_errors():
            scenario = fileformats.load_scenario(config)
            report = run_commuting_family(
                scenario,
                fileformats.parse_grid(t_grid),
                tol_psd=tol_psd,
                processes=processes,
            )
            summary = _write_sweep(report, csv_path)
        summary[TOLERANCES] = {"tol_psd": tol_psd}
        _echo_json(summary)

    @rdlab.command("campaign", short_help="Randomized Markov/CP campaign")
    @click.option("--seed", type=int, envvar=SEED_ENVVAR, default=DEFAULT_SEED)
    @click.option("--instances", type=click.IntRange(min=0), default=5, show_default=True)
    @click.option("--d-s", type=click.IntRange(2, 3), default=2, show_default=True)
    @click.option("--d-e", type=click.IntRange(1, 3), default=2, show_default=True)
    @click.option(
        "--unitaries",
        type=click.IntRange(min=0),
        default=DEFAULT_CAMPAIGN_UNITARIES,
        show_default=True,
    )
    @click.option("--worked-example/--no-worked-example", default=False)
    @csv_option
    @tol_psd_option
    @tol_cmi_option
    @click.pass_context
    def campaign_command(
        ctx: click.Context,
        seed: int,
        instances: int,
        d_s: int,
        d_e: int,
        unitaries: int,
        worked_example: bool,
        csv_path: Optional[str],
        tol_psd: float,
        tol_cmi: float,
    ) -> None:
        """Exits 1 if any Markov reference produced non-CP reduced dynamics."""
        with reported_errors():
            report = markov_campaign(
                seed,
                instances,
                (d_s, d_e),
                n_unitaries=unitaries,
                include_worked_example=worked_example,
                tol_psd=tol_psd,
                tol_cmi=tol_cmi,
            )
            if csv_path is not None:
                report.to_csv(csv_path)
        summary = report.summary()
        summary[TOLERANCES] = {"tol_psd": tol_psd, "tol_cmi": tol_cmi}
        _echo_json(summary)
        ctx.exit(0 if report.violations == 0 else 1)

    @rdlab.command("consistency", short_help="V = V' + V0 split and U-consistency")
    @click.argument("basis", type=click.Path(exists=True, dir_okay=False))
    @click.option(
        "--unitary",
        type=click.Path(exists=True, dir_okay=False),
        help="Also test consistency under this unitary",
    )
    def consistency_command(basis: str, unitary: Optional[str]) -> None:
        """Decomposes the subspace spanned by the operators in BASIS."""
        with reported_errors():
            subspace = fileformats.read_subspace(basis)
            v_prime, v_zero = decompose_subspace(subspace)
            u_consistent_for: Optional[bool] = None
            if unitary is not None:
                u_consistent_for = check_u_consistency_for(
                    subspace, fileformats.read_unitary(unitary)
                )
            payload = {
                "dim_v": subspace.rank,
                "dim_v_prime": v_prime.rank,
                "dim_v_zero": v_zero.rank,
                "u_consistent_all": is_u_consistent_all(subspace),
                "u_consistent_for": u_consistent_for,
            }
        _echo_json(payload)

    return rdlab


cli = create_rdlab_command(Group())

