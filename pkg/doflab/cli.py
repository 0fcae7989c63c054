"""
Command-line front end.

    doflab bounds --users 3 --perfect 1 --private --slice d_1=1 --vertices
    doflab sim hybrid-5over3-a --trials 100 --seed 7 --mode field

Every command is a thin layer over the library; structured output (--format
json) is byte-identical across runs with the same flags and seed.
"""

import csv
import io
import logging
import sys

import click
from dotenv import load_dotenv

from . import bounds, polytope
from .config import load_settings
from .core import DofPoint, UserSubset, format_rational, parse_rational
from .engine import Mode, simulate
from .errors import DofLabError
from .rates import dof_slope
from .schemedsl import (
    builtin,
    builtin_names,
    claimed_dof,
    emit_scheme,
    load_scheme,
    parse_scheme,
    validate,
)
from .utils import coordinates, parse_assignments, parse_vector, to_json

logger = logging.getLogger(__name__)

FORMATS = click.Choice(["text", "json", "csv"])
SCHEME_FORMATS = click.Choice(["text", "json"])


class DofLabGroup(click.Group):
    """Reports library errors and zero denominators as `error: ...` with exit status 1."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except (DofLabError, ZeroDivisionError) as e:
            click.echo(f"error: {e}", err=True)
            ctx.exit(1)


@click.group(cls=DofLabGroup)
@click.option("-v", "--verbose", count=True, help="More log output on stderr (repeatable).")
@click.pass_context
def cli(ctx, verbose):
    """Outer bounds and linear schemes for the MISO broadcast channel with hybrid CSIT."""
    load_dotenv()
    try:
        settings = load_settings()
    except ValueError as e:
        raise click.UsageError(str(e))
    level = logging.getLevelName(settings.log_level)
    if verbose:
        level = logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    ctx.obj = settings


def _emit(document, fmt: str, text: str, table: list[list[str]] | None = None):
    if fmt == "json":
        click.echo(to_json(document), nl=False)
    elif fmt == "csv":
        buffer = io.StringIO()
        csv.writer(buffer, lineterminator="\n").writerows(table or [])
        click.echo(buffer.getvalue(), nl=False)
    else:
        click.echo(text)


def region_options(f):
    f = click.option("--private", is_flag=True, help="Only order-1 (private) messages.")(f)
    f = click.option("--perfect", "K_P", type=int, required=True, help="Users with instantaneous CSIT.")(f)
    f = click.option("--users", "K", type=int, required=True, help="Number of users K.")(f)
    return f


def _region(K, K_P, private, slice_text=None):
    fixes = parse_assignments(slice_text) if slice_text else {}
    return polytope.build_region(K, K_P, private, fixes), fixes


def _row_text(check: polytope.RowCheck) -> str:
    return f"{check.inequality}  (lhs {format_rational(check.lhs)}, bound {format_rational(check.bound)})"


def _verdict_lines(verdict: polytope.MembershipVerdict) -> list[str]:
    lines = [f"feasible: {'yes' if verdict.feasible else 'no'}"]
    lines += [f"violated: {_row_text(c)}" for c in verdict.violated]
    lines += [f"tight:    {_row_text(c)}" for c in verdict.tight]
    return lines


def _verdict_table(verdict: polytope.MembershipVerdict) -> list[list[str]]:
    table = [["status", "inequality", "lhs", "bound", "provenance"]]
    for status, checks in (("violated", verdict.violated), ("tight", verdict.tight)):
        for c in checks:
            table.append(
                [status, str(c.inequality), format_rational(c.lhs), format_rational(c.bound), str(c.inequality.provenance)]
            )
    return table


@cli.command("bounds")
@region_options
@click.option("--slice", "slice_text", help="Fix variables, e.g. d_1=1.")
@click.option("--vertices", "with_vertices", is_flag=True, help="Also enumerate the vertices.")
@click.option("--irredundant", is_flag=True, help="Drop inequalities implied by the others.")
@click.option("--format", "fmt", type=FORMATS, default="text", show_default=True)
def bounds_command(K, K_P, private, slice_text, with_vertices, irredundant, fmt):
    """List the outer-bound inequalities."""
    region, fixes = _region(K, K_P, private, slice_text)
    if irredundant:
        region = polytope.remove_redundant(region)
    variables = region.variables
    points = polytope.vertices(region) if with_vertices else []

    document = {
        "users": K,
        "perfect": K_P,
        "private": private,
        "slice": {s.label: format_rational(v) for s, v in fixes.items()},
        "variables": [s.label for s in variables],
        "inequalities": [
            {
                "inequality": str(row),
                "coefficients": {s.label: format_rational(c) for s, c in row.coefficients},
                "rhs": format_rational(row.rhs),
                "provenance": str(row.provenance),
            }
            for row in region
        ],
    }
    if with_vertices:
        document["vertices"] = [coordinates(p, variables) for p in points]

    lines = [f"# K={K} K_P={K_P}: {len(region)} inequalities over {' '.join(s.label for s in variables)}"]
    lines += [f"{row}    [{row.provenance}]" for row in region]
    if with_vertices:
        lines.append(f"# {len(points)} vertices")
        lines += ["(" + ", ".join(coordinates(p, variables)) + ")" for p in points]

    if fmt == "csv" and not with_vertices:
        click.echo(bounds.region_to_csv(region), nl=False)
        return
    table = [[s.label for s in variables]] + [coordinates(p, variables) for p in points]
    _emit(document, fmt, "\n".join(lines), table)


@cli.command("check")
@region_options
@click.option("--slice", "slice_text", help="Fix variables before checking.")
@click.option("--point", "point_text", required=True, help="Comma-separated rationals or d_S=value pairs.")
@click.option("--format", "fmt", type=FORMATS, default="text", show_default=True)
@click.pass_context
def check_command(ctx, K, K_P, private, slice_text, point_text, fmt):
    """Test whether a DoF point lies inside the outer bound."""
    region, _ = _region(K, K_P, private, slice_text)
    point = DofPoint(K, parse_vector(point_text, region.variables))
    verdict = polytope.contains(region, point)
    label = polytope.classify_point(region, point)
    document = verdict.to_dict() | {"classification": label}
    text = "\n".join([f"point: ({', '.join(coordinates(point, region.variables))})", f"classification: {label}"] + _verdict_lines(verdict))
    _emit(document, fmt, text, _verdict_table(verdict))
    if not verdict.feasible:
        ctx.exit(1)


@cli.command("maximize")
@region_options
@click.option("--slice", "slice_text", help="Fix variables before optimizing.")
@click.option("--weights", "weights_text", help="Objective weights; all ones (sum-DoF) when omitted.")
@click.option("--format", "fmt", type=FORMATS, default="text", show_default=True)
def maximize_command(K, K_P, private, slice_text, weights_text, fmt):
    """Maximize a weighted sum of DoF over the outer bound."""
    region, _ = _region(K, K_P, private, slice_text)
    weights = parse_vector(weights_text, region.variables) if weights_text else {s: 1 for s in region.variables}
    value, point = polytope.maximize(region, weights)
    argpoint = coordinates(point, region.variables)
    document = {
        "variables": [s.label for s in region.variables],
        "value": format_rational(value),
        "argpoint": argpoint,
    }
    text = f"value: {format_rational(value)}\nargpoint: ({', '.join(argpoint)})"
    table = [[s.label for s in region.variables] + ["value"], argpoint + [format_rational(value)]]
    _emit(document, fmt, text, table)


@cli.command("feas")
@click.option("--users", "K", type=int, default=3, show_default=True)
@click.option("--perfect", "K_P", type=int, default=1, show_default=True)
@click.option("--residual", required=True, help="Symbols still owed, e.g. d_1=3,d_12=1.")
@click.option("--slots", type=int, required=True, help="Slots left to deliver them.")
@click.option("--format", "fmt", type=FORMATS, default="text", show_default=True)
@click.pass_context
def feas_command(ctx, K, K_P, residual, slots, fmt):
    """Check whether leftover demand can still fit in the remaining slots."""
    demand = polytope.ResidualDemand.parse(residual, slots)
    verdict = polytope.extension_feasibility(K, K_P, demand)
    _emit(verdict.to_dict(), fmt, "\n".join(_verdict_lines(verdict)), _verdict_table(verdict))
    if not verdict.feasible:
        ctx.exit(1)


@cli.command("parse")
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@click.option("--format", "fmt", type=SCHEME_FORMATS, default="text", show_default=True)
def parse_command(path, fmt):
    """Parse a scheme file and print it in canonical form."""
    with open(path, encoding="utf-8") as handle:
        scheme = parse_scheme(handle.read())
    _emit(_scheme_summary(scheme), fmt, emit_scheme(scheme).rstrip("\n"))


def _scheme_summary(scheme) -> dict:
    return {
        "name": scheme.name,
        "users": scheme.K,
        "antennas": scheme.M,
        "slots": scheme.T,
        "symbols": {name: user for name, user in scheme.symbols},
        "claimed_dof": [format_rational(v) for v in claimed_dof(scheme).coordinates(_axes(scheme.K))],
    }


def _axes(K: int) -> list[UserSubset]:
    return [UserSubset.of(i) for i in range(1, K + 1)]


@cli.command("validate")
@click.argument("reference")
@click.option("--format", "fmt", type=SCHEME_FORMATS, default="text", show_default=True)
@click.pass_context
def validate_command(ctx, reference, fmt):
    """Check causality, CSIT availability and zero-forcing capacity of a scheme."""
    report = validate(load_scheme(reference))
    lines = ["ok"] if report.ok else [f"slot {i.slot}: {i.kind}: {i.detail}" for i in report.issues]
    _emit(report.to_dict(), fmt, "\n".join(lines))
    if not report.ok:
        ctx.exit(1)


@cli.command("sim")
@click.argument("reference")
@click.option("--trials", type=click.IntRange(min=1), default=100, show_default=True)
@click.option("--seed", type=int, help="Defaults to DOFLAB_SEED.")
@click.option("--mode", type=click.Choice([m.value for m in Mode]), help="Defaults to DOFLAB_MODE.")
@click.option("--threads", type=click.IntRange(min=1), help="Defaults to DOFLAB_THREADS.")
@click.option("--no-validate", is_flag=True, help="Simulate even when validation reports issues.")
@click.option("--expect", help="Exit 1 unless the achieved tuple equals this, e.g. 1,1/3,1/3.")
@click.option("--format", "fmt", type=SCHEME_FORMATS, default="text", show_default=True)
@click.pass_context
def sim_command(ctx, reference, trials, seed, mode, threads, no_validate, expect, fmt):
    """Simulate a scheme over random channels and certify decodability by rank."""
    settings = ctx.obj
    scheme = load_scheme(reference)
    report = validate(scheme)
    if not report.ok:
        if not no_validate:
            for issue in report.issues:
                click.echo(f"slot {issue.slot}: {issue.kind}: {issue.detail}", err=True)
            click.echo("error: scheme failed validation (use --no-validate to run anyway)", err=True)
            ctx.exit(1)
        logger.warning("ignoring %d validation issues in %s", len(report.issues), scheme.name)

    seed = settings.seed if seed is None else seed
    result = simulate(
        scheme,
        trials,
        seed,
        Mode.parse(mode) if mode else settings.mode,
        threads or settings.threads,
    )
    achieved = result.achieved_dof
    lines = [
        f"scheme {scheme.name}  mode {result.mode.value}  seed {seed}  trials {trials}",
        *(f"R{r}  {n}/{trials} decodable" for r, n in enumerate(result.successes_per_receiver, start=1)),
        f"all receivers decodable: {result.all_decodable}/{trials}",
        "achieved: " + (", ".join(coordinates(achieved, _axes(scheme.K))) if achieved else "none"),
    ]
    if result.failure_bound is not None:
        lines.append(f"failure probability per trial <= {result.failure_bound:.3g}")
    _emit(result.to_dict(), fmt, "\n".join(lines))

    if expect is not None:
        wanted = [parse_rational(v) for v in expect.split(",")]
        got = list(achieved.coordinates(_axes(scheme.K))) if achieved else None
        if got != wanted:
            click.echo(f"error: expected achieved {expect}, got {got and ','.join(map(format_rational, got))}", err=True)
            ctx.exit(1)


@cli.command("rate")
@click.argument("reference")
@click.option("--seed", type=int, help="Defaults to DOFLAB_SEED.")
@click.option("--snr-db", "snr_text", default="60,100", show_default=True, help="Two SNR values in dB.")
@click.option("--format", "fmt", type=SCHEME_FORMATS, default="text", show_default=True)
@click.pass_context
def rate_command(ctx, reference, seed, snr_text, fmt):
    """Estimate the DoF of each receiver from the slope of its mutual information."""
    try:
        low, high = (float(v) for v in snr_text.split(","))
    except ValueError:
        raise click.BadParameter("expected two comma-separated numbers", param_hint="--snr-db")
    seed = ctx.obj.seed if seed is None else seed
    scheme = load_scheme(reference)
    rates = dof_slope(scheme, seed, (low, high))
    document = {
        "scheme": scheme.name,
        "seed": seed,
        "snr_db": [low, high],
        "receivers": [r.to_dict() for r in rates],
    }
    lines = [
        f"R{r.receiver}  bits {r.bits[0]:.3f} -> {r.bits[1]:.3f}  slope {r.slope:.4f}  {r.rank_flag}"
        for r in rates
    ]
    _emit(document, fmt, "\n".join(lines))


@cli.command("builtin")
@click.argument("name")
@click.option("--emit", is_flag=True, help="Print the scheme text.")
@click.option("--format", "fmt", type=SCHEME_FORMATS, default="text", show_default=True)
def builtin_command(name, emit, fmt):
    """Show a built-in scheme."""
    text = builtin(name)
    if emit:
        click.echo(text, nl=False)
        return
    summary = _scheme_summary(parse_scheme(text))
    lines = [f"{k}: {v}" for k, v in summary.items()]
    _emit(summary, fmt, "\n".join(lines))


@cli.command("schemes")
def schemes_command():
    """List the built-in schemes."""
    for name in builtin_names():
        click.echo(name)


@cli.command("serve")
@click.option("--port", type=int, default=3000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
def serve_command(port, host):
    """Run the HTTP JSON API."""
    from . import create_app

    create_app().run(port=port, host=host)


def run(argv: list[str]) -> int:
    """Runs one command; returns 0, 1 for domain failures, 2 for usage errors."""
    try:
        result = cli.main(args=list(argv), prog_name="doflab", standalone_mode=False)
    except click.exceptions.Exit as e:
        return e.exit_code
    except click.ClickException as e:
        e.show()
        return e.exit_code
    except click.Abort:
        click.echo("Aborted!", err=True)
        return 1
    return result if isinstance(result, int) else 0
