"""Command-line surface: one subcommand per estimator, thin HTTP client.

Every subcommand builds a run request and posts it to the service — by
default an in-process application instance, or a remote server when
``--server`` is given. Options map 1:1 to the configuration fields; a
``--config`` JSON file can supply any of them, with explicit flags
winning.

Exit codes: 0 success, 2 validation error, 3 runtime failure.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .errors import ConfigError

EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


def _post(server: str | None, algorithm: str, payload: dict) -> tuple[int, dict]:
    if server:
        import httpx

        resp = httpx.post(f"{server.rstrip('/')}/runs/{algorithm}",
                          json=payload, timeout=None)
        return resp.status_code, resp.json()
    from fastapi.testclient import TestClient

    from .service import create_app

    with TestClient(create_app(), raise_server_exceptions=False) as client:
        resp = client.post(f"/runs/{algorithm}", json=payload)
        return resp.status_code, resp.json()


def _merge_config(config_file: str | None, flags: dict) -> dict:
    payload: dict = {}
    if config_file:
        try:
            payload.update(json.loads(Path(config_file).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {config_file}: {exc}") from exc
    for key, value in flags.items():
        if value is None:
            continue
        if isinstance(value, tuple):
            if not value:
                continue
            value = list(value)
        payload[key] = value
    return payload


def _run(ctx: click.Context, algorithm: str, flags: dict) -> None:
    server = flags.pop("server", None)
    config_file = flags.pop("config", None)
    try:
        payload = _merge_config(config_file, flags)
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        ctx.exit(EXIT_VALIDATION)
    status, body = _post(server, algorithm, payload)
    if status == 200:
        for key, value in body["report"].items():
            click.echo(f"{key}: {value}")
        for line in body["extra_lines"]:
            click.echo(line)
        click.echo(f"figure: {body['figure_path']}")
        click.echo(f"csv: {body['csv_path']}")
        click.echo(f"report: {body['report_path']}")
        ctx.exit(0)
    kind = body.get("kind", "runtime")
    click.echo(f"error: {body.get('error', body)}", err=True)
    ctx.exit(EXIT_VALIDATION if kind == "validation" else EXIT_RUNTIME)


def common_options(fn):
    opts = [
        click.option("--network", type=str, default=None,
                     help="Path to a network description JSON file."),
        click.option("--net-name", type=str, default=None,
                     help="Name of a bundled fixture network."),
        click.option("--fsp-load", "fsp_load_indices", type=int, multiple=True,
                     help="Load index offering flexibility (repeatable)."),
        click.option("--fsp-dg", "fsp_dg_indices", type=int, multiple=True,
                     help="Generator index offering flexibility (repeatable)."),
        click.option("--scenario-type", type=str, default=None),
        click.option("--max-curr-per", type=float, default=None,
                     help="Branch/transformer loading limit in percent."),
        click.option("--max-volt-pu", type=float, default=None),
        click.option("--min-volt-pu", type=float, default=None),
        click.option("--dp", type=float, default=None,
                     help="Active-power lattice increment in MW."),
        click.option("--dq", type=float, default=None,
                     help="Reactive-power lattice increment in MVAr."),
        click.option("--flex-shape", type=str, default=None,
                     help="Offer envelope: Smax or PQmax."),
        click.option("--non-linear-fsps", type=int, multiple=True,
                     help="DG index restricted to two discrete setpoints (repeatable)."),
        click.option("--seed", type=int, default=None),
        click.option("--out-dir", type=str, default=None,
                     help="Artifact directory (default $FA_OUTPUT_DIR or ./fa-output)."),
        click.option("--pf-tol", type=float, default=None),
        click.option("--pf-max-iter", type=int, default=None),
        click.option("--config", type=str, default=None,
                     help="JSON file with any run options; flags win."),
        click.option("--server", type=str, default=None,
                     help="Remote service URL; default runs in-process."),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


@click.group()
@click.version_option(package_name="flexarea")
def main() -> None:
    """Estimate TSO-DSO flexibility areas."""


@main.command("monte-carlo")
@common_options
@click.option("--no-samples", type=int, default=None)
@click.option("--distribution", type=str, default=None,
              help="Shift sampling distribution: Uniform, Kumaraswamy or Hard.")
@click.pass_context
def monte_carlo(ctx: click.Context, **flags) -> None:
    """Monte-Carlo power-flow estimation over sampled shift vectors."""
    _run(ctx, "monte-carlo", flags)


@main.command("exhaustive")
@common_options
@click.option("--exhaustive-cap", type=int, default=None,
              help="Refuse lattices with more combinations than this.")
@click.pass_context
def exhaustive(ctx: click.Context, **flags) -> None:
    """Exhaustive power-flow estimation over the full shift lattice."""
    _run(ctx, "exhaustive", flags)


@main.command("opf")
@common_options
@click.option("--opf-step", type=float, default=None,
              help="Alpha sweep increment for the four objectives.")
@click.pass_context
def opf(ctx: click.Context, **flags) -> None:
    """Boundary tracing by the four weighted PCC objectives."""
    _run(ctx, "opf", flags)


@main.command("tcp")
@common_options
@click.option("--upsample-factor", type=int, default=None)
@click.option("--loading-threshold", type=float, default=None)
@click.option("--voltage-threshold", type=float, default=None)
@click.option("--memory-budget-bytes", type=int, default=None)
@click.pass_context
def tcp(ctx: click.Context, **flags) -> None:
    """Convolution-based estimation (one power flow per FSP shift)."""
    _run(ctx, "tcp", flags)


@main.command("tcp-merge")
@common_options
@click.option("--max-fsps", type=int, default=None,
              help="Merge electrically close FSPs down to this count.")
@click.option("--upsample-factor", type=int, default=None)
@click.option("--loading-threshold", type=float, default=None)
@click.option("--voltage-threshold", type=float, default=None)
@click.option("--memory-budget-bytes", type=int, default=None)
@click.pass_context
def tcp_merge(ctx: click.Context, **flags) -> None:
    """Convolution-based estimation with FSP merging."""
    _run(ctx, "tcp-merge", flags)


@main.command("tcp-save")
@common_options
@click.option("--tt-epsilon", type=float, default=None,
              help="Relative Frobenius tolerance for tensor compression.")
@click.option("--store-path", type=str, default=None,
              help="Bundle directory (default <out-dir>/tensors).")
@click.option("--upsample-factor", type=int, default=None)
@click.option("--loading-threshold", type=float, default=None)
@click.option("--voltage-threshold", type=float, default=None)
@click.option("--memory-budget-bytes", type=int, default=None)
@click.pass_context
def tcp_save(ctx: click.Context, **flags) -> None:
    """Convolution-based estimation, persisting state for adaptation."""
    _run(ctx, "tcp-save", flags)


@main.command("tcp-adapt")
@common_options
@click.option("--store-path", type=str, default=None,
              help="Bundle directory written by tcp-save.")
@click.pass_context
def tcp_adapt(ctx: click.Context, **flags) -> None:
    """Re-estimate from a stored bundle under a new operating condition."""
    _run(ctx, "tcp-adapt", flags)


if __name__ == "__main__":
    main()
