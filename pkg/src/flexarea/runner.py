"""Run orchestration: route a validated configuration to an estimator and
emit the three output artifacts (figure, CSV, text report).

File names are derived from the subcommand only — no timestamps — so a
re-run with identical inputs overwrites its predecessor with identical
bytes.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

from .artifacts import render_fa_figure, write_boundary_csv, write_report
from .bundle import save_tensors, tc_plus_adapt
from .errors import ConfigError
from .estimators import exhaustive_pf, monte_carlo_pf
from .fagrid import FaGrid, normalize, write_csv
from .network import Network, apply_scenario, load_fixture, load_network
from .offers import offers_from_network
from .opf import opf_boundary_sweep
from .settings import RunConfig, config_echo, validate_settings
from .tensorconv import tc_plus, tc_plus_merge

DEFAULT_FIXTURE = "feeder4"


@dataclass
class RunResult:
    config: RunConfig
    report: dict
    figure_path: Path
    csv_path: Path
    report_path: Path
    grid: FaGrid | None = None
    extra_lines: list[str] = field(default_factory=list)

    @property
    def artifact_paths(self) -> list[Path]:
        return [self.figure_path, self.csv_path, self.report_path]


def resolve_out_dir(config: RunConfig) -> Path:
    root = config.out_dir or os.environ.get("FA_OUTPUT_DIR") or "fa-output"
    out = Path(root)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(config: RunConfig) -> Network:
    if config.network:
        net = load_network(config.network)
    else:
        net = load_fixture(config.net_name or DEFAULT_FIXTURE)
    return apply_scenario(net, config.scenario_type)


def _check_indices(net: Network, config: RunConfig) -> None:
    for idx in config.fsp_load_indices:
        if not 0 <= idx < len(net.loads):
            raise ConfigError(f"fsp load index {idx} out of range (network has "
                              f"{len(net.loads)} loads)")
    for idx in config.fsp_dg_indices:
        if not 0 <= idx < len(net.sgens):
            raise ConfigError(f"fsp dg index {idx} out of range (network has "
                              f"{len(net.sgens)} generators)")


def dispatch(config: RunConfig) -> RunResult:
    """Validate, run the selected estimator, write the artifacts."""
    config = validate_settings(config)
    net = _load(config)
    _check_indices(net, config)
    offers = offers_from_network(
        net, list(config.fsp_load_indices), list(config.fsp_dg_indices),
        config.flex_shape, list(config.non_linear_fsps),
    )
    limits = config.constraints()
    out = resolve_out_dir(config)
    algo = config.algorithm
    figure_path = out / f"{algo}-fa.svg"
    csv_path = out / f"{algo}-fa.csv"
    report_path = out / f"{algo}-report.txt"

    grid: FaGrid | None = None
    extra: list[str] = []

    if algo == "monte-carlo":
        grid, _, report = monte_carlo_pf(
            net, offers, limits, config.no_samples, config.distribution,
            config.seed, config.dp, config.dq,
            pf_tol=config.pf_tol, pf_max_iter=config.pf_max_iter,
        )
        grid = normalize(grid)
    elif algo == "exhaustive":
        grid, _, report = exhaustive_pf(
            net, offers, limits, config.dp, config.dq,
            cap=config.exhaustive_cap,
            pf_tol=config.pf_tol, pf_max_iter=config.pf_max_iter,
        )
        grid = normalize(grid)
    elif algo == "opf":
        points, report = opf_boundary_sweep(
            net, offers, limits, config.opf_step,
            pf_tol=config.pf_tol, pf_max_iter=config.pf_max_iter,
        )
        render_fa_figure(figure_path, boundary=points)
        write_boundary_csv(points, csv_path)
        write_report(report_path, report, config_echo(config))
        return RunResult(config, report, figure_path, csv_path, report_path)
    elif algo in ("tcp", "tcp-merge"):
        kwargs = dict(
            upsample_factor=config.upsample_factor,
            loading_threshold=config.loading_threshold,
            voltage_threshold=config.voltage_threshold,
            pf_tol=config.pf_tol, pf_max_iter=config.pf_max_iter,
            memory_budget_bytes=config.memory_budget_bytes,
        )
        if algo == "tcp":
            state = tc_plus(net, offers, limits, config.dp, config.dq, **kwargs)
        else:
            state = tc_plus_merge(net, offers, limits, config.dp, config.dq,
                                  config.max_fsps, **kwargs)
        grid, report, extra = state.fa, state.report, list(state.merge_events)
    elif algo == "tcp-save":
        store = Path(config.store_path) if config.store_path else out / "tensors"
        state, manifest = save_tensors(
            net, offers, limits, config.dp, config.dq, config.tt_epsilon, store,
            upsample_factor=config.upsample_factor,
            loading_threshold=config.loading_threshold,
            voltage_threshold=config.voltage_threshold,
            pf_tol=config.pf_tol, pf_max_iter=config.pf_max_iter,
            memory_budget_bytes=config.memory_budget_bytes,
        )
        grid, report, extra = state.fa, state.report, list(state.merge_events)
        extra.extend(
            f"stored: {e['comp']} dense {e['dense_bytes']} B -> tt {e['tt_bytes']} B"
            for e in manifest["components"]
        )
    elif algo == "tcp-adapt":
        result = tc_plus_adapt(
            net, config.store_path, limits,
            pf_tol=config.pf_tol, pf_max_iter=config.pf_max_iter,
        )
        grid, report = result.fa, result.report
        extra = [f"warning: {w}" for w in result.stale_components]
    else:  # pragma: no cover - validate_settings already rejects this
        raise ConfigError(f"unknown algorithm {algo!r}")

    render_fa_figure(figure_path, grid=grid)
    write_csv(grid, csv_path)
    write_report(report_path, report, config_echo(config), extra)
    return RunResult(config, report, figure_path, csv_path, report_path,
                     grid=grid, extra_lines=extra)
