"""Estimation run configuration and its validation.

``validate_settings`` fills defaults and rejects anything outside the
acceptable options before any simulation starts: a bad input never costs
a power flow.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from .errors import ConfigError
from .network import SCENARIOS, Constraints
from .offers import DISTRIBUTIONS, SHAPES

ALGORITHMS = (
    "monte-carlo", "exhaustive", "opf", "tcp", "tcp-merge", "tcp-save", "tcp-adapt",
)


@dataclass(frozen=True)
class RunConfig:
    algorithm: str = "tcp"
    network: str | None = None  # path to a network document
    net_name: str | None = None  # bundled fixture name
    fsp_load_indices: tuple[int, ...] = ()
    fsp_dg_indices: tuple[int, ...] = ()
    scenario_type: str = "identity"
    max_curr_per: float = 100.0
    max_volt_pu: float = 1.05
    min_volt_pu: float = 0.95
    dp: float = 0.05
    dq: float = 0.1
    no_samples: int = 1000
    distribution: str | None = None  # default: Hard
    opf_step: float = 0.1
    flex_shape: str | None = None  # default: Smax
    non_linear_fsps: tuple[int, ...] = ()
    max_fsps: int | None = None  # default: FSP count - 1
    tt_epsilon: float = 1e-8
    seed: int = 0
    out_dir: str | None = None
    store_path: str | None = None
    pf_tol: float = 1e-8
    pf_max_iter: int = 30
    exhaustive_cap: int = 1_000_000
    memory_budget_bytes: int = 2 << 30
    upsample_factor: int = 4
    loading_threshold: float = 0.5  # percent, FSP sensitivity cutoff
    voltage_threshold: float = 0.001  # p.u.

    def constraints(self) -> Constraints:
        return Constraints(
            max_loading_percent=self.max_curr_per,
            max_voltage_pu=self.max_volt_pu,
            min_voltage_pu=self.min_volt_pu,
        )


def validate_settings(config: RunConfig) -> RunConfig:
    """Return the configuration with defaults filled, or raise ConfigError."""
    if config.algorithm not in ALGORITHMS:
        raise ConfigError(f"algorithm must be one of {ALGORITHMS}, got {config.algorithm!r}")

    n_fsps = len(config.fsp_load_indices) + len(config.fsp_dg_indices)
    if n_fsps == 0:
        raise ConfigError("at least one distributed generation or load FSP is required")

    distribution = config.distribution or "Hard"
    if distribution not in DISTRIBUTIONS:
        raise ConfigError(
            f"distribution must be one of {DISTRIBUTIONS}, got {config.distribution!r}"
        )
    flex_shape = config.flex_shape or "Smax"
    if flex_shape not in SHAPES:
        raise ConfigError(f"flex_shape must be one of {SHAPES}, got {config.flex_shape!r}")
    max_fsps = config.max_fsps if config.max_fsps is not None else max(n_fsps - 1, 1)
    if max_fsps < 1:
        raise ConfigError("max_fsps must be >= 1")

    if config.dp <= 0 or config.dq <= 0:
        raise ConfigError("dp and dq must be positive")
    if config.no_samples < 1:
        raise ConfigError("no_samples must be >= 1")
    if not 0 < config.opf_step <= 1:
        raise ConfigError("opf_step must lie in (0, 1]")
    if config.scenario_type not in SCENARIOS:
        raise ConfigError(
            f"unknown scenario_type {config.scenario_type!r}; "
            f"acceptable: {sorted(SCENARIOS)}"
        )
    if not config.min_volt_pu < 1.0 < config.max_volt_pu:
        raise ConfigError("voltage band [min_volt_pu, max_volt_pu] must bracket 1.0")
    if config.max_curr_per <= 0:
        raise ConfigError("max_curr_per must be positive")
    if not 0 < config.tt_epsilon < 1:
        raise ConfigError("tt_epsilon must lie in (0, 1)")
    if len(set(config.non_linear_fsps) - set(config.fsp_dg_indices)) > 0:
        raise ConfigError("non_linear_fsps must be a subset of fsp_dg_indices")
    if config.algorithm == "tcp-adapt" and not config.store_path:
        raise ConfigError("tcp-adapt requires store_path pointing at a saved bundle")

    return dataclasses.replace(
        config, distribution=distribution, flex_shape=flex_shape, max_fsps=max_fsps,
    )


def config_echo(config: RunConfig) -> dict:
    """Flat key/value view for the text report."""
    return dataclasses.asdict(config)
