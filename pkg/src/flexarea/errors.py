"""Exception hierarchy shared across the package.

Validation-type errors abort a run before any power flow is executed;
runtime-type errors occur mid-computation. The CLI maps the former to
exit code 2 and the latter to exit code 3.
"""


class FlexAreaError(Exception):
    """Base class for all package errors."""


class SchemaError(FlexAreaError):
    """A network description document violates the published schema."""


class NetworkValidationError(FlexAreaError):
    """A structurally parseable network breaks a model invariant."""


class ConfigError(FlexAreaError):
    """Estimation settings outside the acceptable options."""


class ContractError(FlexAreaError):
    """An operation was called outside its stated precondition."""


class RuntimeFailure(FlexAreaError):
    """The run started but could not complete (base PF divergence etc.)."""


class MemoryBudgetError(RuntimeFailure):
    """A dense component tensor would exceed the configured memory budget."""

    def __init__(self, comp: str, estimated_bytes: int, budget_bytes: int):
        self.comp = comp
        self.estimated_bytes = estimated_bytes
        self.budget_bytes = budget_bytes
        super().__init__(
            f"component tensor for {comp} would need ~{estimated_bytes / 2**30:.2f} GiB "
            f"(budget {budget_bytes / 2**30:.2f} GiB); use the merge variant with a "
            f"smaller max_fsps to reduce the joint tensor size"
        )


class FingerprintMismatch(RuntimeFailure):
    """A stored tensor bundle does not match the current network/FSP setup."""


class IntractableError(ConfigError):
    """Exhaustive lattice product exceeds the tractability cap."""

    def __init__(self, count: int, cap: int):
        self.count = count
        self.cap = cap
        super().__init__(
            f"exhaustive lattice has {count} combinations, above the cap of {cap}; "
            f"raise the cap explicitly or use the Monte-Carlo estimator"
        )
