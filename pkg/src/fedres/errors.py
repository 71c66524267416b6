"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes (config error -> 1, IO error -> 2,
invariant breach -> 3); library code raises them directly.
"""


class ConfigError(ValueError):
    """A run configuration is inconsistent or out of the supported range."""


class InvariantError(RuntimeError):
    """A runtime invariant was violated (determinism guards, missing state)."""
