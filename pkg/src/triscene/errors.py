"""Exception types shared across the engine.

Each error class carries the exit code the CLI reports when it escapes
to the top level. Messages should name the module and the scene/file id
involved so failures can be traced without a debugger.
"""


class TrisceneError(Exception):
    exit_code = 1


class ConfigError(TrisceneError):
    """Invalid configuration, wiring, or precondition on parameters."""

    exit_code = 2


class DataError(TrisceneError):
    """Broken or inconsistent dataset, bundle, or scene payloads."""

    exit_code = 3


class NumericError(TrisceneError):
    """Training or scoring produced non-finite numbers."""

    exit_code = 4
