"""Exception hierarchy shared by all normcite modules.

Two failure families matter to callers (and map to CLI exit codes):
input problems (bad files, bad parameters) and statistics that are
mathematically undefined on the given data.
"""


class NormciteError(Exception):
    """Base class for all errors raised by this package."""


class InputError(NormciteError):
    """Malformed input data or invalid configuration (CLI exit code 1)."""


class UndefinedStatisticError(NormciteError):
    """A requested statistic is undefined on the given data (CLI exit code 2)."""
