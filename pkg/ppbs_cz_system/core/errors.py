"""
errors.py
PURPOSE: Exception hierarchy shared by all modules, plus the CLI exit codes.

Everything derives from ValueError (or OSError for file problems) so code
that only knows about ValueError still catches domain failures.
"""


class DomainError(ValueError):
    """A physical or shape precondition was violated."""


class ConfigError(ValueError):
    """An experiment config could not be parsed or is inconsistent."""


class NullPostselectionError(DomainError):
    """No amplitude survived post-selection where a state was required."""


class ResultIOError(OSError):
    """A result file could not be written or read."""

    def __init__(self, path, reason):
        self.path = str(path)
        super().__init__(f"{self.path}: {reason}")


EXIT_SUCCESS = 0
EXIT_CONFIG = 2
EXIT_DOMAIN = 3
EXIT_NULL_POSTSELECTION = 4
EXIT_IO = 5

# Most specific class first; exit_code_for() walks this in order.
EXIT_CODES = (
    (NullPostselectionError, EXIT_NULL_POSTSELECTION),
    (ConfigError, EXIT_CONFIG),
    (DomainError, EXIT_DOMAIN),
    (ResultIOError, EXIT_IO),
)


def exit_code_for(exc):
    """Map an exception instance to its CLI exit code (domain error if unknown)."""
    for cls, code in EXIT_CODES:
        if isinstance(exc, cls):
            return code
    if isinstance(exc, OSError):
        return EXIT_IO
    return EXIT_DOMAIN


def error_kind(exc):
    """Short lowercase label used in the one-line CLI diagnosis."""
    return {
        EXIT_NULL_POSTSELECTION: "null post-selection",
        EXIT_CONFIG: "config",
        EXIT_DOMAIN: "domain",
        EXIT_IO: "io",
    }[exit_code_for(exc)]
