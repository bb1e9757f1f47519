"""Exception hierarchy shared across the package.

Every error raised on a bad input or a violated contract derives from
RadmaskError so callers (and the CLI) can catch one base class.
"""


class RadmaskError(Exception):
    """Base class for all package errors."""
