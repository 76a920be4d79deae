"""Exception types shared across the package."""


class FeatIQError(Exception):
    """Base class for data and validation failures (CLI exit code 2)."""


class ArchiveError(FeatIQError):
    """Feature archive is missing, malformed, or inconsistent."""


class ParseError(FeatIQError):
    """A dataset, report, or weights file could not be parsed."""


class FitError(FeatIQError):
    """Weight fitting could not proceed or diverged."""
