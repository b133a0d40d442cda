"""Exception types shared across the package."""


class KGCError(Exception):
    """Base class for all package errors."""


class TripleParseError(KGCError, ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class GenerationError(KGCError):
    """Candidate generation could not satisfy its constraints."""


class EnvStateError(KGCError, RuntimeError):
    """Environment used out of order (e.g. stepping a finished episode)."""


class CheckpointError(KGCError):
    """Malformed or inconsistent checkpoint file."""


class ReportError(KGCError):
    """A report was requested against a missing baseline."""


class ConfigError(KGCError, ValueError):
    """Invalid run configuration."""
