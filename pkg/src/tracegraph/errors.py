"""Exception types raised across the toolkit.

Everything derives from TracegraphError so callers (and the CLI) can map
failures to exit codes without enumerating modules.
"""

from __future__ import annotations


class TracegraphError(Exception):
    """Base class for all toolkit errors."""

    code = "error"


class ParseError(TracegraphError):
    """A file could not be parsed; carries the 1-based line number."""

    code = "parse"

    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class DimensionError(TracegraphError):
    """Vector dimensions disagree within one trace or operation."""

    code = "dimension"


class OrderError(TracegraphError):
    """Records were not supplied in the required (fid, oid_ts) order."""

    code = "order"


class ConfigError(TracegraphError):
    """Invalid or inconsistent parameters for an operation."""

    code = "config"


class UnsupportedFeatureError(ConfigError):
    """A parameter value that is accepted by the interface but not implemented."""

    code = "unsupported"


class QualityUndefinedError(TracegraphError):
    """Cluster quality is undefined (single cluster or all singletons)."""

    code = "quality"


class DataIntegrityError(TracegraphError):
    """Generated files disagree with each other (e.g. missing frame index)."""

    code = "integrity"


class DisjointnessError(TracegraphError):
    """Inputs that must be disjoint (component-wise) overlap."""

    code = "disjoint"


class ScenarioError(TracegraphError):
    """A synthetic scenario is internally inconsistent."""

    code = "scenario"


class NoObjectsError(TracegraphError):
    """An analysis that needs tracked objects got an empty trace."""

    code = "no-objects"
