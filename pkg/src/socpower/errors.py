"""Exception types shared across the toolkit.

The split mirrors how failures surface to a caller: malformed input files,
semantically invalid or missing data, and runtime divergence of an iterative
computation. The command line maps these onto distinct exit codes.
"""


class SocPowerError(Exception):
    """Base class for all toolkit errors."""


class InputFormatError(SocPowerError):
    """A file or raw value could not be parsed (bad CSV row, bad JSON, bad hex)."""


class DomainError(SocPowerError, ValueError):
    """A numeric argument is outside its valid domain (non-positive, non-finite,
    out of range). The message names the offending parameter."""


class MissingDataError(SocPowerError):
    """Structurally valid input lacks required content (absent phase, missing
    corner row, empty window, unknown cluster)."""


class PairingError(SocPowerError):
    """Two measurements that must describe the same operating point do not
    (cluster or frequency mismatch, duplicate core)."""


class DivergenceError(SocPowerError):
    """An iterative computation produced a non-finite value. Carries the round
    index at which training diverged."""

    def __init__(self, message: str, round_index: int):
        super().__init__(message)
        self.round_index = round_index
