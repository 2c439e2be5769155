"""Custom exceptions for AGOP-TRIS."""

from __future__ import annotations

from typing import Optional


class BenchError(Exception):
    """Base class for every error raised by the benchmark (CLI exit code 1)."""


class DimensionError(BenchError):
    """Raised when tensor shapes disagree along a named axis."""

    def __init__(self, message: str, axis: Optional[str] = None) -> None:
        self.axis = axis
        if axis is not None:
            message = f"{message} (axis: {axis})"
        super().__init__(message)


class ParameterError(BenchError):
    """Raised for an out-of-range argument (k < 1, odd n, unknown scenario...)."""


class ContractError(BenchError):
    """Raised when a caller breaks an API contract (e.g. backward of a non-scalar)."""


class FormatError(BenchError):
    """Raised when a binary artifact is malformed. Carries the byte offset."""

    def __init__(self, message: str, offset: int = 0, path: Optional[str] = None) -> None:
        self.offset = offset
        self.path = path
        where = f"{path}: " if path else ""
        super().__init__(f"{where}{message} at byte {offset}")


class TruncationError(FormatError):
    """Raised when a file is shorter or longer than its header implies."""


class StateError(BenchError):
    """Raised when an object is used in the wrong lifecycle state (finalized hook)."""


class EmptyAccumulationError(BenchError):
    """Raised when finalizing a hook that never accumulated a sample."""


class DegeneratePriorError(BenchError):
    """Raised when an AGOP diagonal is all zero and cannot be normalised."""


class UndefinedMassError(BenchError):
    """Raised when a saliency map carries no mass (Energy-GT undefined)."""


class ConfigurationError(BenchError):
    """Raised when a run is missing an input it needs (e.g. AGOP method without diag)."""


class DivergedTrainingError(BenchError):
    """Raised when the training loss becomes non-finite."""

    def __init__(self, step: int) -> None:
        self.step = step
        super().__init__(f"training diverged (non-finite loss) at step {step}")


class HookError(BenchError):
    """Raised when the AGOP hook fails inside the training loop."""


class ManifestError(BenchError):
    """Raised when a consumed file does not match the hash pinned in the run manifest."""


class ReportParseError(BenchError):
    """Raised for a malformed report CSV. Carries the 1-based line number."""

    def __init__(self, message: str, line: int) -> None:
        self.line = line
        super().__init__(f"line {line}: {message}")
