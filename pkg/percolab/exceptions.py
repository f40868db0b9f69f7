"""
Custom exceptions and error handling utilities for the percolab laboratory.
"""

from typing import Any, Dict, Optional


class PercolabException(Exception):
    """Base exception class for all percolab errors."""

    def __init__(
        self,
        message: str,
        exit_code: int = 1,
        details: Optional[Dict[str, Any]] = None,
        error_code: Optional[str] = None,
    ):
        self.message = message
        self.exit_code = exit_code
        self.details = details or {}
        self.error_code = error_code or self.__class__.__name__
        super().__init__(message)

    def __reduce__(self) -> Any:
        # Subclass signatures differ from Exception.args; pickle by attributes.
        return (
            _rebuild,
            (type(self), self.message, self.exit_code, self.details, self.error_code),
        )


def _rebuild(
    cls: type, message: str, exit_code: int, details: Dict[str, Any], error_code: str
) -> "PercolabException":
    error = cls.__new__(cls)
    PercolabException.__init__(error, message, exit_code, details, error_code)
    return error


class ValidationError(PercolabException):
    """Raised when an argument violates an operation's precondition."""

    def __init__(self, message: str, field: Optional[str] = None):
        details = {"field": field} if field else {}
        super().__init__(
            message, exit_code=2, details=details, error_code="VALIDATION_ERROR"
        )


class GeometryError(PercolabException):
    """Raised for lattice regions, edges or radii outside the supported geometry."""

    def __init__(self, message: str, **details: Any):
        super().__init__(
            message, exit_code=2, details=details, error_code="GEOMETRY_ERROR"
        )


class ConfigError(PercolabException):
    """Raised when an experiment configuration cannot be parsed or validated."""

    def __init__(
        self,
        message: str,
        path: Optional[str] = None,
        line: Optional[int] = None,
        field: Optional[str] = None,
    ):
        details: Dict[str, Any] = {}
        if path:
            details["path"] = path
        if line is not None:
            details["line"] = line
        if field:
            details["field"] = field
        super().__init__(
            message, exit_code=2, details=details, error_code="CONFIG_ERROR"
        )


class EstimationError(PercolabException):
    """Raised when a statistic is undefined for the given inputs."""

    def __init__(self, message: str, **details: Any):
        super().__init__(
            message, exit_code=3, details=details, error_code="ESTIMATION_ERROR"
        )


class UnresolvedEstimateError(PercolabException):
    """Raised when the replica budget cannot resolve an estimate."""

    def __init__(self, message: str = "Estimate unresolved", **details: Any):
        super().__init__(
            message, exit_code=3, details=details, error_code="UNRESOLVED_ESTIMATE"
        )


class RejectionLimitError(PercolabException):
    """Raised when a rejection sampler exhausts its attempt cap."""

    def __init__(self, message: str, attempts: int, radius: int):
        super().__init__(
            message,
            exit_code=3,
            details={"attempts": attempts, "radius": radius},
            error_code="REJECTION_LIMIT",
        )


class ReplicaError(PercolabException):
    """Raised when a single replica fails; aborts the whole replica plan."""

    def __init__(
        self,
        message: str,
        replica_index: int,
        seed: Optional[Dict[str, Any]] = None,
        original_error: Optional[str] = None,
    ):
        details: Dict[str, Any] = {"replica_index": replica_index}
        if seed:
            details["seed"] = seed
        if original_error:
            details["original_error"] = original_error
        super().__init__(
            message, exit_code=1, details=details, error_code="REPLICA_ERROR"
        )


class ExperimentError(PercolabException):
    """Raised when an experiment fails for an unexpected reason."""

    def __init__(
        self, message: str = "Experiment failed", operation: Optional[str] = None
    ):
        details = {"operation": operation} if operation else {}
        super().__init__(
            message, exit_code=1, details=details, error_code="EXPERIMENT_ERROR"
        )


class SoundnessError(PercolabException):
    """Raised when an internal correctness check fails.

    A soundness failure falsifies the implementation, never the mathematics: for
    example a certificate-holding field on which the invasion misses an annulus edge.
    """

    def __init__(self, message: str, **details: Any):
        super().__init__(
            message, exit_code=4, details=details, error_code="SOUNDNESS_ERROR"
        )
