"""
Error handling utilities for experiment runs.
"""

from functools import wraps
from typing import Any, Callable, Dict, TypeVar

from percolab.exceptions import ExperimentError, PercolabException
from percolab.utils.logger import get_logger

logger = get_logger(__name__)

F = TypeVar("F", bound=Callable[..., Any])


def format_error(error: Exception, operation: str) -> Dict[str, Any]:
    """
    Format errors into a consistent structure for logging.

    Args:
        error: The exception that occurred
        operation: The operation that was being performed

    Returns:
        Dictionary with formatted error information
    """
    return {
        "error_type": type(error).__name__,
        "error_code": getattr(error, "error_code", None),
        "error_message": str(error),
        "operation": operation,
        "details": getattr(error, "details", {}),
    }


def handle_experiment_errors(operation_name: str) -> Callable[[F], F]:
    """
    Decorator to turn unexpected failures into ExperimentError with a logged record.

    Laboratory exceptions pass through unchanged so their exit codes survive.

    Args:
        operation_name: Name of the operation for error logging
    """

    def decorator(func: F) -> F:
        @wraps(func)
        def wrapper(*args: Any, **kwargs: Any) -> Any:
            try:
                return func(*args, **kwargs)
            except PercolabException:
                raise
            except Exception as e:
                logger.exception(
                    f"Unexpected error in {operation_name}",
                    **format_error(e, operation_name),
                )
                raise ExperimentError(
                    f"Failed to {operation_name}: {str(e)}", operation=operation_name
                ) from e

        return wrapper  # type: ignore[return-value]

    return decorator
