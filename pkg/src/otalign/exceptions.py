"""
Custom exception hierarchy for otalign.

Provides specific error types with helpful suggestions for common failures.
Each subclass also derives from the closest builtin so callers may catch
``ValueError`` / ``IndexError`` generically.
"""

from typing import Any, Optional, Sequence


class OTAlignError(Exception):
    """
    Base exception for all otalign errors.

    All custom exceptions inherit from this class.
    """

    def __init__(self, message: str, suggestion: Optional[str] = None):
        """
        Initialize exception.

        Args:
            message: Error message
            suggestion: Optional suggestion for fixing the error
        """
        super().__init__(message)
        self.suggestion = suggestion

    def __str__(self) -> str:
        """String representation with suggestion."""
        msg = super().__str__()
        if self.suggestion:
            msg += f"\nSuggestion: {self.suggestion}"
        return msg


# =============================================================================
# Numerical Errors
# =============================================================================

class DimensionError(OTAlignError, ValueError):
    """Shapes are empty or do not agree."""

    def __init__(self, what: str, expected: Any = None, got: Any = None):
        """
        Initialize with the offending quantity.

        Args:
            what: Name of the operand or operation
            expected: Expected shape/length (optional)
            got: Actual shape/length (optional)
        """
        self.what = what
        self.expected = expected
        self.got = got
        message = f"Dimension error in {what}"
        if expected is not None or got is not None:
            message += f": expected {expected}, got {got}"
        super().__init__(message, "Check the shapes of the matrices and measures passed in")


class DomainError(OTAlignError, ValueError):
    """A value lies outside the domain an operation accepts."""

    def __init__(self, what: str, value: Any, reason: str):
        """
        Initialize with field, value, and reason.

        Args:
            what: Name of the parameter
            value: Offending value
            reason: Why it is invalid
        """
        self.what = what
        self.value = value
        super().__init__(f"Invalid {what}: {value} ({reason})")


class UnsupportedMeasureError(OTAlignError, ValueError):
    """Measures cannot be scaled to integer supplies for the exact solver."""

    def __init__(self, weights: Sequence[float], limit: int):
        """Initialize with the measure weights and the scaling limit."""
        self.weights = list(weights)
        self.limit = limit
        preview = ", ".join(f"{w:.6g}" for w in self.weights[:5])
        message = f"Measure [{preview}{', ...' if len(self.weights) > 5 else ''}] is not k/L for any L <= {limit}"
        suggestion = "Use lp_ot for arbitrary real-valued measures"
        super().__init__(message, suggestion)


class UnsupportedProblemError(OTAlignError, ValueError):
    """Problem instance is outside what a solver supports."""

    def __init__(self, solver: str, reason: str):
        """Initialize with solver name and reason."""
        self.solver = solver
        super().__init__(f"{solver} cannot solve this instance: {reason}")


# =============================================================================
# Toy Distillation Errors
# =============================================================================

class TokenIndexError(OTAlignError, IndexError):
    """Token id or target index lies outside the vocabulary."""

    def __init__(self, index: int, size: int, where: str = "vocabulary"):
        """
        Initialize with index and bound.

        Args:
            index: Offending id
            size: Exclusive upper bound
            where: What the id indexes
        """
        self.index = index
        self.size = size
        super().__init__(f"Index {index} out of range for {where} of size {size}")


class EncodingError(OTAlignError, ValueError):
    """Text contains characters outside the tokenizer alphabet."""

    def __init__(self, text: str, position: int):
        """Initialize with the text and the first bad position."""
        self.text = text
        self.position = position
        char = text[position] if 0 <= position < len(text) else ""
        message = f"Cannot encode {char!r} at position {position} of {text[:40]!r}"
        suggestion = "Use lowercase a-z, space, and the <cot>/<sep> markers only"
        super().__init__(message, suggestion)


class DivergenceError(OTAlignError, ArithmeticError):
    """Training loss became NaN or infinite."""

    def __init__(self, step: int, value: float):
        """Initialize with step index and the bad loss value."""
        self.step = step
        self.value = value
        message = f"Training diverged at step {step} (total loss {value})"
        suggestion = "Lower the learning rate or the alignment weight alpha"
        super().__init__(message, suggestion)


# =============================================================================
# Configuration / Input Errors
# =============================================================================

class ConfigurationError(OTAlignError, ValueError):
    """Invalid configuration."""

    def __init__(self, parameter: str, reason: str):
        """
        Initialize with parameter and reason.

        Args:
            parameter: Configuration parameter name
            reason: Why it's invalid
        """
        self.parameter = parameter
        message = f"Invalid configuration for '{parameter}': {reason}"
        suggestion = "Check the config file, command-line flags, or OTALIGN_* environment variables"
        super().__init__(message, suggestion)


class InputFileError(OTAlignError, ValueError):
    """An input JSON file is malformed."""

    def __init__(self, path: str, field: str, reason: str):
        """
        Initialize with file path, offending field, and reason.

        Args:
            path: File path (or '<stdin>')
            field: Dotted path of the offending field
            reason: What is wrong with it
        """
        self.path = path
        self.field = field
        super().__init__(f"{path}: field '{field}' {reason}")


__all__ = [
    "OTAlignError",
    "DimensionError",
    "DomainError",
    "UnsupportedMeasureError",
    "UnsupportedProblemError",
    "TokenIndexError",
    "EncodingError",
    "DivergenceError",
    "ConfigurationError",
    "InputFileError",
]
