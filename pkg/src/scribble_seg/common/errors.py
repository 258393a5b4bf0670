"""Exception types shared by all scribble_seg modules."""

from __future__ import annotations


class ScribbleSegError(Exception):
    """Base class for all errors raised by scribble_seg."""


class FormatError(ScribbleSegError, ValueError):
    """An on-disk file is missing, unreadable, or has a malformed header."""

    def __init__(self, path, message: str):
        self.path = str(path)
        super().__init__(f"{self.path}: {message}")


class ValidationError(ScribbleSegError, ValueError):
    """An input violates a shape, range, or label-value precondition."""


class ConfigError(ValidationError):
    """A configuration key or value is invalid."""


class NumericalError(ScribbleSegError, ArithmeticError):
    """A loss or gradient became non-finite."""

    def __init__(self, message: str, iteration: int | None = None, tensor: str | None = None):
        self.iteration = iteration
        self.tensor = tensor
        context = []
        if iteration is not None:
            context.append(f"iteration {iteration}")
        if tensor is not None:
            context.append(f"tensor {tensor}")
        if context:
            message = f"{message} ({', '.join(context)})"
        super().__init__(message)
