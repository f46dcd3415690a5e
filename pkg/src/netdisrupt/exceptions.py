class NetworkValidationError(ValueError):
    """Input network, file, or configuration failed validation."""


class NumericalError(RuntimeError):
    """An eigensolver or other numerical routine failed."""
