class ConfigError(ValueError):
    """Invalid scenario or command-line input (CLI exit code 2)."""


class NumericalFailure(ArithmeticError):
    """Positivity loss, non-finite values or non-convergence (CLI exit code 3)."""
