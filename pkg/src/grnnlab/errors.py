"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2,
NumericalError -> 3.
"""


class ParameterError(ValueError):
    """An argument is outside its documented domain (bad interval, rate, ...)."""


class StructuralError(ValueError):
    """Shapes, node ids, caches or tape records are inconsistent."""


class ConfigError(ValueError):
    """An experiment configuration is invalid (unknown key, bad domain)."""


class DataError(ValueError):
    """A dataset violates its contract (bad row, decreasing timestamps)."""


class IngestionError(DataError):
    """A malformed input row; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class NumericalError(ArithmeticError):
    """A non-finite value appeared where the math guarantees finiteness."""
