"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class ConfigurationError(ValueError):
    """A configuration value is invalid or inconsistent."""


class ContractError(ValueError):
    """A caller violated an operation's precondition."""


class NumericError(ArithmeticError):
    """A numeric failure (NaN/Inf propagation, diverging loss)."""


class DataError(ValueError):
    """Dataset or artifact files are missing, malformed, or mismatched."""
