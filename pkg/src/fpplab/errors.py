"""Exception types shared across the laboratory."""


class FppError(Exception):
    """Base class for all package-specific errors."""


class InvalidRegionError(FppError, ValueError):
    """Raised for degenerate or too-small sampling regions."""


class EmptySampleError(FppError, ValueError):
    """Raised when an operation needs at least one sample point."""


class OracleSizeError(FppError, ValueError):
    """Raised when the brute-force oracle is asked for an instance above its bound."""


class UnitMismatchError(FppError, ValueError):
    """Raised when merging statistics accumulated in different units."""


class GateError(FppError, ValueError):
    """Raised when a parameter gate required for an assertion does not hold."""


class CampaignError(FppError, RuntimeError):
    """Raised when a Monte Carlo campaign exceeds its failure budget."""


class ConfigError(FppError, ValueError):
    """Raised for invalid experiment configurations."""
