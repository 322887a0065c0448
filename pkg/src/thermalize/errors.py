"""Exception types raised across the package."""


class ThermalizeError(Exception):
    """Base class for every error raised by this package."""


class NumericError(ThermalizeError):
    """A numerical routine could not produce a trustworthy result."""


class NotHermitian(NumericError, ValueError):
    pass


class NoConvergence(NumericError):
    pass


class DomainError(NumericError, ValueError):
    pass


class NormalizationError(ThermalizeError, ValueError):
    pass


class InvalidDensityMatrix(ThermalizeError, ValueError):
    pass


class DimMismatch(ThermalizeError, ValueError):
    pass


class InfiniteTemperature(NumericError, ValueError):
    pass


class ZeroTemperature(NumericError, ValueError):
    pass


class UnphysicalCalibration(ThermalizeError, ValueError):
    pass


class StepTooLarge(NumericError, ValueError):
    pass


class GridMismatch(ThermalizeError, ValueError):
    pass


class WeightMismatch(ThermalizeError, ValueError):
    pass


class SupportViolation(NumericError, ValueError):
    pass


class NoDetailedBalance(NumericError, ValueError):
    pass


class DegenerateLambda2(NumericError):
    pass


class Unreachable(NumericError, ValueError):
    pass


class MissingBasis(ThermalizeError, ValueError):
    pass


class WrongBasis(ThermalizeError, ValueError):
    pass


class EmptyExperiment(ThermalizeError, ValueError):
    pass


class InsufficientData(ThermalizeError, ValueError):
    pass


class SchemaError(ThermalizeError, ValueError):
    """Config or record failed validation; message carries the offending field."""
