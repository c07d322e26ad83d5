"""Exception hierarchy shared across the package."""


class FerryFuelError(Exception):
    """Base class for all package errors."""


# telemetry
class MissingColumn(FerryFuelError):
    pass


class EmptyFile(FerryFuelError):
    pass


class UnknownColumn(FerryFuelError):
    pass


class AllMissingColumn(FerryFuelError):
    pass


# features
class DegenerateDistance(FerryFuelError):
    pass


class MissingSourceColumn(FerryFuelError):
    pass


class EmptySelection(FerryFuelError):
    pass


# cluster
class TooManyComponents(FerryFuelError):
    pass


class KTooLarge(FerryFuelError):
    pass


class LengthMismatch(FerryFuelError, ValueError):
    pass


# preprocess
class TooFewValues(FerryFuelError):
    pass


class TooFewRows(FerryFuelError):
    pass


class EmptyCluster(FerryFuelError):
    pass


# models
class DimensionMismatch(FerryFuelError, ValueError):
    pass


class NonFiniteLoss(FerryFuelError, FloatingPointError):
    pass


class DegenerateRound(FerryFuelError):
    pass


# evaluate
class EmptyInput(FerryFuelError, ValueError):
    pass


class ConstantTarget(FerryFuelError, ValueError):
    pass


class TripTooShort(FerryFuelError):
    pass


class UnsupportedModel(FerryFuelError):
    pass


# cli
class SchemaMismatch(FerryFuelError):
    pass
