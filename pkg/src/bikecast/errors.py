"""Exception hierarchy shared across the package."""


class BikecastError(Exception):
    """Base class for all package errors."""


# -- series ------------------------------------------------------------

class NonCommensurableResolution(BikecastError):
    pass


class AlignmentError(BikecastError):
    pass


class DuplicateChannel(BikecastError):
    pass


class EmptyRange(BikecastError):
    pass


class ChannelMismatch(BikecastError):
    pass


class EmptySubset(BikecastError):
    pass


class LoadExceedsCapacity(BikecastError):
    pass


# -- masks -------------------------------------------------------------

class OverlappingBins(BikecastError):
    pass


class MissingVariable(BikecastError):
    pass


class NoStations(BikecastError):
    pass


class EmptyTargetSet(BikecastError):
    pass


# -- segmentation ------------------------------------------------------

class WindowTooLarge(BikecastError):
    pass


class SeriesTooShort(BikecastError):
    pass


class InputTooShort(BikecastError):
    pass


class BadFractions(BikecastError):
    pass


class TooFewInstances(BikecastError):
    pass


# -- baselines ---------------------------------------------------------

class EmptySeries(BikecastError):
    pass


class LengthMismatch(BikecastError):
    pass


class EmptySet(BikecastError):
    pass


class KTooLarge(BikecastError):
    pass


class EmptyTrain(BikecastError):
    pass


class UnfittedState(BikecastError):
    pass


# -- recurrent ---------------------------------------------------------

class ShapeMismatch(BikecastError):
    pass


class NonFiniteInput(BikecastError):
    pass


class EmptySplit(BikecastError):
    pass


class DivergedLoss(BikecastError):
    pass


class EmptySpace(BikecastError):
    pass


# -- evaluation --------------------------------------------------------

class TooFewPairs(BikecastError):
    pass


class ZeroVariance(BikecastError):
    pass


class EmptyFolds(BikecastError):
    pass


# -- synthetic / pipeline ----------------------------------------------

class BadRange(BikecastError):
    pass


class ConfigError(BikecastError):
    pass


class ResolutionTooCoarse(BikecastError):
    pass
