"""Exception hierarchy shared by every stage of the pipeline."""


class DuskfcmError(ValueError):
    """Base class for all errors raised by this package."""


# dataio
class MissingImagesDir(DuskfcmError):
    pass


class EmptyDataset(DuskfcmError):
    pass


class BadLevelCount(DuskfcmError):
    pass


class DecodeError(DuskfcmError):
    pass


class DimensionMismatch(DuskfcmError):
    pass


# texture / color
class OffsetTooLarge(DuskfcmError):
    pass


class WindowLargerThanImage(DuskfcmError):
    pass


class BadWindow(DuskfcmError):
    pass


class BadBinCount(DuskfcmError):
    pass


class EmptyList(DuskfcmError):
    pass


# features
class SingleClassLabels(DuskfcmError):
    pass


# clustering
class TooFewPoints(DuskfcmError):
    pass


class NotAnImageGrid(DuskfcmError):
    pass


class EmptyClusters(DuskfcmError):
    pass


class BadConfig(DuskfcmError):
    pass


# refine
class EmptySeeds(DuskfcmError):
    pass


# metrics
class NoPositives(DuskfcmError):
    pass


class NoPredictedPositives(DuskfcmError):
    pass


class NoNegatives(DuskfcmError):
    pass


class UndefinedF1(DuskfcmError):
    pass


class BothMasksEmpty(DuskfcmError):
    pass


# cli
class BadMethodList(DuskfcmError):
    pass
