"""Exception and warning types raised across the pipeline."""


class IrisError(Exception):
    """Base class for all pipeline errors."""


# image IO / imaging
class UnsupportedFormat(IrisError):
    pass


class CorruptData(IrisError):
    pass


class ImageTooSmall(IrisError):
    pass


# segmentation / normalization
class SegmentationError(IrisError):
    pass


class NoPupilFound(SegmentationError):
    pass


class NoIrisFound(SegmentationError):
    pass


class InsufficientCoverage(IrisError):
    pass


# features
class EmptyInput(IrisError):
    pass


class NoValidPairs(IrisError):
    pass


# learning
class DimensionMismatch(IrisError, ValueError):
    pass


class NumericalDivergence(IrisError):
    def __init__(self, epoch, message=None):
        self.epoch = epoch
        super().__init__(message or f"loss became non-finite at epoch {epoch}")


# analysis
class TooFewSamples(IrisError):
    pass


class DegenerateClass(IrisError):
    pass


# pipeline / persistence
class ConfigError(IrisError):
    pass


class EmptyDataset(IrisError):
    pass


class CorruptBundle(IrisError):
    pass


class VersionMismatch(IrisError):
    pass


class RankDeficientWarning(UserWarning):
    pass


class NonConvergenceWarning(UserWarning):
    pass
