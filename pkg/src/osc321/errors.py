"""Exception hierarchy shared by every module of the package."""


class Osc321Error(Exception):
    """Base class for all package errors."""


class ChannelError(Osc321Error, ValueError):
    pass


class NegativeRate(ChannelError):
    pass


class NoStabilizingLoss(ChannelError):
    pass


class InvalidRates(ChannelError):
    pass


class TruncationUnsafe(Osc321Error):
    """The steady state carries non-negligible weight at the Fock cutoff."""

    def __init__(self, message, tail_mass=None):
        super().__init__(message)
        self.tail_mass = tail_mass


class NullSpaceDegenerate(Osc321Error):
    pass


class DimensionTooLarge(Osc321Error):
    pass


class EigNotConverged(Osc321Error):
    pass


class LinearSolveSingular(Osc321Error):
    pass


class StateEscapedTruncation(Osc321Error):
    pass


class NotBimodal(Osc321Error):
    pass


class NegativeDensity(Osc321Error):
    pass


class GridTooSmall(Osc321Error):
    pass


class ColumnMissing(Osc321Error, KeyError):
    pass


class ConfigInvalid(Osc321Error, ValueError):
    pass


class PartialFailure(Osc321Error):
    pass


class DegenerateGap(Osc321Error):
    pass
