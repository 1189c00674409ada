"""Exception hierarchy shared across tradewinds."""


class TradewindsError(Exception):
    """Base class for all errors raised by tradewinds."""


class AllZeroWeights(TradewindsError):
    """Every store weight in some neighborhood row is zero."""


class NoObservations(TradewindsError):
    """No neighborhood has any observed visits."""


class KindMismatch(TradewindsError):
    """Two tensors of different model kinds or shapes were combined."""


class ZeroVariance(TradewindsError):
    """A correlation input is constant."""


class NonCalibratable(TradewindsError):
    """The objective is degenerate for every initial particle."""


class EmptyDistribution(TradewindsError):
    """A categorical distribution has no positive mass."""


class RankDeficient(TradewindsError):
    """The regression design matrix does not have full column rank."""


class InsufficientData(TradewindsError):
    """Too few observations for the requested fit."""


class DegenerateRange(TradewindsError):
    """Classification input has zero range."""


class IngestError(TradewindsError):
    """Base class for input file problems."""


class SchemaError(IngestError):
    """Missing, unexpected or duplicated columns or keys."""


class JoinError(IngestError):
    """A row references an id that does not exist."""


class ParseError(IngestError):
    """A value could not be parsed."""

    def __init__(self, path, line, message):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {message}")
