"""Exception hierarchy shared across the package."""


class FGWError(Exception):
    """Base class for all package errors."""


# graph_core
class GraphError(FGWError, ValueError):
    pass


class NonSquareError(GraphError):
    pass


class AsymmetricAdjacencyError(GraphError):
    pass


class NonBinaryEntryError(GraphError):
    pass


class RowCountMismatchError(GraphError):
    pass


class SizeMismatchError(GraphError):
    pass


class LabelOutOfRangeError(GraphError):
    pass


class NegativeTauError(GraphError):
    pass


class ParseError(FGWError, ValueError):
    pass


class SchemaVersionMismatchError(ParseError):
    pass


# numerical layers
class DimMismatchError(FGWError, ValueError):
    pass


class ShapeMismatchError(FGWError, ValueError):
    pass


class NonFiniteCostError(FGWError, ValueError):
    pass


class WeightError(FGWError, ValueError):
    pass


class NotPositiveDefiniteError(FGWError, ValueError):
    pass


class EmptyCandidateSetError(FGWError, ValueError):
    pass


class InsufficientTrainingDataError(FGWError, ValueError):
    pass


class OutOfRangeError(FGWError, ValueError):
    pass
