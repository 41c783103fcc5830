"""Exception hierarchy.

Errors deriving from :class:`InputError` signal malformed or inconsistent
inputs (CLI exit code 2); :class:`AnalysisError` subclasses signal that a
statistical step could not be carried out on otherwise valid inputs.
"""


class RCAError(Exception):
    """Base class for every error raised by this package."""


class InputError(RCAError, ValueError):
    pass


class AnalysisError(RCAError):
    pass


# graph
class CyclicGraph(InputError):
    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__("directed cycle among distinct vertices: " + " -> ".join(map(str, self.cycle)))


class UnknownVertex(InputError, KeyError):
    def __init__(self, vertex, where="graph"):
        self.vertex = vertex
        super().__init__(f"unknown vertex {vertex!r} (not declared in {where})")

    def __str__(self):
        return self.args[0]


class LagOutOfRange(InputError):
    pass


class NoSuchEdge(InputError):
    pass


class OverlappingSets(InputError):
    pass


# anomaly / data ingestion
class InvalidEpisode(InputError):
    pass


class MissingVertex(InputError):
    def __init__(self, vertex, where="dataset"):
        self.vertex = vertex
        super().__init__(f"vertex {vertex!r} has no column in the {where}")


class RaggedRows(InputError):
    pass


class NonNumericCell(InputError):
    def __init__(self, row, column, value):
        self.row, self.column, self.value = row, column, value
        super().__init__(f"non-numeric cell {value!r} at row {row}, column {column!r}")


class DuplicateColumn(InputError):
    pass


# estimation
class InsufficientSamples(AnalysisError):
    pass


class RankDeficient(AnalysisError):
    pass


class ChunkingImpossible(AnalysisError):
    pass


class LagExceedsMax(AnalysisError):
    pass


# simulation
class GenerationFailed(RCAError):
    pass


class WindowOutOfRange(RCAError, ValueError):
    pass


class NoParents(RCAError, ValueError):
    pass
