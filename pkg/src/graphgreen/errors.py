"""Exception hierarchy shared by all modules."""


class GraphGreenError(Exception):
    """Base class for every error raised by the package."""


class GraphError(GraphGreenError, ValueError):
    """Invalid graph or domain input."""


class EdgeListParseError(GraphError):
    def __init__(self, lineno, message):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}")


class ResourceError(GraphGreenError):
    """A configured resource cap (vertex count, pole count) would be exceeded."""


class CensoredProfileError(GraphGreenError):
    """A ball query reaches past the radius where the truncation is exact."""


class SolverError(GraphGreenError):
    """Linear solve failed to reach the requested tolerance."""


class FlowError(GraphGreenError):
    """Unit-flow invariant violated (conservation, acyclicity, stuck walk)."""


class QuadratureError(GraphGreenError):
    pass
