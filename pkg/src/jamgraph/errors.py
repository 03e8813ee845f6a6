"""Exception types raised by jamgraph."""


class JamGraphError(Exception):
    """Base class for all package errors."""


class ConstantColumn(JamGraphError, ValueError):
    def __init__(self, column, name=None):
        self.column = column
        label = f"{column}" if name is None else f"{column} ({name})"
        super().__init__(f"column {label} has zero sample variance")


class RankDeficient(JamGraphError, ValueError):
    def __init__(self, j=None, k=None, rank=None, r=None):
        self.j, self.k, self.rank, self.r = j, k, rank, r
        where = "" if k is None else f" for pair ({j}, {k})"
        super().__init__(f"basis matrix{where} has numerical rank {rank} < {r}")


class ShapeMismatch(JamGraphError, ValueError):
    pass


class NonFinite(JamGraphError, FloatingPointError):
    pass


class ZeroResidual(JamGraphError, ValueError):
    def __init__(self, node):
        self.node = node
        super().__init__(f"residual sum of squares is zero for node {node} (saturated fit)")


class TooManyEdges(JamGraphError, ValueError):
    pass


class DegenerateComponent(JamGraphError, ValueError):
    def __init__(self, parent, child):
        self.parent, self.child = parent, child
        super().__init__(f"realized component {parent}->{child} has (near) zero variance")


class DimensionMismatch(JamGraphError, ValueError):
    pass


class DataParseError(JamGraphError, ValueError):
    def __init__(self, path, row, column, message):
        self.path, self.row, self.column = path, row, column
        super().__init__(f"{path}: row {row}, column {column}: {message}")
