"""Exception hierarchy shared by every tilespec module."""


class TilespecError(Exception):
    """Base class. ``exit_code`` is what the CLI returns when this escapes."""

    exit_code = 1


class RuleSyntaxError(TilespecError):
    exit_code = 2

    def __init__(self, line, col, expected, found=None):
        self.line = line
        self.col = col
        self.expected = expected
        self.found = found
        msg = f"line {line}, col {col}: expected {expected}"
        if found is not None:
            msg += f", found {found!r}"
        super().__init__(msg)


class RuleSemanticError(TilespecError):
    exit_code = 3


class UnknownSymbol(RuleSemanticError):
    def __init__(self, token, line=None):
        self.token = token
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"unknown symbol {token!r}{where}")


class DuplicateDefinition(RuleSemanticError):
    def __init__(self, token, line=None):
        self.token = token
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"duplicate definition of {token!r}{where}")


class AlphabetMismatch(RuleSemanticError):
    pass


class NotConstantLength(RuleSemanticError):
    pass


class LevelOverflow(TilespecError):
    pass


class LevelOutOfRange(TilespecError):
    pass


class PlacementCollision(TilespecError):
    pass


class PatchNotFound(TilespecError):
    pass


class NotIrreducible(TilespecError):
    pass


class NotPrimitive(TilespecError):
    pass


class NoConvergence(TilespecError):
    pass


class NotConverged(TilespecError):
    pass


class DepthTooShallow(TilespecError):
    pass


class NoFixedPoint(TilespecError):
    pass


class EmptyReturnSample(TilespecError):
    pass
