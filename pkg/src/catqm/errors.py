"""Exception hierarchy shared by every layer of the package."""

from __future__ import annotations


class CatQMError(Exception):
    """Base class. ``pos`` is an optional ``(line, col)`` source position."""

    def __init__(self, message: str, pos: tuple[int, int] | None = None, decl: str | None = None):
        super().__init__(message)
        self.message = message
        self.pos = pos
        self.decl = decl

    def __str__(self) -> str:
        where = []
        if self.pos is not None:
            where.append("line {}, col {}".format(*self.pos))
        if self.decl is not None:
            where.append("in '{}'".format(self.decl))
        prefix = type(self).__name__
        if where:
            return "{} ({}): {}".format(prefix, ", ".join(where), self.message)
        return "{}: {}".format(prefix, self.message)


# static semantics
class TypeMismatch(CatQMError):
    def __init__(self, message, expected=None, found=None, **kw):
        super().__init__(message, **kw)
        self.expected = expected
        self.found = found


class ArityError(CatQMError):
    pass


class InvalidInverse(CatQMError):
    pass


class IndexOutOfRange(CatQMError):
    pass


# evaluation
class MissingPrimitive(CatQMError):
    pass


class DimensionMismatch(CatQMError):
    pass


class ShapeMismatch(CatQMError):
    pass


class LiteralError(CatQMError):
    """A scalar literal the chosen backend cannot represent."""


# flow tracing
class FlowError(CatQMError):
    """Malformed network."""


class PathStuck(FlowError):
    pass


class PathMismatch(FlowError):
    pass


class OrientationConflict(FlowError):
    pass


# measurement
class NotNormalized(CatQMError):
    def __init__(self, message, norm=None, **kw):
        super().__init__(message, **kw)
        self.norm = norm


class WrongDimension(CatQMError):
    pass


class NotUnitary(CatQMError):
    pass


# front end
class ParseError(CatQMError):
    def __init__(self, message, pos=None, expected=None, **kw):
        super().__init__(message, pos=pos, **kw)
        self.expected = expected


class DuplicateIdentifier(CatQMError):
    pass


class UnknownIdentifier(CatQMError):
    pass
