"""Exception hierarchy shared by every stage of the filter pipeline."""

from __future__ import annotations


class SffError(Exception):
    """Base class for all errors raised by this package."""


class StlSyntaxError(SffError, ValueError):
    """Raised when STL text does not conform to the grammar."""

    def __init__(self, message: str, position: int, expected: list[str] | None = None):
        self.position = position
        self.expected = list(expected or [])
        detail = f"{message} at position {position}"
        if self.expected:
            detail += f" (expected one of: {', '.join(self.expected)})"
        super().__init__(detail)


class UnknownPredicate(SffError, KeyError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(name)

    def __str__(self) -> str:
        return f"unknown predicate {self.name!r}"


class BadInterval(SffError, ValueError):
    pass


class HorizonExceeded(SffError):
    pass


class RegionUnresolved(SffError):
    pass


class DimensionMismatch(SffError, ValueError):
    pass


class ControlOutOfBounds(SffError, ValueError):
    pass


class CflViolation(SffError):
    pass


class GridTooCoarse(UserWarning):
    """Warning: a target region spans fewer than three grid nodes on some axis."""


class GridMismatch(SffError, ValueError):
    pass


class OutOfBounds(SffError, ValueError):
    pass


class UnsupportedNesting(SffError):
    pass


class NonlinearAtom(SffError):
    pass


class HorizonTooShort(SffError):
    pass


class Infeasible(SffError):
    pass


class IterationLimit(SffError):
    pass


class EncodingMismatch(SffError):
    pass


class AdapterUnavailable(SffError):
    pass


class TranslationTimeout(SffError):
    pass


class TranslationError(SffError):
    """Adapter output that could not be parsed or linked.

    The raw text is kept so an operator can inspect what the model produced.
    """

    def __init__(self, raw: str, diagnostics: list[str]):
        self.raw = raw
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics) or "translation failed")


class SchemaError(SffError, ValueError):
    def __init__(self, pointer: str, message: str):
        self.pointer = pointer
        super().__init__(f"{pointer or '/'}: {message}")


class ScenarioValidationError(SffError, ValueError):
    pass
