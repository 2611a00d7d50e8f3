"""Diagnostics raised by the parser, the type checkers, interop and the evaluator.

Every error class has a stable code; the CLI prints ``E0NN Name: message``.
"""

from __future__ import annotations

from typing import Optional


class ULError(Exception):
    """Base class of every language-level diagnostic."""

    code = "E000"
    explanation = "A diagnostic from the ulang toolchain."

    def __init__(self, message: str, where: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.where = where

    @property
    def name(self) -> str:
        return type(self).__name__

    def headline(self) -> str:
        return f"{self.code} {self.name}: {self.message}"

    def __str__(self) -> str:
        return self.headline()


class ParseError(ULError):
    code = "E001"
    explanation = "The source text does not match the grammar. Check the token at the reported position."

    def __init__(self, message: str, line: int, col: int, expected: frozenset = frozenset()):
        detail = f"{message} at {line}:{col}"
        if expected:
            detail += " (expected one of: " + ", ".join(sorted(expected)) + ")"
        super().__init__(detail)
        self.line = line
        self.col = col
        self.expected = frozenset(expected)


class UnboundName(ULError):
    code = "E002"
    explanation = "A name is used that no definition, binder or abbreviation introduces."


class UnboundVariable(ULError):
    code = "E003"
    explanation = "A variable is used outside the scope of its binder, or from the wrong language."


class TypeMismatch(ULError):
    code = "E004"
    explanation = "An expression has a different type than its position requires."

    def __init__(self, expected: str, found: str, where: Optional[str] = None):
        msg = f"expected {expected}, found {found}"
        super().__init__(msg, where)
        self.expected = expected
        self.found = found


class IllFormedType(ULError):
    code = "E005"
    explanation = "A type mentions a type variable that is not in scope or is otherwise malformed."


class NonValueUnderTypeAbstraction(ULError):
    code = "E006"
    explanation = "Only values may appear under a type abstraction."


class BoundaryTypeNotLumped(ULError):
    code = "E007"
    explanation = "Code crossing between U and L must have type !Lump(T) at the boundary."


class NonDuplicableLinearInScope(ULError):
    code = "E008"
    explanation = "A U term or boundary would duplicate a linear L variable. Consume it before crossing."


class SharedLinearVariable(ULError):
    code = "E009"
    explanation = "A linear variable is used by both halves of an expression."


class LinearVariableUnused(ULError):
    code = "E010"
    explanation = "Every linear variable must be used exactly once. Consume it (for example free or unbox it) on every path."


class LinearVariableReused(ULError):
    code = "E011"
    explanation = "A linear variable may be used only once. Thread the value through instead of using it twice."


class BranchUsageMismatch(ULError):
    code = "E012"
    explanation = "Both branches of a case must consume the same linear variables and locations."


class ShareCapturesLinear(ULError):
    code = "E013"
    explanation = "share makes a value duplicable, so its body may not mention linear variables."


class CopyOfNonBang(ULError):
    code = "E014"
    explanation = "copy only applies to expressions of a !-type."


class LocationUnused(ULError):
    code = "E015"
    explanation = "A store cell is never referenced by the expression that owns the store."


class LocationReused(ULError):
    code = "E016"
    explanation = "A location is referenced more than once, so the cell would be aliased."


class StoreMismatch(ULError):
    code = "E017"
    explanation = "The store and the expression disagree about which cells exist."


class DeadLocationHoldsValue(ULError):
    code = "E018"
    explanation = "A cell that the typing marks as freed still holds a value."


class AliveLocationEmpty(ULError):
    code = "E019"
    explanation = "A cell that the typing expects to hold a value is empty."


class LinearInStoredValue(ULError):
    code = "E020"
    explanation = "A value stored in a cell refers to a linear variable."


class NotInImage(ULError):
    code = "E021"
    explanation = "The L type has no compatible U type, so values of it cannot cross the boundary."


class ShapeMismatch(ULError):
    code = "E022"
    explanation = "A value does not have the shape its conversion type describes."


class NotTypable(ULError):
    code = "E023"
    explanation = "No store typing makes this configuration well typed."


class Uninhabited(ULError):
    code = "E024"
    explanation = "The generator could not build a value of the requested type."


class StuckError(ULError):
    code = "E025"
    explanation = "Evaluation reached a state where no reduction rule applies."


ALL_ERRORS = [
    ParseError, UnboundName, UnboundVariable, TypeMismatch, IllFormedType,
    NonValueUnderTypeAbstraction, BoundaryTypeNotLumped, NonDuplicableLinearInScope,
    SharedLinearVariable, LinearVariableUnused, LinearVariableReused, BranchUsageMismatch,
    ShareCapturesLinear, CopyOfNonBang, LocationUnused, LocationReused, StoreMismatch,
    DeadLocationHoldsValue, AliveLocationEmpty, LinearInStoredValue, NotInImage,
    ShapeMismatch, NotTypable, Uninhabited, StuckError,
]

BY_CODE = {cls.code: cls for cls in ALL_ERRORS}
