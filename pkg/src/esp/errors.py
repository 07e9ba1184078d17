"""Error types and validation diagnostics shared across the engine."""

from __future__ import annotations

from dataclasses import dataclass, field


class EspError(Exception):
    """Base class for all engine errors."""

    code = "error"

    def __init__(self, message: str, refs: list[str] | None = None):
        super().__init__(message)
        self.message = message
        self.refs = refs or []

    def to_dict(self, stage: str | None = None) -> dict:
        return {
            "code": self.code,
            "stage": stage,
            "message": self.message,
            "refs": self.refs,
        }


class KbParseError(EspError):
    """KB or model document is syntactically invalid. Carries line/column."""

    code = "parse-error"

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        loc = f" at line {line}, column {column}" if line is not None else ""
        super().__init__(message + loc)
        self.line = line
        self.column = column


class DanglingReferenceError(EspError):
    """A document references an id that is not declared."""

    code = "dangling-reference"


class RangeError(EspError):
    """A value lies outside its declared range."""

    code = "range-error"


class AnnotationError(EspError):
    """Source annotation grammar violation. Carries file/line."""

    code = "annotation-error"

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        loc = f" ({path}:{line})" if path is not None else ""
        super().__init__(message + loc)
        self.path = path
        self.line = line


class StageError(EspError):
    """A pipeline stage failed; names the stage."""

    code = "stage-error"

    def __init__(self, stage: str, message: str, refs: list[str] | None = None):
        super().__init__(message, refs)
        self.stage = stage


class TranslationError(EspError):
    """Hiding assignment cannot be turned into a valid solution (model bug guard)."""

    code = "translation-error"


class InfeasibleModelError(EspError):
    """Hiding model is infeasible before the search starts."""

    code = "infeasible-model"


class UnknownSolutionError(EspError):
    code = "unknown-solution"


@dataclass(frozen=True)
class Diagnostic:
    """One validation finding. ``severity`` is ``error`` or ``warning``."""

    severity: str
    entity: str
    message: str

    def to_dict(self) -> dict:
        return {"severity": self.severity, "entity": self.entity, "message": self.message}


def errors_in(diagnostics: list[Diagnostic]) -> list[Diagnostic]:
    return [d for d in diagnostics if d.severity == "error"]


@dataclass
class DiagnosticSink:
    """Collects diagnostics while walking a document."""

    items: list[Diagnostic] = field(default_factory=list)

    def error(self, entity: str, message: str) -> None:
        self.items.append(Diagnostic("error", entity, message))

    def warning(self, entity: str, message: str) -> None:
        self.items.append(Diagnostic("warning", entity, message))
