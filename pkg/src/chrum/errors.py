"""Exception hierarchy with source locations for compiler diagnostics."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Location:
    source: str
    line: int
    column: int = 0
    block: str | None = None

    def __str__(self) -> str:
        if not self.line:
            return self.source
        where = f"{self.source}:{self.line}"
        if self.column:
            where += f":{self.column}"
        return where


class ChrumError(Exception):
    """Base class for every error raised by this package."""

    def __init__(self, message: str, location: Location | None = None) -> None:
        super().__init__(message)
        self.message = message
        self.location = location

    def __str__(self) -> str:
        if self.location is None:
            return self.message
        text = f"{self.location}: {self.message}"
        if self.location.block:
            text += f" (in block {self.location.block})"
        return text


# -- template / macro errors (CLI exit status 2) -------------------------------


class TemplateError(ChrumError):
    pass


class UnterminatedBlock(TemplateError):
    def __init__(self, kind: str, start_line: int, source: str = "<template>") -> None:
        super().__init__(
            f"BEG:{kind} has no matching END:{kind}", Location(source, start_line, 1)
        )
        self.kind = kind
        self.start_line = start_line


class UnexpectedEnd(TemplateError):
    def __init__(self, kind: str, line: int, source: str = "<template>") -> None:
        super().__init__(f"END:{kind} without an open {kind} block", Location(source, line, 1))
        self.kind = kind
        self.line = line


class NestedBlock(TemplateError):
    def __init__(self, line: int, outer: str, source: str = "<template>") -> None:
        super().__init__(
            f"block markers do not nest; BEG found inside open {outer} block",
            Location(source, line, 1),
        )
        self.line = line


class UnknownBlockKind(TemplateError):
    def __init__(self, kind: str, line: int, source: str = "<template>") -> None:
        super().__init__(f"unknown block kind {kind!r}", Location(source, line, 1))
        self.kind = kind
        self.line = line


class BadAttributes(TemplateError):
    def __init__(self, kind: str, line: int, detail: str, source: str = "<template>") -> None:
        super().__init__(f"bad {kind} attributes: {detail}", Location(source, line, 1))
        self.kind = kind
        self.line = line


class DuplicateReplace(TemplateError):
    def __init__(self, name: str, line1: int, line2: int, source: str = "<template>") -> None:
        super().__init__(
            f"@{name}@ defined twice (first at line {line1})", Location(source, line2, 1)
        )
        self.name = name
        self.line1 = line1
        self.line2 = line2


class SubstitutionCycle(TemplateError):
    def __init__(self, path: list[str], location: Location | None = None) -> None:
        chain = " -> ".join(f"@{name}@" for name in path)
        super().__init__(f"substitution cycle: {chain}", location)
        self.path = path


class UnknownPlaceholder(TemplateError):
    def __init__(self, name: str, location: Location | None = None) -> None:
        super().__init__(f"unknown placeholder @{name}@", location)
        self.name = name


class IdiomError(TemplateError):
    pass


class UnknownIdiom(IdiomError):
    def __init__(self, name: str, location: Location | None = None) -> None:
        super().__init__(f"unknown idiom {name!r}", location)
        self.name = name


class UnresolvedPropertyInIdiom(IdiomError):
    def __init__(self, name: str, location: Location | None = None) -> None:
        super().__init__(f"idiom argument ${{{name}}} has no value in the properties", location)
        self.name = name


class NonIntegerIdiomArg(IdiomError):
    def __init__(self, token: str, location: Location | None = None) -> None:
        super().__init__(f"idiom argument {token!r} is not an integer", location)
        self.token = token


class BadIdiomCall(IdiomError):
    pass


class ZeroStep(IdiomError):
    def __init__(self) -> None:
        super().__init__("seq step must not be zero")


class EmptyRange(IdiomError):
    def __init__(self, start: int, stop: int, step: int) -> None:
        super().__init__(f"seq({start},{stop},{step}) produces no values")
        self.start, self.stop, self.step = start, stop, step


class BadAxis(TemplateError):
    pass


class XmlMalformed(TemplateError):
    def __init__(self, detail: str, location: Location | None = None) -> None:
        super().__init__(f"malformed XML: {detail}", location)
        self.detail = detail


class UnsupportedNode(TemplateError):
    pass


class InvalidWorkflow(TemplateError):
    def __init__(self, violations: list) -> None:
        super().__init__("workflow graph is invalid: " + "; ".join(str(v) for v in violations))
        self.violations = violations


# -- configuration / properties errors (CLI exit status 2) ---------------------


class ConfigError(ChrumError):
    pass


class MissingKey(ConfigError):
    def __init__(self, name: str, source: str = "<config>") -> None:
        super().__init__(f"missing required key {name!r}", Location(source, 0))
        self.name = name


class DuplicateKey(ConfigError):
    def __init__(self, name: str, line: int = 0, source: str = "<config>") -> None:
        super().__init__(f"duplicate key {name!r}", Location(source, line))
        self.name = name


class BadPort(ConfigError):
    def __init__(self, value: str, line: int = 0, source: str = "<config>") -> None:
        super().__init__(f"bad server port {value!r}", Location(source, line))
        self.value = value


class EmptyMulti(ConfigError):
    def __init__(self, name: str, line: int = 0, source: str = "<properties>") -> None:
        super().__init__(f"multivalued property @{name}@ has no values", Location(source, line))
        self.name = name


class KeyInBothForms(ConfigError):
    def __init__(self, name: str, line: int = 0, source: str = "<properties>") -> None:
        super().__init__(
            f"key {name!r} is declared both single- and multivalued", Location(source, line)
        )
        self.name = name


# -- runtime errors (CLI exit status 1) ----------------------------------------


class IoFailure(ChrumError):
    def __init__(self, path: object, detail: str) -> None:
        super().__init__(f"I/O failure on {path}: {detail}")
        self.path = path
        self.detail = detail


class SourceMissing(IoFailure):
    def __init__(self, folder: str, path: object) -> None:
        super().__init__(path, f"source for folder {folder!r} does not exist")
        self.folder = folder
