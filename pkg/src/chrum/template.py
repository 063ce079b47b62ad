"""Parse annotated workflow templates into passthrough text and typed blocks.

A block spans from a ``# BEG:KIND attrs...`` line to the matching
``# END:KIND`` line.  Everything outside blocks is passthrough text and is
kept verbatim, so joining :attr:`TemplateDocument.segments` back together
reproduces the (newline-normalized) input exactly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Union

from .errors import (
    BadAttributes,
    NestedBlock,
    UnexpectedEnd,
    UnknownBlockKind,
    UnterminatedBlock,
)

ACTION = "ACTION"
REPLACE = "REPLACE"
FORK_MERGE = "FORK_MERGE"
BLOCK_KINDS = (ACTION, REPLACE, FORK_MERGE)

REQUIRED_ATTRIBUTES = {
    ACTION: ("name", "ok", "error"),
    FORK_MERGE: ("name", "node_after_join", "error"),
}

PLACEHOLDER_RE = re.compile(r"@([A-Za-z0-9_-]+)@")
_FULL_PLACEHOLDER_RE = re.compile(r"@[A-Za-z0-9_-]+@\Z")
_MARKER_RE = re.compile(r"#\s*(BEG|END):(\S*)(.*)\Z")


def normalize_newlines(text: str) -> str:
    return text.replace("\r\n", "\n").replace("\r", "\n")


@dataclass(frozen=True)
class Passthrough:
    text: str

    @property
    def raw(self) -> str:
        return self.text


@dataclass(frozen=True)
class Block:
    kind: str
    attributes: dict[str, str]
    body: tuple[str, ...]
    span: tuple[int, int]
    raw: str = field(repr=False)

    @property
    def name(self) -> str:
        """Node name for ACTION/FORK_MERGE, placeholder identifier for REPLACE."""
        value = self.attributes["name"]
        if self.kind == REPLACE:
            return value.strip("@")
        return value

    @property
    def body_start(self) -> int:
        """1-based source line of the first body line."""
        return self.span[0] + 1


Segment = Union[Passthrough, Block]


@dataclass(frozen=True)
class TemplateDocument:
    segments: tuple[Segment, ...]
    source_name: str = "<template>"

    @property
    def blocks(self) -> list[Block]:
        return [s for s in self.segments if isinstance(s, Block)]

    def serialize(self) -> str:
        return "".join(s.raw for s in self.segments)


def _parse_marker(line: str) -> tuple[str, str, str] | None:
    match = _MARKER_RE.match(line.strip())
    if match is None:
        return None
    return match.group(1), match.group(2), match.group(3)


def _parse_attributes(kind: str, rest: str, line: int, source: str) -> dict[str, str]:
    tokens = rest.split()
    if kind == REPLACE:
        if len(tokens) != 1 or not _FULL_PLACEHOLDER_RE.match(tokens[0]):
            raise BadAttributes(kind, line, "expected exactly one @NAME@ placeholder", source)
        return {"name": tokens[0]}

    attributes: dict[str, str] = {}
    for token in tokens:
        key, sep, value = token.partition("=")
        if not sep or not key or not value:
            raise BadAttributes(kind, line, f"malformed token {token!r}", source)
        if key in attributes:
            raise BadAttributes(kind, line, f"repeated attribute {key!r}", source)
        attributes[key] = value
    required = REQUIRED_ATTRIBUTES[kind]
    if set(attributes) != set(required):
        missing = [k for k in required if k not in attributes]
        extra = [k for k in attributes if k not in required]
        parts = []
        if missing:
            parts.append("missing " + ", ".join(missing))
        if extra:
            parts.append("unexpected " + ", ".join(extra))
        raise BadAttributes(kind, line, "; ".join(parts), source)
    return attributes


def parse_template(source_text: str, source_name: str = "<template>") -> TemplateDocument:
    text = normalize_newlines(source_text)
    lines = text.splitlines(keepends=True)

    segments: list[Segment] = []
    passthrough: list[str] = []
    open_block: dict | None = None

    for lineno, line in enumerate(lines, start=1):
        marker = _parse_marker(line)

        if open_block is None:
            if marker is None:
                passthrough.append(line)
                continue
            which, kind, rest = marker
            if which == "END":
                raise UnexpectedEnd(kind, lineno, source_name)
            if kind not in BLOCK_KINDS:
                raise UnknownBlockKind(kind, lineno, source_name)
            if passthrough:
                segments.append(Passthrough("".join(passthrough)))
                passthrough = []
            open_block = {
                "kind": kind,
                "attributes": _parse_attributes(kind, rest, lineno, source_name),
                "start": lineno,
                "raw": [line],
                "body": [],
            }
            continue

        open_block["raw"].append(line)
        if marker is None:
            open_block["body"].append(line.rstrip("\n"))
            continue
        which, kind, rest = marker
        if which == "BEG":
            raise NestedBlock(lineno, open_block["kind"], source_name)
        if kind != open_block["kind"]:
            raise UnexpectedEnd(kind, lineno, source_name)
        if rest.strip():
            raise BadAttributes(kind, lineno, "END marker takes no attributes", source_name)
        segments.append(
            Block(
                kind=kind,
                attributes=open_block["attributes"],
                body=tuple(open_block["body"]),
                span=(open_block["start"], lineno),
                raw="".join(open_block["raw"]),
            )
        )
        open_block = None

    if open_block is not None:
        raise UnterminatedBlock(open_block["kind"], open_block["start"], source_name)
    if passthrough:
        segments.append(Passthrough("".join(passthrough)))
    return TemplateDocument(tuple(segments), source_name)
