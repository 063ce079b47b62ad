"""Placeholder substitution, idioms and block expansion.

REPLACE blocks define named text macros (``@NAME@``).  ACTION blocks expand
to a single Oozie action node; FORK_MERGE blocks expand to a fork, one
action per combination of their parameter axes, and a join.
"""

from __future__ import annotations

import itertools
import re
import textwrap
from collections.abc import Callable, Iterable, Mapping
from dataclasses import dataclass, field
from types import MappingProxyType

from .errors import (
    BadAxis,
    BadIdiomCall,
    DuplicateReplace,
    EmptyRange,
    Location,
    NonIntegerIdiomArg,
    SubstitutionCycle,
    UnknownIdiom,
    UnknownPlaceholder,
    UnresolvedPropertyInIdiom,
    ZeroStep,
)
from .properties import PropertySet
from .template import ACTION, FORK_MERGE, PLACEHOLDER_RE, REPLACE, Block, TemplateDocument

BUILTIN_SOURCE = "<builtin>"

BUILTINS: Mapping[str, tuple[str, ...]] = MappingProxyType(
    {
        "PIG_START": (
            "<pig><job-tracker>${jobTracker}</job-tracker><name-node>${nameNode}</name-node>",
        ),
        "PIG_END": ("</pig>",),
    }
)

_AXIS_LINE_RE = re.compile(r"\s*@([A-Za-z0-9_-]+)@\s+(\S.*)\Z")
_AXIS_TOKEN_RE = re.compile(r"[A-Za-z_]\w*\([^)]*\)|\S+")
_IDIOM_CALL_RE = re.compile(r"([A-Za-z_]\w*)\((.*)\)\Z")
_PROPERTY_REF_RE = re.compile(r"\$\{([^}]*)\}")


@dataclass(frozen=True)
class ReplaceEntry:
    name: str
    lines: tuple[str, ...]
    source: str = BUILTIN_SOURCE
    first_line: int = 0

    @property
    def builtin(self) -> bool:
        return self.source == BUILTIN_SOURCE


@dataclass(frozen=True)
class ReplaceTable:
    entries: Mapping[str, ReplaceEntry] = field(default_factory=dict)
    builtin: Mapping[str, ReplaceEntry] = field(default_factory=dict)
    source: str = "<template>"

    def lookup(self, name: str) -> ReplaceEntry | None:
        entry = self.entries.get(name)
        return entry if entry is not None else self.builtin.get(name)

    def __contains__(self, name: str) -> bool:
        return name in self.entries or name in self.builtin

    @classmethod
    def from_mapping(cls, bodies: Mapping[str, str | Iterable[str]], *, builtins: bool = True):
        """Build a table directly from ``{name: body}``; names are given without ``@``."""
        entries = {}
        for name, body in bodies.items():
            lines = body.split("\n") if isinstance(body, str) else list(body)
            entries[name] = ReplaceEntry(name, tuple(lines), "<table>", 1)
        return cls(entries, _builtin_entries() if builtins else {})


def _builtin_entries() -> dict[str, ReplaceEntry]:
    return {name: ReplaceEntry(name, lines) for name, lines in BUILTINS.items()}


def _dedent(lines: Iterable[str]) -> tuple[str, ...]:
    text = "\n".join(line.expandtabs(4) for line in lines)
    return tuple(textwrap.dedent(text).split("\n"))


def build_replace_table(doc: TemplateDocument) -> ReplaceTable:
    entries: dict[str, ReplaceEntry] = {}
    for block in doc.blocks:
        if block.kind != REPLACE:
            continue
        name = block.name
        if name in entries:
            raise DuplicateReplace(name, entries[name].first_line - 1, block.span[0], doc.source_name)
        entries[name] = ReplaceEntry(name, _dedent(block.body), doc.source_name, block.body_start)
    builtin = {k: v for k, v in _builtin_entries().items() if k not in entries}
    return ReplaceTable(entries, builtin, doc.source_name)


class _Resolver:
    def __init__(self, table: ReplaceTable, axes: frozenset[str]) -> None:
        self.table = table
        self.axes = axes
        self.done: dict[str, list[str]] = {}
        self.stack: list[str] = []

    def entry(self, name: str) -> list[str]:
        if name in self.done:
            return self.done[name]
        if name in self.stack:
            raise SubstitutionCycle(self.stack[self.stack.index(name):] + [name])
        entry = self.table.lookup(name)
        self.stack.append(name)
        try:
            resolved = self.lines(entry.lines, entry.source, entry.first_line, f"REPLACE @{name}@")
        finally:
            self.stack.pop()
        self.done[name] = resolved
        return resolved

    def lines(self, lines: Iterable[str], source: str, first_line: int, block: str | None) -> list[str]:
        out: list[str] = []
        for offset, line in enumerate(lines):
            if "@" not in line:
                out.append(line)
                continue
            indent = line[: len(line) - len(line.lstrip())]
            lineno = first_line + offset if first_line else 0

            def substitute(match: re.Match) -> str:
                name = match.group(1)
                if name in self.table:
                    try:
                        body = self.entry(name)
                    except SubstitutionCycle as exc:
                        if exc.location is None and lineno:
                            exc.location = Location(source, lineno, match.start() + 1, block)
                        raise
                    return ("\n" + indent).join(body)
                if name in self.axes:
                    return match.group(0)
                raise UnknownPlaceholder(name, Location(source, lineno, match.start() + 1, block))

            out.extend(PLACEHOLDER_RE.sub(substitute, line).split("\n"))
        return out


def resolve_text(
    text: Iterable[str],
    table: ReplaceTable,
    axes: Iterable[str] = (),
    *,
    source: str | None = None,
    first_line: int = 0,
    block: str | None = None,
) -> list[str]:
    """Substitute every placeholder in ``text`` recursively.

    Placeholders named in ``axes`` are left as they are; any other name that
    the table does not define raises :class:`UnknownPlaceholder`.  Multi-line
    bodies are re-indented to the column of the line they are spliced into.
    """
    resolver = _Resolver(table, frozenset(axes))
    return resolver.lines(text, source or table.source, first_line, block)


# -- idioms ---------------------------------------------------------------------


def eval_seq(start: int, max: int, step: int) -> list[str]:
    """Decimal values from ``start`` towards ``max`` (inclusive) in ``step`` increments."""
    if step == 0:
        raise ZeroStep()
    if (step > 0 and start > max) or (step < 0 and start < max):
        raise EmptyRange(start, max, step)
    stop = max + 1 if step > 0 else max - 1
    return [str(v) for v in range(start, stop, step)]


def _seq_idiom(args: list[int]) -> list[str]:
    if len(args) != 3:
        raise BadIdiomCall(f"seq takes (start, max, step), got {len(args)} argument(s)")
    return eval_seq(*args)


IdiomRule = Callable[[list[int]], list[str]]


@dataclass(frozen=True)
class IdiomRegistry:
    idioms: Mapping[str, IdiomRule] = field(default_factory=dict)

    def with_idiom(self, name: str, rule: IdiomRule) -> IdiomRegistry:
        return IdiomRegistry({**self.idioms, name: rule})

    def evaluate(self, name: str, args: list[int]) -> list[str]:
        try:
            rule = self.idioms[name]
        except KeyError:
            raise UnknownIdiom(name) from None
        return rule(args)


DEFAULT_IDIOMS = IdiomRegistry({"seq": _seq_idiom})


@dataclass(frozen=True)
class Axis:
    name: str
    values: tuple[str, ...]


def _property_values(properties: PropertySet | Mapping[str, str] | None) -> Mapping[str, str]:
    if properties is None:
        return {}
    if isinstance(properties, PropertySet):
        return properties.single
    return properties


def _interpolate(arg: str, values: Mapping[str, str], location: Location | None) -> str:
    # property values may themselves reference other properties
    for _ in range(32):
        missing = [m.group(1) for m in _PROPERTY_REF_RE.finditer(arg) if m.group(1) not in values]
        if missing:
            raise UnresolvedPropertyInIdiom(missing[0], location)
        expanded = _PROPERTY_REF_RE.sub(lambda m: values[m.group(1)], arg)
        if expanded == arg:
            return arg
        arg = expanded
    raise UnresolvedPropertyInIdiom(arg, location)


def is_axis_line(line: str) -> bool:
    return _AXIS_LINE_RE.match(line) is not None


def split_axis_lines(body: Iterable[str]) -> tuple[list[str], list[str]]:
    """Split a FORK_MERGE body into its leading axis declarations and the node template."""
    body = list(body)
    count = 0
    while count < len(body) and is_axis_line(body[count]):
        count += 1
    return body[:count], body[count:]


def parse_axes(
    lines: Iterable[str],
    properties: PropertySet | Mapping[str, str] | None = None,
    idioms: IdiomRegistry = DEFAULT_IDIOMS,
    *,
    source: str = "<template>",
    first_line: int = 0,
    block: str | None = None,
) -> list[Axis]:
    values_by_key = _property_values(properties)
    axes: list[Axis] = []
    seen: set[str] = set()
    for offset, line in enumerate(lines):
        location = Location(source, first_line + offset if first_line else 0, 0, block)
        match = _AXIS_LINE_RE.match(line)
        if match is None:
            raise BadAxis(f"not an axis declaration: {line.strip()!r}", location)
        name, rest = match.groups()
        if name in seen:
            raise BadAxis(f"axis @{name}@ declared twice", location)
        seen.add(name)

        values: list[str] = []
        for token in _AXIS_TOKEN_RE.findall(rest):
            call = _IDIOM_CALL_RE.match(token)
            if call is None:
                values.append(token)
                continue
            idiom, arg_text = call.groups()
            if idiom not in idioms.idioms:
                raise UnknownIdiom(idiom, location)
            args = []
            for raw_arg in arg_text.split(","):
                arg = _interpolate(raw_arg.strip(), values_by_key, location)
                try:
                    args.append(int(arg))
                except ValueError:
                    raise NonIntegerIdiomArg(arg, location) from None
            try:
                values.extend(idioms.evaluate(idiom, args))
            except (BadIdiomCall, ZeroStep, EmptyRange) as exc:
                exc.location = location
                raise
        axes.append(Axis(name, tuple(values)))
    return axes


# -- block expansion ----------------------------------------------------------------


@dataclass(frozen=True)
class ExpandedNode:
    name: str
    xml: str
    kind: str = "action"


@dataclass(frozen=True)
class ExpandedNodeSet:
    nodes: tuple[ExpandedNode, ...]
    entry_name: str
    exit_contract: tuple[str, str]
    block: Block | None = None

    @property
    def actions(self) -> list[ExpandedNode]:
        return [n for n in self.nodes if n.kind == "action"]


def quote_attr(value: str) -> str:
    escaped = value.replace("&", "&amp;").replace("<", "&lt;").replace("'", "&apos;")
    return f"'{escaped}'"


def action_xml(name: str, body: Iterable[str], ok: str, error: str) -> str:
    inner = "\n".join("    " + line if line else line for line in body)
    return (
        f"<action name={quote_attr(name)}>\n{inner}\n"
        f"    <ok to={quote_attr(ok)}/>\n    <error to={quote_attr(error)}/>\n</action>"
    )


def expand_action(block: Block, table: ReplaceTable) -> ExpandedNodeSet:
    if block.kind != ACTION:
        raise ValueError(f"expected an ACTION block, got {block.kind}")
    name, ok, error = block.attributes["name"], block.attributes["ok"], block.attributes["error"]
    body = resolve_text(
        _dedent(block.body), table, first_line=block.body_start, block=f"ACTION {name}"
    )
    node = ExpandedNode(name, action_xml(name, body, ok, error))
    return ExpandedNodeSet((node,), name, (ok, error), block)


def join_name(fork: str) -> str:
    return f"{fork}-join"


def expand_fork_merge(
    block: Block,
    table: ReplaceTable,
    properties: PropertySet | Mapping[str, str] | None = None,
    idioms: IdiomRegistry = DEFAULT_IDIOMS,
) -> ExpandedNodeSet:
    if block.kind != FORK_MERGE:
        raise ValueError(f"expected a FORK_MERGE block, got {block.kind}")
    name = block.attributes["name"]
    after = block.attributes["node_after_join"]
    error = block.attributes["error"]
    where = f"FORK_MERGE {name}"

    axis_lines, template = split_axis_lines(block.body)
    axes = parse_axes(
        axis_lines, properties, idioms,
        source=table.source, first_line=block.body_start, block=where,
    )
    for axis in axes:
        if axis.name in table:
            raise BadAxis(
                f"axis @{axis.name}@ shadows a REPLACE placeholder",
                Location(table.source, block.body_start, 0, where),
            )

    names = [a.name for a in axes]
    body = "\n".join(
        resolve_text(
            _dedent(template), table, names,
            first_line=block.body_start + len(axis_lines), block=where,
        )
    )
    combos = list(itertools.product(*(a.values for a in axes)))

    def instantiate(values: tuple[str, ...]) -> list[str]:
        binding = dict(zip(names, values))
        text = PLACEHOLDER_RE.sub(lambda m: binding.get(m.group(1), m.group(0)), body)
        return text.split("\n")

    if len(combos) == 1:
        node = ExpandedNode(name, action_xml(name, instantiate(combos[0]), after, error))
        return ExpandedNodeSet((node,), name, (after, error), block)

    join = join_name(name)
    action_names = [f"{name}-{k}" for k in range(len(combos))]
    paths = "\n".join(f"    <path start={quote_attr(a)}/>" for a in action_names)
    nodes = [ExpandedNode(name, f"<fork name={quote_attr(name)}>\n{paths}\n</fork>", "fork")]
    for action, values in zip(action_names, combos):
        nodes.append(ExpandedNode(action, action_xml(action, instantiate(values), join, error)))
    nodes.append(ExpandedNode(join, f"<join name={quote_attr(join)} to={quote_attr(after)}/>", "join"))
    return ExpandedNodeSet(tuple(nodes), name, (after, error), block)


def expand_document(
    doc: TemplateDocument,
    properties: PropertySet | Mapping[str, str] | None = None,
    idioms: IdiomRegistry = DEFAULT_IDIOMS,
    table: ReplaceTable | None = None,
) -> list[ExpandedNodeSet]:
    """Expand every ACTION and FORK_MERGE block of ``doc`` in document order."""
    if table is None:
        table = build_replace_table(doc)
    expanded = []
    for block in doc.blocks:
        if block.kind == ACTION:
            expanded.append(expand_action(block, table))
        elif block.kind == FORK_MERGE:
            expanded.append(expand_fork_merge(block, table, properties, idioms))
    return expanded
