"""Assemble expanded nodes into workflow XML and check the resulting graph."""

from __future__ import annotations

import heapq
import re
import xml.etree.ElementTree as ET
from collections import Counter
from dataclasses import dataclass, field

from .errors import Location, UnsupportedNode, XmlMalformed
from .macros import ExpandedNodeSet, quote_attr
from .template import REPLACE, Block, TemplateDocument

INDENT = "    "
START = ":start"  # not a legal Oozie node name, so it cannot collide

NODE_KINDS = ("start", "action", "fork", "join", "kill", "end")
_UNSUPPORTED = ("decision",)

# violation kinds
DANGLING_TARGET = "DanglingTarget"
CYCLE = "Cycle"
UNREACHABLE_NODE = "UnreachableNode"
FORK_WITHOUT_JOIN = "ForkWithoutJoin"
JOIN_FAN_IN_MISMATCH = "JoinFanInMismatch"
MULTIPLE_STARTS = "MultipleStarts"
MISSING_START = "MissingStart"
MISSING_END = "MissingEnd"
DUPLICATE_NODE = "DuplicateNode"


@dataclass(frozen=True)
class WorkflowGraph:
    nodes: dict[str, str] = field(default_factory=dict)
    ok_edges: dict[str, str] = field(default_factory=dict)
    error_edges: dict[str, str] = field(default_factory=dict)
    fork_paths: dict[str, tuple[str, ...]] = field(default_factory=dict)
    join_targets: dict[str, str] = field(default_factory=dict)
    # names defined more than once; START appears here for extra <start> elements
    duplicates: tuple[str, ...] = ()

    def flow_successors(self, name: str) -> list[str]:
        """Successors assuming every action succeeds."""
        kind = self.nodes.get(name)
        if kind == "fork":
            return list(self.fork_paths.get(name, ()))
        if kind == "join":
            return [self.join_targets[name]] if name in self.join_targets else []
        return [self.ok_edges[name]] if name in self.ok_edges else []

    def successors(self, name: str) -> list[str]:
        succ = self.flow_successors(name)
        if name in self.error_edges:
            succ.append(self.error_edges[name])
        return succ

    def edges(self) -> list[tuple[str, str, str]]:
        """Every edge as ``(source, target, label)``."""
        out = [(s, t, "ok") for s, t in self.ok_edges.items()]
        out += [(s, t, "error") for s, t in self.error_edges.items()]
        out += [(s, t, "path") for s, ts in self.fork_paths.items() for t in ts]
        out += [(s, t, "join") for s, t in self.join_targets.items()]
        return out

    def without_node(self, name: str) -> WorkflowGraph:
        return WorkflowGraph(
            {k: v for k, v in self.nodes.items() if k != name},
            {k: v for k, v in self.ok_edges.items() if k != name},
            {k: v for k, v in self.error_edges.items() if k != name},
            {k: v for k, v in self.fork_paths.items() if k != name},
            {k: v for k, v in self.join_targets.items() if k != name},
            self.duplicates,
        )


@dataclass(frozen=True)
class WorkflowStats:
    lines: int
    non_blank_lines: int
    nodes_by_kind: dict[str, int]


@dataclass(frozen=True)
class EmittedWorkflow:
    xml_text: str
    graph: WorkflowGraph
    stats: WorkflowStats


@dataclass(frozen=True)
class Violation:
    kind: str
    node: str | None = None
    detail: str = ""
    path: tuple[str, ...] = ()

    def __str__(self) -> str:
        text = self.kind
        if self.node:
            text += f" {self.node}"
        if self.path:
            text += " [" + " -> ".join(self.path) + "]"
        if self.detail:
            text += f": {self.detail}"
        return text


# -- XML formatting ---------------------------------------------------------------


def _local(tag: str) -> tuple[str | None, str]:
    if tag.startswith("{"):
        uri, _, local = tag[1:].partition("}")
        return uri, local
    return None, tag


def _escape_text(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _leaf_text(text: str) -> str:
    return text.strip() if "\n" in text else text


def _format_element(elem: ET.Element, pad: str, parent_ns: str | None, out: list[str]) -> None:
    if elem.tag is ET.Comment:
        out.append(f"{pad}<!--{elem.text or ''}-->")
        return
    ns, tag = _local(elem.tag)
    attrs = ""
    if ns is not None and ns != parent_ns:
        attrs += f" xmlns={quote_attr(ns)}"
    for key, value in elem.attrib.items():
        attrs += f" {_local(key)[1]}={quote_attr(value)}"

    children = list(elem)
    text = elem.text or ""
    if not children:
        if text.strip():
            out.append(f"{pad}<{tag}{attrs}>{_escape_text(_leaf_text(text))}</{tag}>")
        else:
            out.append(f"{pad}<{tag}{attrs}/>")
        return

    out.append(f"{pad}<{tag}{attrs}>")
    inner = pad + INDENT
    if text.strip():
        out.append(inner + _escape_text(text.strip()))
    for child in children:
        _format_element(child, inner, ns, out)
        if child.tail and child.tail.strip():
            out.append(inner + _escape_text(child.tail.strip()))
    out.append(f"{pad}</{tag}>")


def _parse_fragment(text: str) -> ET.Element:
    parser = ET.XMLParser(target=ET.TreeBuilder(insert_comments=True))
    parser.feed(text)
    return parser.close()


def format_node(xml_text: str, indent: str = "") -> list[str]:
    """Re-indent one node with 4 spaces per depth and single-quoted attributes."""
    root = _parse_fragment(xml_text)
    out: list[str] = []
    _format_element(root, indent, None, out)
    return out


# -- graph extraction -------------------------------------------------------------


def _required(elem: ET.Element, attr: str, what: str) -> str:
    value = elem.get(attr)
    if value is None:
        raise XmlMalformed(f"{what} is missing attribute {attr!r}")
    return value


def _transition(action: ET.Element, name: str, which: str) -> str:
    for child in action:
        if isinstance(child.tag, str) and _local(child.tag)[1] == which:
            return _required(child, "to", f"<{which}> of action {name!r}")
    raise XmlMalformed(f"action {name!r} has no <{which}> transition")


def graph_from_xml(root: ET.Element) -> WorkflowGraph:
    nodes: dict[str, str] = {}
    ok_edges: dict[str, str] = {}
    error_edges: dict[str, str] = {}
    fork_paths: dict[str, tuple[str, ...]] = {}
    join_targets: dict[str, str] = {}
    duplicates: list[str] = []

    def add(name: str, kind: str) -> bool:
        if name in nodes:
            duplicates.append(name)
            return False
        nodes[name] = kind
        return True

    for elem in root:
        if not isinstance(elem.tag, str):
            continue
        tag = _local(elem.tag)[1]
        if tag in _UNSUPPORTED:
            raise UnsupportedNode(f"<{tag}> nodes are not supported")
        if tag == "start":
            if add(START, "start"):
                ok_edges[START] = _required(elem, "to", "<start>")
        elif tag in ("end", "kill"):
            add(_required(elem, "name", f"<{tag}>"), tag)
        elif tag == "action":
            name = _required(elem, "name", "<action>")
            if add(name, "action"):
                ok_edges[name] = _transition(elem, name, "ok")
                error_edges[name] = _transition(elem, name, "error")
        elif tag == "fork":
            name = _required(elem, "name", "<fork>")
            if add(name, "fork"):
                fork_paths[name] = tuple(
                    _required(p, "start", f"<path> of fork {name!r}")
                    for p in elem
                    if isinstance(p.tag, str) and _local(p.tag)[1] == "path"
                )
        elif tag == "join":
            name = _required(elem, "name", "<join>")
            if add(name, "join"):
                join_targets[name] = _required(elem, "to", f"<join> {name!r}")

    return WorkflowGraph(nodes, ok_edges, error_edges, fork_paths, join_targets, tuple(duplicates))


def parse_workflow(xml_text: str) -> tuple[ET.Element, WorkflowGraph]:
    try:
        root = _parse_fragment(xml_text)
    except ET.ParseError as exc:
        line, col = exc.position
        raise XmlMalformed(str(exc), Location("workflow.xml", line, col + 1)) from None
    if _local(root.tag)[1] != "workflow-app":
        raise XmlMalformed(f"root element is <{_local(root.tag)[1]}>, expected <workflow-app>")
    return root, graph_from_xml(root)


# -- emission ---------------------------------------------------------------------


def _block_lines(block: Block, expanded: ExpandedNodeSet, source: str) -> list[str]:
    out: list[str] = []
    for node in expanded.nodes:
        try:
            # nodes are always direct children of <workflow-app>
            out.extend(format_node(node.xml, INDENT))
        except ET.ParseError as exc:
            raise XmlMalformed(
                f"{exc} in generated node {node.name!r}",
                Location(source, block.span[0], 0, f"{block.kind} {block.name}"),
            ) from None
    return out


def emit_workflow(doc: TemplateDocument, expanded: list[ExpandedNodeSet]) -> EmittedWorkflow:
    pending = iter(expanded)
    parts: list[str] = []
    for segment in doc.segments:
        if not isinstance(segment, Block):
            parts.append(segment.text)
            continue
        if segment.kind == REPLACE:
            continue
        try:
            nodes = next(pending)
        except StopIteration:
            raise ValueError("fewer expanded node sets than ACTION/FORK_MERGE blocks") from None
        parts.append("\n".join(_block_lines(segment, nodes, doc.source_name)) + "\n")
    if next(pending, None) is not None:
        raise ValueError("more expanded node sets than ACTION/FORK_MERGE blocks")

    xml_text = "".join(parts)
    _, graph = parse_workflow(xml_text)
    lines = xml_text.splitlines()
    stats = WorkflowStats(
        lines=len(lines),
        non_blank_lines=sum(1 for line in lines if line.strip()),
        nodes_by_kind=dict(Counter(graph.nodes.values())),
    )
    return EmittedWorkflow(xml_text, graph, stats)


# -- validation -------------------------------------------------------------------


def _find_cycles(graph: WorkflowGraph) -> list[tuple[str, ...]]:
    white, grey, black = 0, 1, 2
    color = dict.fromkeys(graph.nodes, white)
    cycles: list[tuple[str, ...]] = []

    for root in sorted(graph.nodes, key=natural_key):
        if color[root] != white:
            continue
        stack: list[tuple[str, iter]] = [(root, iter(graph.successors(root)))]
        path = [root]
        color[root] = grey
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                stack.pop()
                path.pop()
                color[node] = black
                continue
            if nxt not in color:
                continue
            if color[nxt] == grey:
                cycles.append(tuple(path[path.index(nxt):]) + (nxt,))
            elif color[nxt] == white:
                color[nxt] = grey
                path.append(nxt)
                stack.append((nxt, iter(graph.successors(nxt))))
    return cycles


def _reachable(graph: WorkflowGraph, root: str) -> set[str]:
    seen = {root}
    todo = [root]
    while todo:
        for succ in graph.successors(todo.pop()):
            if succ in graph.nodes and succ not in seen:
                seen.add(succ)
                todo.append(succ)
    return seen


def _region_join(graph: WorkflowGraph, fork: str, memo: dict[str, str | None]) -> str | None:
    """The join every path of ``fork`` converges on, or None."""
    if fork in memo:
        return memo[fork]
    memo[fork] = None  # guards against fork cycles
    joins = set()
    for start in graph.fork_paths.get(fork, ()):
        node, seen = start, set()
        while True:
            if node in seen or node not in graph.nodes:
                joins.add(None)
                break
            seen.add(node)
            kind = graph.nodes[node]
            if kind == "join":
                joins.add(node)
                break
            if kind == "action":
                node = graph.ok_edges.get(node)
            elif kind == "fork":
                inner = _region_join(graph, node, memo)
                node = graph.join_targets.get(inner) if inner else None
            else:
                joins.add(None)
                break
    result = joins.pop() if len(joins) == 1 and None not in joins else None
    memo[fork] = result
    return result


def validate_graph(graph: WorkflowGraph) -> list[Violation]:
    report: list[Violation] = []

    if START not in graph.nodes:
        report.append(Violation(MISSING_START))
    if START in graph.duplicates:
        report.append(Violation(MULTIPLE_STARTS, detail=f"{graph.duplicates.count(START) + 1} <start> elements"))
    if "end" not in graph.nodes.values():
        report.append(Violation(MISSING_END))
    for name in dict.fromkeys(graph.duplicates):
        if name != START:
            report.append(Violation(DUPLICATE_NODE, name))

    for source, target, label in graph.edges():
        if target not in graph.nodes:
            report.append(Violation(DANGLING_TARGET, source, f"{label} -> {target!r}"))

    for cycle in _find_cycles(graph):
        report.append(Violation(CYCLE, cycle[0], path=cycle))

    if START in graph.nodes:
        reached = _reachable(graph, START)
        for name in sorted(graph.nodes, key=natural_key):
            if name not in reached:
                report.append(Violation(UNREACHABLE_NODE, name))

    memo: dict[str, str | None] = {}
    forks_by_join: dict[str, list[str]] = {}
    for fork in sorted(graph.fork_paths, key=natural_key):
        join = _region_join(graph, fork, memo)
        if join is None:
            report.append(Violation(FORK_WITHOUT_JOIN, fork, "paths do not converge on one join"))
        else:
            forks_by_join.setdefault(join, []).append(fork)

    fan_in = Counter(
        target for _, target, label in graph.edges() if label != "error"
    )
    for join in sorted(graph.join_targets, key=natural_key):
        forks = forks_by_join.get(join, [])
        if len(forks) != 1:
            detail = "closes no fork" if not forks else "closes forks " + ", ".join(forks)
            report.append(Violation(JOIN_FAN_IN_MISMATCH, join, detail))
            continue
        expected = len(graph.fork_paths[forks[0]])
        if fan_in[join] != expected:
            report.append(
                Violation(
                    JOIN_FAN_IN_MISMATCH, join,
                    f"{fan_in[join]} incoming transitions, fork {forks[0]} has {expected} paths",
                )
            )
    return report


# -- dry run ----------------------------------------------------------------------

_DIGITS = re.compile(r"(\d+)")


def natural_key(name: str) -> tuple:
    """Sort key that orders ``x-2`` before ``x-10``."""
    return tuple(int(p) if i % 2 else p for i, p in enumerate(_DIGITS.split(name)))


@dataclass(frozen=True)
class TraceEvent:
    kind: str
    name: str

    def __str__(self) -> str:
        return self.name if self.kind == "action" else f"{self.kind}({self.name})"


def dry_run_events(graph: WorkflowGraph) -> list[TraceEvent]:
    """Topological walk over success transitions, ties broken by node name."""
    if START not in graph.nodes:
        return []
    reached = {START}
    todo = [START]
    while todo:
        for succ in graph.flow_successors(todo.pop()):
            if succ in graph.nodes and succ not in reached:
                reached.add(succ)
                todo.append(succ)

    indegree = dict.fromkeys(reached, 0)
    for node in reached:
        for succ in graph.flow_successors(node):
            if succ in indegree:
                indegree[succ] += 1

    ready = [(natural_key(n), n) for n, d in indegree.items() if d == 0]
    heapq.heapify(ready)
    events: list[TraceEvent] = []
    while ready:
        _, node = heapq.heappop(ready)
        kind = graph.nodes[node]
        if kind in ("action", "fork", "join"):
            events.append(TraceEvent(kind, node))
        for succ in graph.flow_successors(node):
            if succ in indegree:
                indegree[succ] -= 1
                if indegree[succ] == 0:
                    heapq.heappush(ready, (natural_key(succ), succ))
    return events


def dry_run(graph: WorkflowGraph) -> list[str]:
    """Action names in execution order, assuming every action succeeds."""
    return [e.name for e in dry_run_events(graph) if e.kind == "action"]
