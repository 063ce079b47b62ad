from __future__ import annotations

import random
import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chrum.errors import (
    BadAxis,
    BadIdiomCall,
    DuplicateReplace,
    EmptyRange,
    NonIntegerIdiomArg,
    SubstitutionCycle,
    UnknownIdiom,
    UnknownPlaceholder,
    UnresolvedPropertyInIdiom,
    ZeroStep,
)
from chrum.macros import (
    BUILTINS,
    DEFAULT_IDIOMS,
    ReplaceTable,
    build_replace_table,
    eval_seq,
    expand_action,
    expand_fork_merge,
    parse_axes,
    resolve_text,
    split_axis_lines,
)
from chrum.properties import parse_properties
from chrum.template import parse_template

from .conftest import SAMPLE_ACTION, SAMPLE_REPLACE
from .oracles import fixpoint_substitute, nested_loops, reachable_cycle, seq_loop, tokens

PH = re.compile(r"@[A-Za-z0-9_-]+@")


# -- replace table --------------------------------------------------------------


def test_table_from_replace_sample():
    table = build_replace_table(parse_template(SAMPLE_REPLACE))
    entry = table.entries["WF-1"]
    assert len(entry.lines) == 6
    assert entry.lines[-1].strip() == "@AUXIL@"


def test_table_without_replace_blocks_has_only_builtins():
    table = build_replace_table(parse_template(SAMPLE_ACTION))
    assert dict(table.entries) == {}
    assert set(table.builtin) == set(BUILTINS) == {"PIG_START", "PIG_END"}


def test_duplicate_replace():
    with pytest.raises(DuplicateReplace) as err:
        build_replace_table(parse_template(SAMPLE_REPLACE + SAMPLE_REPLACE))
    assert err.value.name == "WF-1"
    assert (err.value.line1, err.value.line2) == (1, 9)


def test_user_entries_shadow_builtins():
    doc = parse_template("# BEG:REPLACE @PIG_END@\n</pig><!-- done -->\n# END:REPLACE\n")
    table = build_replace_table(doc)
    assert "PIG_END" not in table.builtin
    assert resolve_text(["@PIG_END@"], table) == ["</pig><!-- done -->"]


def test_definition_order_does_not_matter():
    late = "# BEG:REPLACE @A@\n@B@\n# END:REPLACE\n# BEG:REPLACE @B@\nb\n# END:REPLACE\n"
    early = "# BEG:REPLACE @B@\nb\n# END:REPLACE\n# BEG:REPLACE @A@\n@B@\n# END:REPLACE\n"
    for text in (late, early):
        assert resolve_text(["@A@"], build_replace_table(parse_template(text))) == ["b"]


# -- resolve_text -------------------------------------------------------------------


def test_nested_definitions_resolve_completely():
    table = build_replace_table(
        parse_template(SAMPLE_REPLACE + "# BEG:REPLACE @AUXIL@\n<file>m.pig</file>\n# END:REPLACE\n")
    )
    out = resolve_text(["@WF-1@"], table)
    assert not any(PH.search(line) for line in out)
    assert out[-1] == "<file>m.pig</file>"
    assert len(out) == 6


def test_cycle_reports_path():
    table = ReplaceTable.from_mapping({"A": "x @B@ y", "B": "@A@"})
    with pytest.raises(SubstitutionCycle) as err:
        resolve_text(["@A@"], table)
    assert err.value.path == ["A", "B", "A"]
    assert "@A@ -> @B@ -> @A@" in str(err.value)


def test_self_reference_is_a_cycle():
    with pytest.raises(SubstitutionCycle) as err:
        resolve_text(["@A@"], ReplaceTable.from_mapping({"A": "@A@"}))
    assert err.value.path == ["A", "A"]


def test_unreachable_cycle_is_not_reported():
    table = ReplaceTable.from_mapping({"A": "a", "B": "@C@", "C": "@B@"})
    assert resolve_text(["@A@"], table) == ["a"]


def test_identity_without_placeholders():
    lines = ["<a>", "  text with an email-ish a@b", "</a>"]
    assert resolve_text(lines, ReplaceTable.from_mapping({})) == lines


def test_indentation_is_carried_into_bodies():
    table = ReplaceTable.from_mapping({"B": ["<x>", "    <y/>", "</x>"]})
    assert resolve_text(["        @B@"], table) == ["        <x>", "            <y/>", "        </x>"]


def test_unknown_placeholder_location():
    doc = parse_template("# BEG:ACTION name=a ok=end error=kill\n<x/>\n    @NOPE@\n# END:ACTION\n", "t.xml")
    with pytest.raises(UnknownPlaceholder) as err:
        expand_action(doc.blocks[0], build_replace_table(doc))
    loc = err.value.location
    assert (loc.source, loc.line, loc.column, loc.block) == ("t.xml", 3, 5, "ACTION a")
    assert str(err.value) == "t.xml:3:5: unknown placeholder @NOPE@ (in block ACTION a)"


def test_unknown_placeholder_inside_replace_body_points_at_definition():
    doc = parse_template("# BEG:REPLACE @A@\nok\n  @MISSING@\n# END:REPLACE\n", "t.xml")
    with pytest.raises(UnknownPlaceholder) as err:
        resolve_text(["@A@"], build_replace_table(doc))
    assert err.value.location.line == 3
    assert err.value.location.block == "REPLACE @A@"


def test_axis_names_pass_through():
    assert resolve_text(["v=@fold@"], ReplaceTable.from_mapping({}), axes=["fold"]) == ["v=@fold@"]
    with pytest.raises(UnknownPlaceholder):
        resolve_text(["v=@fold@"], ReplaceTable.from_mapping({}))


_names = ["A", "B", "C", "D", "E", "F"]


@st.composite
def acyclic_tables(draw):
    """Bodies may only reference names later in the list, so no cycles."""
    bodies = {}
    for i, name in enumerate(_names):
        lines = []
        for _ in range(draw(st.integers(0, 3))):
            indent = " " * draw(st.integers(0, 6))
            refs = draw(st.lists(st.sampled_from(_names[i + 1:]), max_size=2)) if i + 1 < len(_names) else []
            words = draw(st.lists(st.sampled_from(["<x/>", "text", "${p}"]), max_size=2))
            parts = words + [f"@{r}@" for r in refs]
            draw(st.randoms()).shuffle(parts)
            lines.append(indent + " ".join(parts))
        bodies[name] = lines
    return bodies


@given(acyclic_tables(), st.lists(st.sampled_from(_names), min_size=1, max_size=4))
def test_confluence_against_fixpoint_oracle(bodies, roots):
    text = ["  " + " ".join(f"@{r}@" for r in roots), "tail @A@"]
    table = ReplaceTable.from_mapping(bodies, builtins=False)
    assert tokens(resolve_text(text, table)) == tokens(fixpoint_substitute(text, bodies))


@st.composite
def random_tables(draw):
    size = draw(st.integers(1, 8))
    names = [f"N{i}" for i in range(size)]
    bodies = {}
    for name in names:
        refs = draw(st.lists(st.sampled_from(names), max_size=3))
        bodies[name] = ["<a>"] + [f"  @{r}@" for r in refs]
    roots = draw(st.lists(st.sampled_from(names), min_size=1, max_size=2))
    return bodies, [f"@{r}@" for r in roots]


@given(random_tables())
def test_cycle_detection_matches_graph_oracle(case):
    bodies, text = case
    table = ReplaceTable.from_mapping(bodies, builtins=False)
    try:
        resolve_text(text, table)
        raised = False
    except SubstitutionCycle as exc:
        raised = True
        path = exc.path
        assert path[0] == path[-1]
        for src, dst in zip(path, path[1:]):
            assert any(f"@{dst}@" in line for line in bodies[src])
    assert raised == reachable_cycle(bodies, text)


# -- seq -------------------------------------------------------------------------------


@pytest.mark.parametrize(
    "args, expected",
    [
        ((0, 0, 1), ["0"]),
        ((0, 4, 1), seq_loop(0, 4, 1)),
        ((2, 10, 3), seq_loop(2, 10, 3)),
        ((5, 1, -2), seq_loop(5, 1, -2)),
    ],
)
def test_seq_examples(args, expected):
    assert eval_seq(*args) == expected


def test_seq_frozen_values():
    # frozen from seq_loop
    assert eval_seq(0, 4, 1) == ["0", "1", "2", "3", "4"]
    assert eval_seq(2, 10, 3) == ["2", "5", "8"]


def test_seq_errors():
    with pytest.raises(ZeroStep):
        eval_seq(0, 3, 0)
    with pytest.raises(EmptyRange):
        eval_seq(4, 3, 1)
    with pytest.raises(EmptyRange):
        eval_seq(3, 4, -1)


@given(st.integers(-50, 50), st.integers(0, 200), st.integers(1, 25), st.booleans())
def test_seq_property(start, span, step, descending):
    maximum, step = (start - span, -step) if descending else (start + span, step)
    values = eval_seq(start, maximum, step)
    assert values == seq_loop(start, maximum, step)
    assert len(values) == (maximum - start) // step + 1


# -- axes ----------------------------------------------------------------------------


FORK_AXES = ["@src@ ${dc_m_hdfs_neighs} ${dc_m_hdfs_docClassifMapping}", "@fold@ seq(0,${dc_m_int_folds},1)"]


def test_axes_from_fork_sample():
    axes = parse_axes(FORK_AXES, parse_properties("dc_m_int_folds=3"))
    assert [(a.name, list(a.values)) for a in axes] == [
        ("src", ["${dc_m_hdfs_neighs}", "${dc_m_hdfs_docClassifMapping}"]),
        ("fold", seq_loop(0, 3, 1)),
    ]


def test_literal_axis():
    (axis,) = parse_axes(["@src@ /tmp/1 /tmp/2 /tmp/3"])
    assert axis.values == ("/tmp/1", "/tmp/2", "/tmp/3")


def test_missing_idiom_property():
    with pytest.raises(UnresolvedPropertyInIdiom) as err:
        parse_axes(["@fold@ seq(0,${missing},1)"], {})
    assert err.value.name == "missing"


def test_idiom_properties_resolve_transitively():
    (axis,) = parse_axes(["@k@ seq(1, ${n}, 1)"], {"n": "${m}", "m": "2"})
    assert axis.values == ("1", "2")


@pytest.mark.parametrize(
    "line, props, error",
    [
        ("@f@ range(0,3)", {}, UnknownIdiom),
        ("@f@ seq(0,${n},1)", {"n": "three"}, NonIntegerIdiomArg),
        ("@f@ seq(0,3)", {}, BadIdiomCall),
        ("@f@ seq(3,0,1)", {}, EmptyRange),
    ],
)
def test_axis_errors(line, props, error):
    with pytest.raises(error):
        parse_axes([line], props)


def test_duplicate_axis():
    with pytest.raises(BadAxis):
        parse_axes(["@a@ 1", "@a@ 2"])


def test_custom_idiom_registration():
    idioms = DEFAULT_IDIOMS.with_idiom("pow2", lambda args: [str(2**i) for i in range(args[0])])
    (axis,) = parse_axes(["@size@ pow2(4)"], idioms=idioms)
    assert axis.values == ("1", "2", "4", "8")


def test_axis_run_stops_at_first_body_line():
    axes, body = split_axis_lines(["@a@ 1 2", "@b@ x", "    @PIG_START@", "@c@ not-an-axis"])
    assert axes == ["@a@ 1 2", "@b@ x"]
    assert body[0] == "    @PIG_START@"


# -- expansion ------------------------------------------------------------------------


def _block(text: str, index: int = -1):
    doc = parse_template(text)
    return doc.blocks[index], build_replace_table(doc)


def test_expand_literal_action():
    block, table = _block("# BEG:ACTION name=a ok=b error=kill\n<fs><mkdir path='x'/></fs>\n# END:ACTION\n")
    nodes = expand_action(block, table)
    assert nodes.entry_name == "a"
    assert nodes.exit_contract == ("b", "kill")
    (node,) = nodes.nodes
    assert node.xml == (
        "<action name='a'>\n    <fs><mkdir path='x'/></fs>\n"
        "    <ok to='b'/>\n    <error to='kill'/>\n</action>"
    )


def test_expand_undefined_placeholder():
    block, table = _block("# BEG:ACTION name=a ok=b error=kill\n@NOPE@\n# END:ACTION\n")
    with pytest.raises(UnknownPlaceholder):
        expand_action(block, table)


def _fork(axes: list[str], body: str = "@PIG_START@\n<param>@a@-@b@</param>\n@PIG_END@") -> str:
    return (
        "# BEG:FORK_MERGE name=fm node_after_join=next error=kill\n"
        + "".join(a + "\n" for a in axes)
        + body
        + "\n# END:FORK_MERGE\n"
    )


def test_fork_sample_fans_out_to_eight(fork_sample):
    doc = parse_template(fork_sample)
    block = [b for b in doc.blocks if b.kind == "FORK_MERGE"][0]
    nodes = expand_fork_merge(block, build_replace_table(doc), {"dc_m_int_folds": "3"})
    names = [n.name for n in nodes.nodes]
    assert names[0] == "split_03"
    assert names[1:-1] == [f"split_03-{k}" for k in range(2 * 4)]
    assert names[-1] == "split_03-join"
    assert nodes.nodes[0].xml.count("<path start=") == 8
    assert "to='enrich_04'" in nodes.nodes[-1].xml
    for node in nodes.actions:
        assert "<ok to='split_03-join'/>" in node.xml
        assert "<error to='kill'/>" in node.xml


def test_row_major_order():
    block, table = _block(_fork(["@a@ x y", "@b@ 1 2 3"]))
    actions = expand_fork_merge(block, table).actions
    assert len(actions) == 6
    expected = nested_loops([("a", ["x", "y"]), ("b", ["1", "2", "3"])])
    for node, combo in zip(actions, expected):
        assert f"<param>{combo['a']}-{combo['b']}</param>" in node.xml
    assert "y-2" in actions[4].xml


def test_single_combination_collapses_to_plain_action():
    block, table = _block(_fork(["@a@ x", "@b@ 1"]))
    nodes = expand_fork_merge(block, table)
    (node,) = nodes.nodes
    assert node.name == "fm"
    assert node.kind == "action"
    assert "<ok to='next'/>" in node.xml
    assert "x-1" in node.xml


def test_replace_bodies_may_use_axis_placeholders():
    text = "# BEG:REPLACE @P@\n<delete path='/out/@a@'/>\n# END:REPLACE\n" + _fork(["@a@ x y", "@b@ 1"], "<fs>@P@</fs>")
    block, table = _block(text)
    xml = [n.xml for n in expand_fork_merge(block, table).actions]
    assert "/out/x" in xml[0] and "/out/y" in xml[1]


def test_axis_shadowing_placeholder_is_rejected():
    text = "# BEG:REPLACE @a@\nz\n# END:REPLACE\n" + _fork(["@a@ x y", "@b@ 1"])
    block, table = _block(text)
    with pytest.raises(BadAxis):
        expand_fork_merge(block, table)


@settings(max_examples=60)
@given(st.lists(st.integers(1, 5), min_size=1, max_size=4))
def test_fan_out_count_property(lengths):
    names = [f"x{i}" for i in range(len(lengths))]
    axes = [(n, [f"{n}v{j}" for j in range(k)]) for n, k in zip(names, lengths)]
    body = "<p>" + "|".join(f"@{n}@" for n in names) + "</p>"
    block, table = _block(_fork([f"@{n}@ " + " ".join(v) for n, v in axes], body))
    actions = expand_fork_merge(block, table).actions
    combos = nested_loops(axes)
    assert len(actions) == len(combos)
    for node, combo in zip(actions, combos):
        assert "<p>" + "|".join(combo[n] for n in names) + "</p>" in node.xml
        assert not PH.search(node.xml)


def test_no_placeholder_survives_fixture(docclassif, docclassif_props):
    doc = parse_template(docclassif)
    table = build_replace_table(doc)
    for block in doc.blocks:
        if block.kind == "ACTION":
            nodes = expand_action(block, table)
        elif block.kind == "FORK_MERGE":
            nodes = expand_fork_merge(block, table, docclassif_props)
        else:
            continue
        for node in nodes.nodes:
            assert not PH.search(node.xml), node.name


def test_random_cycle_paths_are_cycles():
    rng = random.Random(7)
    for _ in range(200):
        names = [f"R{i}" for i in range(rng.randint(1, 6))]
        bodies = {n: [" ".join(f"@{rng.choice(names)}@" for _ in range(rng.randint(0, 2)))] for n in names}
        try:
            resolve_text([f"@{names[0]}@"], ReplaceTable.from_mapping(bodies, builtins=False))
        except SubstitutionCycle as exc:
            assert exc.path[0] == exc.path[-1]
            assert len(set(exc.path)) == len(exc.path) - 1
