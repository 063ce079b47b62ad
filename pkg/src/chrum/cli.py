"""Command-line entry point.

Exit status: 0 success, 1 I/O error, 2 template or configuration error,
3 some (but not every) combination failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .compiler import compile_document
from .emitter import EmittedWorkflow, dry_run_events, parse_workflow, validate_graph
from .errors import ChrumError, ConfigError, InvalidWorkflow, IoFailure, TemplateError
from .experiment import (
    MANIFEST_FILE,
    PROPERTIES_FILE,
    ChrumConfig,
    Clock,
    ExperimentPlan,
    LocalDirectoryStorage,
    fixed_clock,
    materialize_combination,
    parse_config,
    plan_experiment,
    storage_root_override,
    utc_now,
)
from .macros import ReplaceTable, build_replace_table
from .properties import Combination, PropertySet, enumerate_combinations, parse_properties, read_flat_properties
from .submit import FAILED, SUBMITTED, record_execution, submit
from .template import TemplateDocument, parse_template

log = logging.getLogger("chrum")

EXIT_OK = 0
EXIT_IO = 1
EXIT_TEMPLATE = 2
EXIT_PARTIAL = 3


class InputMissing(IoFailure):
    def __init__(self, what: str, path: Path) -> None:
        super().__init__(path, f"{what} file not found")


@dataclass(frozen=True)
class InvocationContext:
    config_path: Path | None
    template_path: Path | None
    properties_path: Path | None
    out: Path | None
    clock: Clock
    verbosity: int = 0

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> InvocationContext:
        ctx = cls(
            config_path=getattr(args, "config", None),
            template_path=getattr(args, "template", None),
            properties_path=getattr(args, "properties", None),
            out=getattr(args, "out", None),
            clock=fixed_clock(args.clock) if getattr(args, "clock", None) else utc_now,
            verbosity=args.verbose,
        )
        for what, path in (
            ("config", ctx.config_path),
            ("template", ctx.template_path),
            ("properties", ctx.properties_path),
        ):
            if path is not None and not path.is_file():
                raise InputMissing(what, path)
        return ctx

    def template(self) -> tuple[TemplateDocument, ReplaceTable]:
        text = _read(self.template_path)
        doc = parse_template(text, str(self.template_path))
        return doc, build_replace_table(doc)

    def properties(self) -> PropertySet:
        if self.properties_path is None:
            return PropertySet()
        return parse_properties(_read(self.properties_path), str(self.properties_path))

    def config(self) -> ChrumConfig:
        path = self.config_path
        config = parse_config(_read(path), str(path), base_dir=path.parent)
        return storage_root_override(config)


def _read(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(path, exc.strerror or str(exc)) from exc


def _non_blank(text: str) -> int:
    return sum(1 for line in text.splitlines() if line.strip())


def _report_violations(violations, prefix: str = "") -> None:
    for violation in violations:
        print(f"chrum: invalid: {prefix}{violation}", file=sys.stderr)


# -- subcommands ------------------------------------------------------------------


def cmd_expand(args: argparse.Namespace) -> int:
    ctx = InvocationContext.from_args(args)
    doc, table = ctx.template()
    props = ctx.properties()
    first = enumerate_combinations(props)[0]
    workflow = compile_document(doc, props.flatten(first.assignments), table=table)
    violations = validate_graph(workflow.graph)
    if violations:
        _report_violations(violations)
        return EXIT_TEMPLATE

    out = ctx.out or Path("workflow.xml")
    try:
        out.write_text(workflow.xml_text, encoding="utf-8")
    except OSError as exc:
        raise IoFailure(out, exc.strerror or str(exc)) from exc

    template_lines = _non_blank(doc.serialize())
    emitted = workflow.stats.non_blank_lines
    ratio = emitted / template_lines if template_lines else 0.0
    print(f"template\t{template_lines}")
    print(f"workflow\t{emitted}")
    print(f"expansion\t{ratio:.1f}x")
    return EXIT_OK


def _plan(ctx: InvocationContext) -> tuple[ExperimentPlan, TemplateDocument, ReplaceTable]:
    config = ctx.config()
    doc, table = ctx.template()
    props = ctx.properties()
    plan = plan_experiment(config, props, ctx.out or Path("."), ctx.clock)
    return plan, doc, table


def cmd_plan(args: argparse.Namespace) -> int:
    plan, _, _ = _plan(InvocationContext.from_args(args))
    for combo in plan.combinations:
        print(f"{combo.label}\t{plan.local_dir(combo)}\t{plan.storage_dir(combo)}")
    return EXIT_OK


@dataclass(frozen=True)
class Row:
    label: str
    status: str
    job_id: str | None = None
    detail: str = ""
    error_class: int | None = None

    def line(self) -> str:
        return "\t".join((self.label, self.status, self.job_id or "-", self.detail)).rstrip("\t")


def cmd_run(args: argparse.Namespace) -> int:
    ctx = InvocationContext.from_args(args)
    plan, doc, table = _plan(ctx)
    storage = LocalDirectoryStorage(plan.config.storage_root)

    def process(combo: Combination) -> Row:
        try:
            flattened = plan.flattened(combo)
            workflow = compile_document(doc, flattened, table=table)
            materialize_combination(plan, combo, workflow, storage)
            if not args.submit:
                return Row(combo.label, "materialized")
            record = record_execution(plan, combo, ctx.clock, storage)
            record = submit(record, plan.config, flattened)
        except (TemplateError, ConfigError) as exc:
            return Row(combo.label, FAILED, detail=str(exc), error_class=EXIT_TEMPLATE)
        except IoFailure as exc:
            return Row(combo.label, FAILED, detail=str(exc), error_class=EXIT_IO)
        if record.status == SUBMITTED:
            return Row(combo.label, SUBMITTED, record.job_id)
        return Row(combo.label, FAILED, detail=record.reason or "", error_class=EXIT_PARTIAL)

    if args.parallel > 1:
        with ThreadPoolExecutor(max_workers=args.parallel) as pool:
            rows = list(pool.map(process, plan.combinations))
    else:
        rows = [process(combo) for combo in plan.combinations]

    for row in rows:
        print(row.line())
        if row.status == FAILED:
            print(f"chrum: {row.label}: {row.detail}", file=sys.stderr)

    failed = [r for r in rows if r.status == FAILED]
    if not failed:
        return EXIT_OK
    classes = {r.error_class for r in failed}
    if len(failed) == len(rows) and len(classes) == 1 and classes != {EXIT_PARTIAL}:
        return classes.pop()
    return EXIT_PARTIAL


def cmd_submit(args: argparse.Namespace) -> int:
    ctx = InvocationContext.from_args(args)
    config = ctx.config()
    storage = LocalDirectoryStorage(config.storage_root)
    failures = 0
    for run_dir in args.run_dirs:
        manifest_path = run_dir / MANIFEST_FILE
        try:
            manifest = json.loads(_read(manifest_path))
        except ValueError as exc:
            raise IoFailure(manifest_path, f"not a submission manifest: {exc}") from exc
        combo = Combination(manifest["assignments"], manifest["parameter_combination"])
        plan = ExperimentPlan(
            config, manifest["compilation_time"], (combo,), run_dir.resolve().parents[2]
        )
        record = record_execution(plan, combo, ctx.clock, storage)
        props = read_flat_properties(_read(run_dir / PROPERTIES_FILE))
        record = submit(record, config, props)
        print(Row(combo.label, record.status, record.job_id, record.reason or "").line())
        failures += record.status != SUBMITTED
    return EXIT_OK if not failures else EXIT_PARTIAL


def _workflows_for(ctx: InvocationContext, args: argparse.Namespace) -> list[tuple[str, EmittedWorkflow]]:
    if args.workflow is not None:
        if not args.workflow.is_file():
            raise InputMissing("workflow", args.workflow)
        text = _read(args.workflow)
        _, graph = parse_workflow(text)
        return [(str(args.workflow), EmittedWorkflow(text, graph, None))]
    if ctx.template_path is None:
        raise ConfigError("either --template or --workflow is required")
    doc, table = ctx.template()
    props = ctx.properties()
    return [
        (combo.label, compile_document(doc, props.flatten(combo.assignments), table=table))
        for combo in enumerate_combinations(props)
    ]


def cmd_validate(args: argparse.Namespace) -> int:
    ctx = InvocationContext.from_args(args)
    status = EXIT_OK
    for label, workflow in _workflows_for(ctx, args):
        violations = validate_graph(workflow.graph)
        if violations:
            _report_violations(violations, f"{label}: ")
            status = EXIT_TEMPLATE
        else:
            print(f"{label}\tok")
    return status


def cmd_dry_run(args: argparse.Namespace) -> int:
    ctx = InvocationContext.from_args(args)
    label, workflow = _workflows_for(ctx, args)[0]
    violations = validate_graph(workflow.graph)
    if violations:
        raise InvalidWorkflow(violations)
    for event in dry_run_events(workflow.graph):
        print(event)
    return EXIT_OK


def cmd_mock_server(args: argparse.Namespace) -> int:
    from .mockserver import MockOozieServer

    server = MockOozieServer(args.host, args.port)
    print(f"mock oozie listening on {server.host}:{server.port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return EXIT_OK


# -- argument parsing -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chrum", description="Expand annotated workflow templates and manage experiments."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def inputs(p: argparse.ArgumentParser, config: bool, template_required: bool = True) -> None:
        if config:
            p.add_argument("--config", type=Path, required=True)
        p.add_argument("--template", type=Path, required=template_required)
        p.add_argument("--properties", type=Path)

    p = sub.add_parser("expand", parents=[common], help="write workflow.xml for the first combination")
    inputs(p, config=False)
    p.add_argument("--out", type=Path, help="output file (default: workflow.xml)")
    p.set_defaults(func=cmd_expand)

    for name, func, help_text in (
        ("plan", cmd_plan, "list combinations and their directories without writing"),
        ("run", cmd_run, "materialize (and optionally submit) every combination"),
    ):
        p = sub.add_parser(name, parents=[common], help=help_text)
        inputs(p, config=True)
        p.add_argument("--out", type=Path, help="local root directory (default: .)")
        p.add_argument("--clock", help="fixed ISO-8601 time instead of the system clock")
        p.set_defaults(func=func)
        if name == "run":
            mode = p.add_mutually_exclusive_group()
            mode.add_argument("--materialize-only", action="store_true")
            mode.add_argument("--submit", action="store_true")
            p.add_argument("--parallel", type=int, default=1, metavar="N")

    p = sub.add_parser("submit", parents=[common], help="submit already materialized runs")
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--clock", help="fixed ISO-8601 time instead of the system clock")
    p.add_argument("run_dirs", type=Path, nargs="+", metavar="RUN_DIR")
    p.set_defaults(func=cmd_submit)

    for name, func, help_text in (
        ("validate", cmd_validate, "check workflow graphs"),
        ("dry-run", cmd_dry_run, "print the execution order of a workflow"),
    ):
        p = sub.add_parser(name, parents=[common], help=help_text)
        inputs(p, config=False, template_required=False)
        p.add_argument("--workflow", type=Path, help="check an existing workflow.xml instead")
        p.set_defaults(func=func)

    p = sub.add_parser("mock-server", parents=[common], help="serve a mock jobs endpoint")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=11000)
    p.set_defaults(func=cmd_mock_server)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=max(logging.DEBUG, logging.WARNING - 10 * args.verbose),
        format="chrum: %(levelname)s: %(message)s",
    )
    try:
        return args.func(args)
    except (TemplateError, ConfigError) as exc:
        print(f"chrum: error: {exc}", file=sys.stderr)
        return EXIT_TEMPLATE
    except IoFailure as exc:
        print(f"chrum: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ChrumError as exc:
        print(f"chrum: error: {exc}", file=sys.stderr)
        return EXIT_TEMPLATE
    except OSError as exc:
        print(f"chrum: error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
