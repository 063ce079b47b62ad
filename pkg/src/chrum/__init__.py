"""Workflow macro-compiler and experiment manager for Oozie-style workflows."""

from .compiler import compile_document, compile_template
from .emitter import (
    EmittedWorkflow,
    WorkflowGraph,
    dry_run,
    dry_run_events,
    emit_workflow,
    validate_graph,
)
from .errors import ChrumError, ConfigError, IoFailure, TemplateError
from .experiment import (
    ChrumConfig,
    ExperimentPlan,
    LocalDirectoryStorage,
    StorageBackend,
    materialize,
    parse_config,
    plan_experiment,
    write_combination_properties,
)
from .macros import (
    DEFAULT_IDIOMS,
    IdiomRegistry,
    ReplaceTable,
    build_replace_table,
    eval_seq,
    expand_action,
    expand_fork_merge,
    parse_axes,
    resolve_text,
)
from .properties import Combination, PropertySet, enumerate_combinations, parse_properties
from .submit import SubmissionRecord, record_execution, submit
from .template import Block, TemplateDocument, parse_template

__version__ = "0.1.0"

__all__ = [
    "Block",
    "ChrumConfig",
    "ChrumError",
    "Combination",
    "ConfigError",
    "DEFAULT_IDIOMS",
    "EmittedWorkflow",
    "ExperimentPlan",
    "IdiomRegistry",
    "IoFailure",
    "LocalDirectoryStorage",
    "PropertySet",
    "ReplaceTable",
    "StorageBackend",
    "SubmissionRecord",
    "TemplateDocument",
    "TemplateError",
    "WorkflowGraph",
    "build_replace_table",
    "compile_document",
    "compile_template",
    "dry_run",
    "dry_run_events",
    "emit_workflow",
    "enumerate_combinations",
    "eval_seq",
    "expand_action",
    "expand_fork_merge",
    "materialize",
    "parse_axes",
    "parse_config",
    "parse_properties",
    "parse_template",
    "plan_experiment",
    "record_execution",
    "resolve_text",
    "submit",
    "validate_graph",
    "write_combination_properties",
]
