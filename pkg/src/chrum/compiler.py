from __future__ import annotations

from collections.abc import Mapping

from .emitter import EmittedWorkflow, emit_workflow
from .macros import DEFAULT_IDIOMS, IdiomRegistry, ReplaceTable, build_replace_table, expand_document
from .properties import PropertySet
from .template import TemplateDocument, parse_template


def compile_document(
    doc: TemplateDocument,
    properties: PropertySet | Mapping[str, str] | None = None,
    idioms: IdiomRegistry = DEFAULT_IDIOMS,
    table: ReplaceTable | None = None,
) -> EmittedWorkflow:
    if table is None:
        table = build_replace_table(doc)
    return emit_workflow(doc, expand_document(doc, properties, idioms, table))


def compile_template(
    source_text: str,
    properties: PropertySet | Mapping[str, str] | None = None,
    source_name: str = "<template>",
    idioms: IdiomRegistry = DEFAULT_IDIOMS,
) -> EmittedWorkflow:
    """Template text in, validated-for-well-formedness workflow XML out."""
    return compile_document(parse_template(source_text, source_name), properties, idioms)
