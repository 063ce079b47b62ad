from __future__ import annotations

import shutil
import sys
from pathlib import Path

import pytest

from chrum.properties import parse_properties

FIXTURES = Path(__file__).parent / "fixtures"

# A reference ACTION block, verbatim.
SAMPLE_ACTION = """\
# BEG:ACTION name=docs2neigh_01 ok=createDocClassif_02 error=kill
    @PIG_START@
        @PR-1@
        @CONFIG-1@
        @WF-1@
    @PIG_END@
# END:ACTION
"""

# A reference REPLACE block, verbatim (including its tab-indented line).
SAMPLE_REPLACE = """\
# BEG:REPLACE @WF-1@
    <script>${pigScriptsDir}/1_MODEL_CREATE_01_docs2neig.pig</script>
    <param>dc_m_double_sample=${dc_m_double_sample}</param>
\t<param>dc_m_hbase_inputDocsData=${dc_m_hbase_inputDocsData}</param>
    <param>dc_m_hdfs_neighs=${dc_m_hdfs_neighs}</param>
    <param>dc_m_int_folds=${dc_m_int_folds}</param>
    @AUXIL@
# END:REPLACE
"""


def read_fixture(name: str) -> str:
    return (FIXTURES / name).read_text(encoding="utf-8")


@pytest.fixture
def fork_sample() -> str:
    return read_fixture("fork_sample.wf.xml")


@pytest.fixture
def action_sample() -> str:
    return read_fixture("action_sample.wf.xml")


@pytest.fixture
def docclassif() -> str:
    return read_fixture("docclassif.wf.xml")


@pytest.fixture
def docclassif_props():
    return parse_properties(read_fixture("docclassif.properties"))


@pytest.fixture
def project_dir(tmp_path: Path) -> Path:
    """A scratch copy of the fixture project with storage under tmp_path."""
    root = tmp_path / "project"
    shutil.copytree(FIXTURES, root)
    return root


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("tests.test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        terminalreporter.write_line(results[number])
