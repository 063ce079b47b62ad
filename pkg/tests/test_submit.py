from __future__ import annotations

import socket
import xml.etree.ElementTree as ET
from dataclasses import replace

import pytest

from chrum.compiler import compile_document
from chrum.errors import IoFailure
from chrum.experiment import RESULTS_DIR, fixed_clock, materialize, parse_config, plan_experiment
from chrum.mockserver import MockOozieServer
from chrum.properties import EXECUTION_TIME, parse_properties, read_flat_properties
from chrum.submit import (
    APPLICATION_PATH,
    CONTENT_TYPE,
    FAILED,
    RECORDED,
    SUBMITTED,
    configuration_xml,
    record_execution,
    submit,
)
from chrum.template import parse_template

from .conftest import read_fixture

T0 = "2026-01-02T03:04:05Z"
T1, T2 = "2026-01-02T05:00:00Z", "2026-01-02T06:30:00Z"


def _free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


@pytest.fixture
def materialized(project_dir):
    config = parse_config(read_fixture("chrum.conf"), base_dir=project_dir)
    props = parse_properties(read_fixture("sweep.properties"))
    plan = plan_experiment(config, props, project_dir / "local", fixed_clock(T0))
    doc = parse_template(read_fixture("docclassif.wf.xml"))
    materialize(plan, {c.label: compile_document(doc, plan.flattened(c)) for c in plan.combinations})
    return plan


def _execution_lines(plan, combo) -> list[str]:
    return [l for l in plan.properties_file(combo).read_text().splitlines() if l.startswith(EXECUTION_TIME + "=")]


# -- record_execution -----------------------------------------------------------


def test_first_run(materialized):
    plan = materialized
    combo = plan.combinations[0]
    record = record_execution(plan, combo, fixed_clock(T1))
    assert record.status == RECORDED
    assert record.execution_time == "20260102-050000"
    assert record.job_id is None
    assert _execution_lines(plan, combo) == ["EXECUTION_TIME=20260102-050000"]
    assert (plan.storage_dir(combo) / RESULTS_DIR / "20260102-050000").is_dir()
    assert record.application_path == str(plan.storage_dir(combo).resolve())


def test_second_run_keeps_history(materialized):
    plan = materialized
    combo = plan.combinations[0]
    record_execution(plan, combo, fixed_clock(T1))
    record_execution(plan, combo, fixed_clock(T2))
    assert _execution_lines(plan, combo) == ["EXECUTION_TIME=20260102-050000", "EXECUTION_TIME=20260102-063000"]
    results = plan.storage_dir(combo) / RESULTS_DIR
    assert sorted(p.name for p in results.iterdir()) == ["20260102-050000", "20260102-063000"]


def test_same_tick_is_idempotent(materialized):
    plan = materialized
    combo = plan.combinations[0]
    before = plan.properties_file(combo).read_text()
    for _ in range(2):
        record_execution(plan, combo, fixed_clock(T1))
    assert plan.properties_file(combo).read_text() == before + "EXECUTION_TIME=20260102-050000\n"
    assert len(list((plan.storage_dir(combo) / RESULTS_DIR).iterdir())) == 1


def test_unwritable_properties_file(materialized):
    plan = materialized
    combo = plan.combinations[0]
    path = plan.properties_file(combo)
    path.unlink()
    path.mkdir()  # reading a directory fails even as root
    with pytest.raises(IoFailure):
        record_execution(plan, combo, fixed_clock(T1))
    assert list((plan.storage_dir(combo) / RESULTS_DIR).iterdir()) == []


# -- submit ---------------------------------------------------------------------------


def test_happy_path(materialized):
    plan = materialized
    combo = plan.combinations[0]
    with MockOozieServer() as server:
        config = replace(plan.config, server_port=server.port)
        record = record_execution(plan, combo, fixed_clock(T1))
        result = submit(record, config, plan.flattened(combo))
    assert (result.status, result.job_id) == (SUBMITTED, "0000001-W")
    (request,) = server.requests
    assert request.path == "/oozie/v1/jobs"
    assert request.query == {"action": ["start"]}
    assert request.headers["Content-Type"] == CONTENT_TYPE
    expected = dict(plan.flattened(combo), EXECUTION_TIME="20260102-050000")
    expected[APPLICATION_PATH] = record.application_path
    assert request.properties == expected


def test_unreachable_server(materialized):
    plan = materialized
    combo = plan.combinations[0]
    config = replace(plan.config, server_port=_free_port())
    record = record_execution(plan, combo, fixed_clock(T1))
    result = submit(record, config, plan.flattened(combo), timeout=2)
    assert result.status == FAILED
    assert result.reason.startswith("connection")
    assert result.job_id is None
    assert str(result).startswith("failed(connection")
    assert _execution_lines(plan, combo) == ["EXECUTION_TIME=20260102-050000"]
    assert (plan.storage_dir(combo) / RESULTS_DIR / "20260102-050000").is_dir()


def test_silent_server_times_out(materialized):
    plan = materialized
    combo = plan.combinations[0]
    with socket.socket() as listener:
        listener.bind(("127.0.0.1", 0))
        listener.listen(1)
        config = replace(plan.config, server_port=listener.getsockname()[1])
        record = record_execution(plan, combo, fixed_clock(T1))
        result = submit(record, config, {}, timeout=0.3)
    assert result.status == FAILED
    assert result.reason.startswith("connection")


@pytest.mark.parametrize(
    "status, payload, reason",
    [(500, {"error": "boom"}, "HTTP 500"), (200, {"id": "x"}, "HTTP 200"), (201, {}, "response carries no job id")],
)
def test_unexpected_responses(materialized, status, payload, reason):
    plan = materialized
    combo = plan.combinations[0]
    with MockOozieServer(responder=lambda request, n: (status, payload)) as server:
        config = replace(plan.config, server_port=server.port)
        result = submit(record_execution(plan, combo, fixed_clock(T1)), config, {})
    assert (result.status, result.reason, result.job_id) == (FAILED, reason, None)


def test_only_recorded_runs_are_submitted(materialized):
    plan = materialized
    record = record_execution(plan, plan.combinations[0], fixed_clock(T1))
    with pytest.raises(ValueError):
        submit(replace(record, status=SUBMITTED), plan.config, {})


def test_six_runs_have_distinct_application_paths(materialized):
    plan = materialized
    with MockOozieServer() as server:
        config = replace(plan.config, server_port=server.port)
        results = [
            submit(record_execution(plan, c, fixed_clock(T1)), config, plan.flattened(c))
            for c in plan.combinations
        ]
    assert [r.status for r in results] == [SUBMITTED] * 6
    assert len(server.requests) == 6
    assert len({r.application_path for r in server.requests}) == 6
    labels = [r.properties["PARAMETER_COMBINATION"] for r in server.requests]
    assert labels == [c.label for c in plan.combinations]
    for request in server.requests:
        # nothing multivalued on the wire
        assert not any(k.startswith("@") or "@" in v for k, v in request.properties.items())
        flat = read_flat_properties(
            (plan.local_root / plan.config.project / plan.compilation_time
             / request.properties["PARAMETER_COMBINATION"] / "job.properties").read_text()
        )
        assert request.properties == {**flat, APPLICATION_PATH: request.application_path}


def test_configuration_body_overrides_user_application_path():
    body = configuration_xml({"a": "1 < 2", APPLICATION_PATH: "/user"}, "/real")
    root = ET.fromstring(body)
    names = [p.findtext("name") for p in root]
    assert names == ["a", APPLICATION_PATH]
    assert root[0].findtext("value") == "1 < 2"
    assert root[1].findtext("value") == "/real"
