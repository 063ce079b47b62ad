"""Stamp execution times and submit runs to an Oozie-style REST endpoint."""

from __future__ import annotations

import json
import logging
import socket
import urllib.error
import urllib.request
import xml.etree.ElementTree as ET
from collections.abc import Mapping
from dataclasses import dataclass, replace

from .errors import IoFailure
from .experiment import (
    RESULTS_DIR,
    ChrumConfig,
    Clock,
    ExperimentPlan,
    LocalDirectoryStorage,
    StorageBackend,
    format_timestamp,
    utc_now,
)
from .properties import EXECUTION_TIME, Combination

log = logging.getLogger(__name__)

APPLICATION_PATH = "oozie.wf.application.path"
JOBS_ENDPOINT = "/oozie/v1/jobs"
CONTENT_TYPE = "application/xml;charset=UTF-8"
DEFAULT_TIMEOUT = 10.0

RECORDED = "recorded"
SUBMITTED = "submitted"
FAILED = "failed"


@dataclass(frozen=True)
class SubmissionRecord:
    label: str
    execution_time: str
    application_path: str
    job_id: str | None = None
    status: str = RECORDED
    reason: str | None = None

    def __str__(self) -> str:
        if self.status == FAILED:
            return f"{FAILED}({self.reason})"
        return self.status


def record_execution(
    plan: ExperimentPlan,
    combo: Combination,
    clock: Clock = utc_now,
    storage: StorageBackend | None = None,
) -> SubmissionRecord:
    """Append ``EXECUTION_TIME`` to the run's properties and open its results directory.

    Calling twice within one clock tick leaves a single line and directory.
    """
    if storage is None:
        storage = LocalDirectoryStorage(plan.config.storage_root)
    stamp = format_timestamp(clock())
    line = f"{EXECUTION_TIME}={stamp}"
    path = plan.properties_file(combo)
    try:
        text = path.read_text(encoding="utf-8")
        if line not in text.splitlines():
            with path.open("a", encoding="utf-8") as fh:
                if text and not text.endswith("\n"):
                    fh.write("\n")
                fh.write(line + "\n")
    except OSError as exc:
        raise IoFailure(path, exc.strerror or str(exc)) from exc

    rel = plan.storage_path(combo)
    try:
        storage.makedirs(rel / RESULTS_DIR / stamp)
    except OSError as exc:
        raise IoFailure(storage.uri(rel), exc.strerror or str(exc)) from exc
    return SubmissionRecord(combo.label, stamp, storage.uri(rel))


def configuration_xml(properties: Mapping[str, str], application_path: str) -> bytes:
    root = ET.Element("configuration")
    items = [(k, v) for k, v in properties.items() if k != APPLICATION_PATH]
    items.append((APPLICATION_PATH, application_path))
    for key, value in items:
        prop = ET.SubElement(root, "property")
        ET.SubElement(prop, "name").text = key
        ET.SubElement(prop, "value").text = value
    return ET.tostring(root, encoding="utf-8", xml_declaration=True)


def jobs_url(config: ChrumConfig) -> str:
    return f"http://{config.server_address}:{config.server_port}{JOBS_ENDPOINT}?action=start"


def submit(
    record: SubmissionRecord,
    config: ChrumConfig,
    properties: Mapping[str, str],
    timeout: float = DEFAULT_TIMEOUT,
) -> SubmissionRecord:
    """POST the run to the jobs endpoint.  Failures come back as ``status == "failed"``."""
    if record.status != RECORDED:
        raise ValueError(f"cannot submit a record in state {record.status!r}")
    values = dict(properties)
    values[EXECUTION_TIME] = record.execution_time
    request = urllib.request.Request(
        jobs_url(config),
        data=configuration_xml(values, record.application_path),
        headers={"Content-Type": CONTENT_TYPE},
        method="POST",
    )

    def failed(reason: str) -> SubmissionRecord:
        log.warning("submission of %s failed: %s", record.label, reason)
        return replace(record, status=FAILED, reason=reason)

    try:
        with urllib.request.urlopen(request, timeout=timeout) as response:
            status, body = response.status, response.read()
    except urllib.error.HTTPError as exc:
        return failed(f"HTTP {exc.code}")
    except urllib.error.URLError as exc:
        return failed(f"connection: {exc.reason}")
    except (socket.timeout, ConnectionError) as exc:
        return failed(f"connection: {exc}")

    if status != 201:
        return failed(f"HTTP {status}")
    try:
        job_id = json.loads(body)["id"]
    except (ValueError, KeyError, TypeError):
        return failed("response carries no job id")
    log.info("submitted %s as %s", record.label, job_id)
    return replace(record, status=SUBMITTED, job_id=str(job_id))
