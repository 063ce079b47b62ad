"""Experiment manager: per-combination properties and directory layout.

Every run of the manager gets one compilation timestamp.  Each parameter
combination then lives in its own directory, both locally and on the
storage side::

    LOCAL/PROJECT/COMPILATION_TIME/PARAMETER_COMBINATION/
        job.properties  workflow.xml  submission.json
    STORAGE/PROJECT/COMPILATION_TIME/PARAMETER_COMBINATION/
        workflow.xml  <configured folders>/  results/
"""

from __future__ import annotations

import json
import logging
import os
import re
import shutil
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path, PurePosixPath

from .emitter import EmittedWorkflow, validate_graph
from .errors import (
    BadPort,
    ConfigError,
    DuplicateKey,
    InvalidWorkflow,
    IoFailure,
    Location,
    MissingKey,
    SourceMissing,
)
from .properties import (
    COMPILATION_TIME,
    PARAMETER_COMBINATION,
    Combination,
    PropertySet,
    enumerate_combinations,
    render_properties,
)

log = logging.getLogger(__name__)

PROPERTIES_FILE = "job.properties"
WORKFLOW_FILE = "workflow.xml"
MANIFEST_FILE = "submission.json"
RESULTS_DIR = "results"
TIMESTAMP_FORMAT = "%Y%m%d-%H%M%S"

_CONFIG_KEYS = ("project", "storage_root", "scripts", "server")
_FOLDER_RE = re.compile(r"folder\s+(\S+)\s*<-\s*(\S.*)\Z")
_RESERVED_FOLDERS = (RESULTS_DIR, WORKFLOW_FILE)

Clock = Callable[[], datetime]


def utc_now() -> datetime:
    return datetime.now(timezone.utc)


def format_timestamp(moment: datetime) -> str:
    if moment.tzinfo is not None:
        moment = moment.astimezone(timezone.utc)
    return moment.strftime(TIMESTAMP_FORMAT)


def parse_instant(text: str) -> datetime:
    """Parse an ISO-8601 instant; naive values are taken as UTC."""
    text = text.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    moment = datetime.fromisoformat(text)
    if moment.tzinfo is None:
        moment = moment.replace(tzinfo=timezone.utc)
    return moment


def fixed_clock(moment: datetime | str) -> Clock:
    if isinstance(moment, str):
        moment = parse_instant(moment)
    return lambda: moment


# -- configuration ------------------------------------------------------------------


@dataclass(frozen=True)
class ChrumConfig:
    project: str
    storage_root: Path
    trigger_scripts_path: Path
    server_address: str
    server_port: int
    folder_mappings: tuple[tuple[str, Path], ...] = ()

    @property
    def server(self) -> str:
        return f"{self.server_address}:{self.server_port}"


def parse_config(text: str, source: str = "<config>", base_dir: Path | None = None) -> ChrumConfig:
    """Parse the line-oriented configuration file.

    Relative paths are resolved against ``base_dir`` when it is given.
    """
    values: dict[str, tuple[str, int]] = {}
    folders: list[tuple[str, Path]] = []

    def path_of(raw: str) -> Path:
        path = Path(raw).expanduser()
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return path

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        folder = _FOLDER_RE.match(line)
        if folder is not None:
            name, src = folder.group(1), folder.group(2).strip()
            if "/" in name or "\\" in name or name in (".", "..") or name in _RESERVED_FOLDERS:
                raise ConfigError(f"bad folder name {name!r}", Location(source, lineno))
            if any(name == existing for existing, _ in folders):
                raise DuplicateKey(f"folder {name}", lineno, source)
            folders.append((name, path_of(src)))
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep:
            raise ConfigError(f"cannot parse line {line!r}", Location(source, lineno))
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"unknown key {key!r}", Location(source, lineno))
        if key in values:
            raise DuplicateKey(key, lineno, source)
        values[key] = (value, lineno)

    for key in _CONFIG_KEYS:
        if key not in values or not values[key][0]:
            raise MissingKey(key, source)

    project, lineno = values["project"]
    if "/" in project or "\\" in project or project in (".", ".."):
        raise ConfigError(f"project name {project!r} must not contain path separators",
                          Location(source, lineno))

    server, lineno = values["server"]
    host, sep, port_text = server.rpartition(":")
    if not sep or not host:
        raise BadPort(server, lineno, source)
    try:
        port = int(port_text)
    except ValueError:
        raise BadPort(port_text, lineno, source) from None
    if not 0 < port < 65536:
        raise BadPort(port_text, lineno, source)

    return ChrumConfig(
        project=project,
        storage_root=path_of(values["storage_root"][0]),
        trigger_scripts_path=path_of(values["scripts"][0]),
        server_address=host,
        server_port=port,
        folder_mappings=tuple(folders),
    )


# -- storage ------------------------------------------------------------------------


class StorageBackend:
    """Where workflows, libraries and results go.  Paths are POSIX-relative."""

    def makedirs(self, rel: PurePosixPath) -> None:
        raise NotImplementedError

    def write_bytes(self, rel: PurePosixPath, data: bytes) -> None:
        raise NotImplementedError

    def put(self, local_source: Path, rel: PurePosixPath) -> int:
        """Copy a local file or directory tree; returns the number of files written."""
        raise NotImplementedError

    def exists(self, rel: PurePosixPath) -> bool:
        raise NotImplementedError

    def uri(self, rel: PurePosixPath) -> str:
        raise NotImplementedError


class LocalDirectoryStorage(StorageBackend):
    """A local directory tree standing in for HDFS."""

    def __init__(self, root: Path) -> None:
        self.root = Path(root)

    def _path(self, rel: PurePosixPath) -> Path:
        return self.root.joinpath(*PurePosixPath(rel).parts)

    def makedirs(self, rel: PurePosixPath) -> None:
        self._path(rel).mkdir(parents=True, exist_ok=True)

    def write_bytes(self, rel: PurePosixPath, data: bytes) -> None:
        target = self._path(rel)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(data)

    def put(self, local_source: Path, rel: PurePosixPath) -> int:
        target = self._path(rel)
        if local_source.is_dir():
            shutil.copytree(local_source, target, dirs_exist_ok=True)
            return sum(1 for p in local_source.rglob("*") if p.is_file())
        target.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(local_source, target / local_source.name)
        return 1

    def exists(self, rel: PurePosixPath) -> bool:
        return self._path(rel).exists()

    def uri(self, rel: PurePosixPath) -> str:
        return str(self._path(rel).resolve())


# -- plan ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentPlan:
    config: ChrumConfig
    compilation_time: str
    combinations: tuple[Combination, ...]
    local_root: Path
    properties: PropertySet = field(default_factory=PropertySet)

    def local_dir(self, combo: Combination) -> Path:
        return self.local_root / self.config.project / self.compilation_time / combo.label

    def storage_path(self, combo: Combination) -> PurePosixPath:
        return PurePosixPath(self.config.project, self.compilation_time, combo.label)

    def storage_dir(self, combo: Combination) -> Path:
        return self.config.storage_root / self.config.project / self.compilation_time / combo.label

    def properties_file(self, combo: Combination) -> Path:
        return self.local_dir(combo) / PROPERTIES_FILE

    def flattened(self, combo: Combination) -> dict[str, str]:
        """The combination's properties including both compile-time stamps."""
        values = self.properties.flatten(combo.assignments)
        values[COMPILATION_TIME] = self.compilation_time
        values[PARAMETER_COMBINATION] = combo.label
        return values


def plan_experiment(
    config: ChrumConfig,
    properties: PropertySet,
    local_root: Path,
    clock: Clock = utc_now,
) -> ExperimentPlan:
    return ExperimentPlan(
        config=config,
        compilation_time=format_timestamp(clock()),
        combinations=tuple(enumerate_combinations(properties)),
        local_root=Path(local_root),
        properties=properties,
    )


def write_combination_properties(
    plan: ExperimentPlan, combo: Combination, props: PropertySet | None = None
) -> Path:
    if props is not None and props is not plan.properties:
        plan = replace(plan, properties=props)
    path = plan.properties_file(combo)
    try:
        path.write_text(render_properties(plan.flattened(combo)), encoding="utf-8")
    except OSError as exc:
        raise IoFailure(path, exc.strerror or str(exc)) from exc
    return path


def manifest(plan: ExperimentPlan, combo: Combination) -> dict:
    """Everything a later submission needs, with no machine-specific paths."""
    return {
        "project": plan.config.project,
        "compilation_time": plan.compilation_time,
        "parameter_combination": combo.label,
        "assignments": combo.assignments,
        "storage_path": str(plan.storage_path(combo)),
        "server": plan.config.server,
        "properties_file": PROPERTIES_FILE,
        "workflow": WORKFLOW_FILE,
    }


@dataclass
class MaterializationReport:
    local_files: int = 0
    storage_files: int = 0
    directories: list[str] = field(default_factory=list)

    @property
    def files_written(self) -> int:
        return self.local_files + self.storage_files


def materialize_combination(
    plan: ExperimentPlan,
    combo: Combination,
    workflow: EmittedWorkflow,
    storage: StorageBackend,
) -> MaterializationReport:
    violations = validate_graph(workflow.graph)
    if violations:
        raise InvalidWorkflow(violations)
    report = MaterializationReport()
    xml_bytes = workflow.xml_text.encode("utf-8")

    local_dir = plan.local_dir(combo)
    try:
        local_dir.mkdir(parents=True, exist_ok=True)
        write_combination_properties(plan, combo)
        (local_dir / WORKFLOW_FILE).write_bytes(xml_bytes)
        (local_dir / MANIFEST_FILE).write_text(
            json.dumps(manifest(plan, combo), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    except OSError as exc:
        raise IoFailure(local_dir, exc.strerror or str(exc)) from exc
    report.local_files += 3

    rel = plan.storage_path(combo)
    for name, source in plan.config.folder_mappings:
        if not source.exists():
            raise SourceMissing(name, source)
    try:
        storage.makedirs(rel)
        storage.write_bytes(rel / WORKFLOW_FILE, xml_bytes)
        report.storage_files += 1
        for name, source in plan.config.folder_mappings:
            report.storage_files += storage.put(source, rel / name)
        storage.makedirs(rel / RESULTS_DIR)
    except OSError as exc:
        raise IoFailure(storage.uri(rel), exc.strerror or str(exc)) from exc
    report.directories.append(str(rel))
    log.info("materialized %s", rel)
    return report


def materialize(
    plan: ExperimentPlan,
    workflows: Mapping[str, EmittedWorkflow],
    storage: StorageBackend | None = None,
) -> MaterializationReport:
    """Materialize every combination whose label has a workflow in ``workflows``."""
    if storage is None:
        storage = LocalDirectoryStorage(plan.config.storage_root)
    total = MaterializationReport()
    for combo in plan.combinations:
        if combo.label not in workflows:
            continue
        part = materialize_combination(plan, combo, workflows[combo.label], storage)
        total.local_files += part.local_files
        total.storage_files += part.storage_files
        total.directories.extend(part.directories)
    return total


def storage_root_override(config: ChrumConfig, environ: Mapping[str, str] = os.environ) -> ChrumConfig:
    root = environ.get("CHRUM_STORAGE_ROOT")
    if not root:
        return config
    return replace(config, storage_root=Path(root))
