"""Oozie-style properties files with multivalued sweep entries.

Two line forms are understood::

    dc_m_int_folds=3
    @var@ val1 val2 val3

The second declares a sweep axis.  :func:`enumerate_combinations` turns the
axes into one flat assignment per run.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field

from .errors import ConfigError, DuplicateKey, EmptyMulti, KeyInBothForms, Location

COMPILATION_TIME = "COMPILATION_TIME"
PARAMETER_COMBINATION = "PARAMETER_COMBINATION"
EXECUTION_TIME = "EXECUTION_TIME"
RESERVED_KEYS = (COMPILATION_TIME, PARAMETER_COMBINATION, EXECUTION_TIME)

DEFAULT_LABEL = "default"

_MULTI_RE = re.compile(r"@([A-Za-z0-9_.-]+)@(.*)\Z")
_UNSAFE_RE = re.compile(r"[^A-Za-z0-9._=-]")


@dataclass(frozen=True)
class PropertySet:
    single: dict[str, str] = field(default_factory=dict)
    multi: dict[str, tuple[str, ...]] = field(default_factory=dict)
    # declaration order across both forms
    order: tuple[str, ...] = ()

    def flatten(self, assignments: dict[str, str]) -> dict[str, str]:
        """Single values plus one chosen value per multi key, in declaration order."""
        flat: dict[str, str] = {}
        for key in self.order:
            flat[key] = self.single[key] if key in self.single else assignments[key]
        return flat


@dataclass(frozen=True)
class Combination:
    assignments: dict[str, str]
    label: str


def parse_properties(text: str, source: str = "<properties>", *, allow_stamps: bool = False) -> PropertySet:
    """Parse a properties file.

    The stamp keys are rejected in user input.  ``allow_stamps`` reads a
    generated file back, where repeated EXECUTION_TIME lines keep the last.
    """
    single: dict[str, str] = {}
    multi: dict[str, tuple[str, ...]] = {}
    order: list[str] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith("!"):
            continue

        match = _MULTI_RE.match(line)
        if match is not None:
            key = match.group(1)
            values = tuple(match.group(2).split())
            if key in single:
                raise KeyInBothForms(key, lineno, source)
            if key in multi:
                raise DuplicateKey(key, lineno, source)
            if not values:
                raise EmptyMulti(key, lineno, source)
            multi[key] = values
        else:
            key, sep, value = line.partition("=")
            key = key.strip()
            if not sep or not key:
                raise ConfigError(
                    f"expected key=value or @key@ values, got {line!r}",
                    Location(source, lineno),
                )
            if allow_stamps and key == EXECUTION_TIME and key in single:
                single[key] = value.strip()
                continue
            if key in multi:
                raise KeyInBothForms(key, lineno, source)
            if key in single:
                raise DuplicateKey(key, lineno, source)
            single[key] = value.strip()

        if key in RESERVED_KEYS and not (allow_stamps and key in single):
            raise ConfigError(f"{key} is stamped automatically", Location(source, lineno))
        order.append(key)

    return PropertySet(single, multi, tuple(order))


def sanitize(value: str) -> str:
    return _UNSAFE_RE.sub("-", value)


def enumerate_combinations(props: PropertySet) -> list[Combination]:
    if not props.multi:
        return [Combination({}, DEFAULT_LABEL)]

    keys = list(props.multi)
    combinations = []
    seen: set[str] = set()
    for values in itertools.product(*(props.multi[k] for k in keys)):
        assignments = dict(zip(keys, values))
        label = "_".join(f"{sanitize(k)}={sanitize(v)}" for k, v in assignments.items())
        # sanitizing can map distinct values onto one label
        if label in seen:
            suffix = 1
            while f"{label}.{suffix}" in seen:
                suffix += 1
            label = f"{label}.{suffix}"
        seen.add(label)
        combinations.append(Combination(assignments, label))
    return combinations


def render_properties(values: dict[str, str]) -> str:
    return "".join(f"{k}={v}\n" for k, v in values.items())


def read_flat_properties(text: str) -> dict[str, str]:
    """Read a flattened file; repeated keys (EXECUTION_TIME history) keep the last value."""
    values: dict[str, str] = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values
