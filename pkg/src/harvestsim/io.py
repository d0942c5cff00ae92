"""Scenario files, CSV traces and run manifests.

A scenario file is YAML: a mandatory ``version`` plus the scenario fields
(every physical key carries its unit in the name) and an optional list of
``outputs`` naming the traces to export.
"""

from __future__ import annotations

import csv
import hashlib
import json
import platform
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np
import yaml
from pydantic import ValidationError

from . import __version__
from .scenarios import HarvesterScenario

SCHEMA_VERSION = 1


class ScenarioFileError(ValueError):
    """A scenario document failed to parse or validate; ``problems`` lists every key."""

    def __init__(self, source: str, problems: list[str]):
        self.source = source
        self.problems = problems
        super().__init__(f"{source}: " + "; ".join(problems))


class ScenarioFile(HarvesterScenario):
    version: Literal[1]
    outputs: tuple[str, ...] | None = None

    @property
    def scenario(self) -> HarvesterScenario:
        return HarvesterScenario.model_validate(
            self.model_dump(exclude={"version", "outputs"}))


def _problems(exc: ValidationError) -> list[str]:
    out = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<document>"
        out.append(f"{loc}: {err['msg']}")
    return out


def parse_scenario(text: str, source: str = "<string>") -> ScenarioFile:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioFileError(source, [f"not valid YAML ({exc})".replace("\n", " ")]) from None
    if not isinstance(data, dict):
        raise ScenarioFileError(source, ["document must be a mapping"])
    if "version" not in data:
        raise ScenarioFileError(source, ["version: field required"])
    try:
        return ScenarioFile.model_validate(data)
    except ValidationError as exc:
        raise ScenarioFileError(source, _problems(exc)) from None


def load_scenario(path) -> ScenarioFile:
    path = Path(path)
    return parse_scenario(path.read_text(encoding="utf-8"), str(path))


def serialize_scenario(sf: ScenarioFile | HarvesterScenario) -> str:
    if not isinstance(sf, ScenarioFile):
        sf = ScenarioFile(version=SCHEMA_VERSION, **sf.model_dump())
    data = sf.model_dump(mode="json", exclude_none=True)
    data = {"version": data.pop("version"), **data}
    return yaml.safe_dump(data, sort_keys=False, allow_unicode=True)


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# --- CSV ---------------------------------------------------------------------

def write_table(path, header, columns) -> Path:
    """Write equal-length numeric columns under ``header``.

    Values use the shortest repr that round-trips, so reading the file back
    reproduces every double bit for bit.
    """
    path = Path(path)
    data = [np.asarray(c, dtype=float) for c in (columns.T if isinstance(columns, np.ndarray)
                                                  else columns)]
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(list(header))
            for row in zip(*data):
                writer.writerow([repr(float(v)) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    return path


def export_csv(time: np.ndarray, traces: dict, path, columns=None) -> Path:
    """Write ``time_s`` plus the requested trace columns (all traces by default)."""
    columns = list(traces) if columns is None else list(columns)
    missing = [c for c in columns if c not in traces]
    if missing:
        raise KeyError(f"unknown trace(s): {', '.join(missing)}")
    return write_table(path, ["time_s", *columns], [time] + [traces[c] for c in columns])


def read_csv(path) -> dict[str, np.ndarray]:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    arr = np.array(rows, dtype=float).reshape(-1, len(header))
    return {name: arr[:, j] for j, name in enumerate(header)}


# --- manifest ----------------------------------------------------------------

@dataclass
class RunManifest:
    scenario: str
    scenario_sha256: str
    solver: dict
    artifact_version: str = __version__
    wall_time_s: float = 0.0
    outputs: list = field(default_factory=list)
    seed: int | None = None
    python: str = field(default_factory=platform.python_version)

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(asdict(self), indent=2) + "\n", encoding="utf-8")
        return path
