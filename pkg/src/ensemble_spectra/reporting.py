"""CSV reports, JSON run manifests and content digests."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

__all__ = [
    "format_value",
    "rows_to_csv",
    "read_csv",
    "write_text",
    "sha256_file",
    "RunManifest",
    "tool_version",
    "utc_now",
]


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def format_value(value) -> str:
    """17 significant digits for floats so values round-trip exactly."""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return format(value, ".17g")
    if hasattr(value, "dtype"):
        return format_value(value.item())
    return str(value)


def rows_to_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        if isinstance(row, dict):
            row = [row[h] for h in header]
        writer.writerow([format_value(v) for v in row])
    return buf.getvalue()


def read_csv(path) -> list[dict]:
    """Rows as dicts of strings; callers convert with float()/int()."""
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(text.encode())
    return path


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int | None
    started: str = field(default_factory=utc_now)
    finished: str | None = None
    version: str = field(default_factory=tool_version)
    outputs: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    def add_output(self, path) -> None:
        path = Path(path)
        self.outputs[str(path)] = sha256_file(path)

    def verify(self) -> bool:
        return all(Path(p).exists() and sha256_file(p) == d for p, d in self.outputs.items())

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "version": self.version,
            "started": self.started,
            "finished": self.finished,
            "outputs": self.outputs,
            "summary": self.summary,
        }

    def write(self, path) -> Path:
        self.finished = self.finished or utc_now()
        return write_text(path, json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "RunManifest":
        data = json.loads(Path(path).read_text())
        return cls(
            command=data["command"],
            config=data["config"],
            seed=data["seed"],
            started=data["started"],
            finished=data["finished"],
            version=data["version"],
            outputs=data["outputs"],
            summary=data.get("summary", {}),
        )
