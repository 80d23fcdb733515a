"""Line-delimited record store used between pipeline stages.

Records are self-describing JSON objects, one per line, each carrying a
``schema_version`` and a ``kind`` tag. Writers emit canonical JSON (sorted
keys, compact separators) so reruns with the same inputs produce identical
bytes. Readers filter by kind, which lets a single file carry both payload
records and status records.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .errors import DataError

SCHEMA_VERSION = 1

_EPOCH = dt.datetime(1970, 1, 1)


def naive_epoch(stamp: dt.datetime | str) -> float:
    """Seconds since 1970-01-01 for a timezone-naive datetime.

    Accepts an ISO string for convenience. Avoids ``datetime.timestamp()``
    which applies the host timezone.
    """
    if isinstance(stamp, str):
        stamp = dt.datetime.fromisoformat(stamp)
    return (stamp - _EPOCH).total_seconds()


def dumps_record(record: dict) -> str:
    payload = dict(record)
    payload.setdefault("schema_version", SCHEMA_VERSION)
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def write_records(path: str | Path, records: Iterable[dict]) -> int:
    """Write records to a fresh file, one canonical JSON object per line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(dumps_record(record) + "\n")
            n += 1
    return n


def append_records(path: str | Path, records: Iterable[dict]) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with open(path, "a", encoding="utf-8") as fh:
        for record in records:
            fh.write(dumps_record(record) + "\n")
            n += 1
    return n


def read_records(path: str | Path, kind: str | None = None) -> list[dict]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"record file not found: {path}")
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid record: {exc}") from exc
            version = record.get("schema_version")
            if version != SCHEMA_VERSION:
                raise DataError(
                    f"{path}:{lineno}: unsupported schema_version {version!r}"
                )
            if kind is not None and record.get("kind") != kind:
                continue
            out.append(record)
    return out


@dataclass(frozen=True)
class CommitMeta:
    """One deployed software revision as recorded by the CI system."""

    hash: str
    deploy_time: str  # naive ISO timestamp
    message: str
    files_changed: int
    lines_added: int
    lines_deleted: int

    @property
    def deploy_epoch(self) -> float:
        return naive_epoch(dt.datetime.fromisoformat(self.deploy_time))


def load_commits(path: str | Path) -> list[CommitMeta]:
    """Read commit metadata records sorted by deploy time."""
    metas = []
    for record in read_records(path, kind="commit"):
        try:
            metas.append(
                CommitMeta(
                    hash=record["hash"],
                    deploy_time=record["deploy_time"],
                    message=record["message"],
                    files_changed=int(record["files_changed"]),
                    lines_added=int(record["lines_added"]),
                    lines_deleted=int(record["lines_deleted"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}: malformed commit record: {exc}") from exc
    if not metas:
        raise DataError(f"{path}: no commit records")
    metas.sort(key=lambda m: (m.deploy_epoch, m.hash))
    return metas
