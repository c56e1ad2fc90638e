"""Line-delimited JSON helpers used by the CLI and services."""
from __future__ import annotations

import json
from pathlib import Path

from .errors import InputMissing


def read_jsonl(path: str | Path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise InputMissing(f"file not found: {path}")
    with path.open() as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_jsonl(records, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")


def append_jsonl(record: dict, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("a") as fh:
        fh.write(json.dumps(record) + "\n")
