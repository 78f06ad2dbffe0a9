"""Append-only JSONL record store with an in-memory (run_id, key) index."""

from __future__ import annotations

import fcntl
import json
import os
import threading
from pathlib import Path
from typing import Any, Iterator

KINDS = ("candidates", "failures", "judgments", "rollouts", "rewards", "evals")


class _Log:
    """One ``<kind>.jsonl`` file plus its index.

    Each entry is written as a single line with one ``write`` and fsync'd
    before the index is updated, so a reader either sees the whole record
    or nothing. A partial trailing line (a crashed writer) is ignored.
    """

    def __init__(self, path: Path):
        self.path = path
        self.offset = 0
        self.index: dict[tuple[str, str], dict[str, Any]] = {}
        self.order: list[tuple[str, str]] = []

    def refresh(self) -> None:
        if not self.path.exists():
            return
        with self.path.open("rb") as fh:
            fh.seek(self.offset)
            chunk = fh.read()
        end = chunk.rfind(b"\n")
        if end < 0:
            return
        for line in chunk[:end].split(b"\n"):
            if line.strip():
                self._index(json.loads(line))
        self.offset += end + 1

    def _index(self, entry: dict[str, Any]) -> None:
        ident = (entry["run_id"], entry["key"])
        if ident not in self.index:
            self.index[ident] = entry
            self.order.append(ident)


class TrajectoryStore:
    """Immutable records keyed by ``(run_id, key)`` in per-kind JSONL logs.

    Appending an existing key is a no-op that returns False, which is what
    makes every pipeline command resumable. One writer per store is
    expected; the file lock only guards against accidental concurrent use.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._logs = {k: _Log(self.root / f"{k}.jsonl") for k in KINDS}
        self._lock = threading.Lock()

    def _log(self, kind: str) -> _Log:
        try:
            log = self._logs[kind]
        except KeyError:
            raise ValueError(f"unknown record kind {kind!r}") from None
        log.refresh()
        return log

    def append(self, kind: str, key: str, data: dict[str, Any], *, run_id: str = "default",
               query_id: str | None = None) -> bool:
        entry = {"run_id": run_id, "key": key, "query_id": query_id, "data": data}
        line = (json.dumps(entry, ensure_ascii=False, sort_keys=True) + "\n").encode("utf-8")
        with self._lock:
            log = self._log(kind)
            with log.path.open("ab") as fh:
                fcntl.flock(fh, fcntl.LOCK_EX)
                try:
                    log.refresh()
                    if (run_id, key) in log.index:
                        return False
                    fh.write(line)
                    fh.flush()
                    os.fsync(fh.fileno())
                finally:
                    fcntl.flock(fh, fcntl.LOCK_UN)
            log.refresh()
        return True

    def has(self, kind: str, key: str, run_id: str = "default") -> bool:
        return (run_id, key) in self._log(kind).index

    def get(self, kind: str, key: str, run_id: str = "default") -> dict[str, Any] | None:
        entry = self._log(kind).index.get((run_id, key))
        return entry["data"] if entry else None

    def entries(self, kind: str, run_id: str | None = None) -> Iterator[dict[str, Any]]:
        """Entries in write order, optionally restricted to one run."""
        log = self._log(kind)
        for ident in list(log.order):
            if run_id is None or ident[0] == run_id:
                yield log.index[ident]

    def records(self, kind: str, run_id: str | None = None) -> list[dict[str, Any]]:
        return [e["data"] for e in self.entries(kind, run_id)]

    def by_query(self, kind: str, query_id: str, run_id: str | None = None) -> list[dict[str, Any]]:
        return [e["data"] for e in self.entries(kind, run_id) if e["query_id"] == query_id]

    def count(self, kind: str, run_id: str | None = None) -> int:
        return sum(1 for _ in self.entries(kind, run_id))
