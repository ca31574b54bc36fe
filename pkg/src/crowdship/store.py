"""Embedded record store with atomic conditional updates.

Entities are JSON documents keyed by (kind, id). The default engine is a
single-file SQLite database, so the whole service and its test suite run
with zero external services; the RecordStore base class is the adapter
seam for an external relational database.

The store is the serialization point of the system: a process-wide lock
serializes writes, which makes `conditional_update` a true compare-and-set
and lets callers group multiple writes into one atomic transaction.
"""

from __future__ import annotations

import json
import sqlite3
import threading
import uuid
from contextlib import contextmanager
from typing import Any, Iterator, Optional


class StoreError(Exception):
    pass


class UnknownEntity(StoreError):
    def __init__(self, kind: str, entity_id: str):
        super().__init__(f"no {kind} with id {entity_id}")
        self.kind = kind
        self.entity_id = entity_id


class PreconditionFailed(StoreError):
    """conditional_update predicate did not hold at commit time."""


class StorageIO(StoreError):
    pass


def new_id() -> str:
    return uuid.uuid4().hex


class RecordStore:
    """Interface all storage engines implement."""

    def put(self, kind: str, doc: dict, /, entity_id: Optional[str] = None) -> str:
        raise NotImplementedError

    def get(self, kind: str, entity_id: str, /) -> Optional[dict]:
        raise NotImplementedError

    def list(self, kind: str, /, **filters: Any) -> list[dict]:
        raise NotImplementedError

    def count(self, kind: str, /, **filters: Any) -> int:
        return len(self.list(kind, **filters))

    def delete(self, kind: str, entity_id: str, /) -> bool:
        raise NotImplementedError

    def purge(self, kind: str, /) -> int:
        raise NotImplementedError

    def conditional_update(
        self, kind: str, entity_id: str, /, expect: dict, changes: dict
    ) -> bool:
        """Apply `changes` iff every `expect` field currently matches.

        Returns True on success, False when the predicate failed. Raises
        UnknownEntity when the row does not exist. Atomic under arbitrary
        concurrent callers.
        """
        raise NotImplementedError

    def transaction(self):
        raise NotImplementedError

    def kinds(self) -> list[str]:
        raise NotImplementedError

    def dump(self, fp) -> int:
        """Write every record as one JSON line; returns record count."""
        n = 0
        for kind in self.kinds():
            for doc in self.list(kind):
                fp.write(json.dumps({"kind": kind, "doc": doc}, sort_keys=True) + "\n")
                n += 1
        return n

    def load(self, fp) -> int:
        n = 0
        with self.transaction():
            for line in fp:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                self.put(rec["kind"], rec["doc"], entity_id=rec["doc"]["id"])
                n += 1
        return n

    def close(self) -> None:
        pass


class SqliteStore(RecordStore):
    """SQLite-backed engine. Pass ':memory:' for an ephemeral store."""

    def __init__(self, path: str = ":memory:"):
        self._path = path
        self._lock = threading.RLock()
        self._txn_depth = 0
        try:
            self._conn = sqlite3.connect(
                path, check_same_thread=False, isolation_level=None
            )
            if path != ":memory:":
                self._conn.execute("PRAGMA journal_mode=WAL")
            self._conn.execute("PRAGMA synchronous=NORMAL")
            self._conn.execute(
                "CREATE TABLE IF NOT EXISTS records ("
                " kind TEXT NOT NULL, id TEXT NOT NULL, doc TEXT NOT NULL,"
                " PRIMARY KEY (kind, id))"
            )
        except sqlite3.Error as exc:
            raise StorageIO(f"cannot open store at {path}: {exc}") from exc

    @contextmanager
    def transaction(self) -> Iterator[None]:
        """Group writes atomically; nested blocks join the outer one."""
        with self._lock:
            outer = self._txn_depth == 0
            if outer:
                self._conn.execute("BEGIN IMMEDIATE")
            self._txn_depth += 1
            try:
                yield
            except BaseException:
                self._txn_depth -= 1
                if outer:
                    self._conn.execute("ROLLBACK")
                raise
            else:
                self._txn_depth -= 1
                if outer:
                    self._conn.execute("COMMIT")

    def put(self, kind: str, doc: dict, /, entity_id: Optional[str] = None) -> str:
        entity_id = entity_id or doc.get("id") or new_id()
        doc = dict(doc, id=entity_id)
        with self._lock:
            try:
                self._conn.execute(
                    "INSERT INTO records (kind, id, doc) VALUES (?, ?, ?)"
                    " ON CONFLICT (kind, id) DO UPDATE SET doc = excluded.doc",
                    (kind, entity_id, json.dumps(doc)),
                )
            except sqlite3.Error as exc:
                raise StorageIO(str(exc)) from exc
        return entity_id

    def get(self, kind: str, entity_id: str, /) -> Optional[dict]:
        with self._lock:
            row = self._conn.execute(
                "SELECT doc FROM records WHERE kind = ? AND id = ?",
                (kind, entity_id),
            ).fetchone()
        return json.loads(row[0]) if row else None

    def list(self, kind: str, /, **filters: Any) -> list[dict]:
        clauses = ["kind = ?"]
        params: list[Any] = [kind]
        for field_name, value in filters.items():
            expr = f"json_extract(doc, '$.{field_name}')"
            if value is None:
                clauses.append(f"{expr} IS NULL")
            else:
                clauses.append(f"{expr} = ?")
                params.append(int(value) if isinstance(value, bool) else value)
        sql = f"SELECT doc FROM records WHERE {' AND '.join(clauses)} ORDER BY rowid"
        with self._lock:
            rows = self._conn.execute(sql, params).fetchall()
        return [json.loads(r[0]) for r in rows]

    def delete(self, kind: str, entity_id: str, /) -> bool:
        with self._lock:
            cur = self._conn.execute(
                "DELETE FROM records WHERE kind = ? AND id = ?", (kind, entity_id)
            )
        return cur.rowcount > 0

    def purge(self, kind: str, /) -> int:
        with self._lock:
            cur = self._conn.execute("DELETE FROM records WHERE kind = ?", (kind,))
        return cur.rowcount

    def conditional_update(
        self, kind: str, entity_id: str, /, expect: dict, changes: dict
    ) -> bool:
        with self._lock, self.transaction():
            doc = self.get(kind, entity_id)
            if doc is None:
                raise UnknownEntity(kind, entity_id)
            for field_name, expected in expect.items():
                if doc.get(field_name) != expected:
                    return False
            doc.update(changes)
            self.put(kind, doc, entity_id=entity_id)
            return True

    def kinds(self) -> list[str]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT DISTINCT kind FROM records ORDER BY kind"
            ).fetchall()
        return [r[0] for r in rows]

    def checkpoint(self) -> None:
        """Flush the WAL into the main database file."""
        with self._lock:
            self._conn.execute("PRAGMA wal_checkpoint(TRUNCATE)")

    def close(self) -> None:
        with self._lock:
            self._conn.close()
