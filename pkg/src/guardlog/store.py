"""Durable, atomic, append-only persistence on SQLite (WAL mode).

One writer (the committer) drives explicit transactions; committed events are
never updated or deleted through this interface — the event table simply has
no mutation methods. The raw tamper helper at the bottom exists solely so the
adversarial harness can demonstrate that out-of-band mutation is detected.
"""

from __future__ import annotations

import json
import sqlite3
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Tuple

from .canonical import canonical_encode
from .errors import ConsistencyError, NotFound
from .model import ActionType, Event

_SCHEMA = """
CREATE TABLE IF NOT EXISTS events (
    seq INTEGER PRIMARY KEY,
    id TEXT NOT NULL UNIQUE,
    actor TEXT NOT NULL,
    type TEXT NOT NULL,
    target TEXT NOT NULL,
    payload TEXT NOT NULL,
    payload_hash BLOB NOT NULL,
    timestamp INTEGER NOT NULL,
    artifact_hash BLOB,
    reserved_energy INTEGER NOT NULL,
    settled_energy INTEGER NOT NULL,
    event_hash BLOB NOT NULL
);
CREATE INDEX IF NOT EXISTS events_actor ON events (actor, seq);
CREATE INDEX IF NOT EXISTS events_target ON events (target, seq);
CREATE INDEX IF NOT EXISTS events_time ON events (timestamp, seq);
CREATE TABLE IF NOT EXISTS tree_nodes (
    level INTEGER NOT NULL,
    idx INTEGER NOT NULL,
    digest BLOB NOT NULL,
    PRIMARY KEY (level, idx)
);
CREATE TABLE IF NOT EXISTS actors (
    id TEXT PRIMARY KEY,
    kind TEXT NOT NULL,
    creator TEXT,
    purpose TEXT,
    expiry INTEGER,
    share INTEGER NOT NULL,
    status TEXT NOT NULL,
    writable TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS balances (
    actor TEXT PRIMARY KEY,
    available INTEGER NOT NULL,
    reserved INTEGER NOT NULL
);
CREATE TABLE IF NOT EXISTS envelopes (
    id TEXT PRIMARY KEY,
    issuer TEXT NOT NULL,
    holder TEXT NOT NULL,
    budget INTEGER NOT NULL,
    consumed INTEGER NOT NULL,
    reserved INTEGER NOT NULL,
    refunded_in INTEGER NOT NULL,
    carved INTEGER NOT NULL,
    refunded_out INTEGER NOT NULL,
    targets TEXT NOT NULL,
    actions TEXT NOT NULL,
    issued_at INTEGER NOT NULL,
    expires_at INTEGER,
    checkpoint INTEGER,
    hold_on TEXT NOT NULL,
    hold_timeout_secs INTEGER,
    state TEXT NOT NULL,
    parent TEXT
);
CREATE TABLE IF NOT EXISTS holds (
    id TEXT PRIMARY KEY,
    envelope TEXT NOT NULL,
    actor TEXT NOT NULL,
    type TEXT NOT NULL,
    target TEXT NOT NULL,
    payload TEXT NOT NULL,
    action_timestamp INTEGER NOT NULL,
    reserved_cost INTEGER NOT NULL,
    created_at INTEGER NOT NULL,
    state TEXT NOT NULL,
    request_event_seq INTEGER NOT NULL,
    decider TEXT,
    decided_at INTEGER
);
CREATE TABLE IF NOT EXISTS checkpoints (
    size INTEGER PRIMARY KEY,
    note BLOB NOT NULL
);
CREATE TABLE IF NOT EXISTS meta (
    key TEXT PRIMARY KEY,
    value TEXT NOT NULL
);
"""


def _row_to_event(row: sqlite3.Row) -> Event:
    return Event(
        id=row["id"],
        seq=row["seq"],
        actor=row["actor"],
        type=ActionType(row["type"]),
        target=row["target"],
        payload=json.loads(row["payload"]),
        payload_hash=row["payload_hash"],
        timestamp=row["timestamp"],
        artifact_hash=row["artifact_hash"],
        reserved_energy=row["reserved_energy"],
        settled_energy=row["settled_energy"],
        event_hash=row["event_hash"],
    )


class Store:
    """Single-connection store; the kernel serializes all access."""

    def __init__(self, path: str) -> None:
        self.path = path
        self._conn = sqlite3.connect(path, check_same_thread=False, isolation_level=None)
        self._conn.row_factory = sqlite3.Row
        self._conn.execute("PRAGMA journal_mode=WAL")
        self._conn.execute("PRAGMA synchronous=NORMAL")
        self._conn.execute("PRAGMA foreign_keys=ON")
        self._conn.executescript(_SCHEMA)
        self._in_tx = False

    def close(self) -> None:
        self._conn.close()

    # -- transactions ------------------------------------------------------

    def begin(self) -> None:
        if self._in_tx:
            raise ConsistencyError("transaction already open")
        self._conn.execute("BEGIN IMMEDIATE")
        self._in_tx = True

    def commit(self) -> None:
        if not self._in_tx:
            raise ConsistencyError("no open transaction")
        self._conn.execute("COMMIT")
        self._in_tx = False

    def abort(self) -> None:
        if not self._in_tx:
            return
        self._conn.execute("ROLLBACK")
        self._in_tx = False

    # -- events (append + read only; no mutation interface exists) ---------

    def event_count(self) -> int:
        (n,) = self._conn.execute("SELECT COUNT(*) FROM events").fetchone()
        return n

    def append_event(self, e: Event) -> None:
        current = self.event_count()
        if e.seq != current + 1:
            raise ConsistencyError(f"append seq {e.seq} but log length is {current}")
        self._conn.execute(
            "INSERT INTO events (seq, id, actor, type, target, payload, payload_hash,"
            " timestamp, artifact_hash, reserved_energy, settled_energy, event_hash)"
            " VALUES (?,?,?,?,?,?,?,?,?,?,?,?)",
            (
                e.seq,
                e.id,
                e.actor,
                e.type.value,
                e.target,
                canonical_encode(e.payload).decode("utf-8"),
                e.payload_hash,
                e.timestamp,
                e.artifact_hash,
                e.reserved_energy,
                e.settled_energy,
                e.event_hash,
            ),
        )

    def get_event(self, seq: int) -> Event:
        row = self._conn.execute("SELECT * FROM events WHERE seq=?", (seq,)).fetchone()
        if row is None:
            raise NotFound(f"no event with seq {seq}")
        return _row_to_event(row)

    def get_event_by_id(self, event_id: str) -> Event:
        row = self._conn.execute("SELECT * FROM events WHERE id=?", (event_id,)).fetchone()
        if row is None:
            raise NotFound(f"no event with id {event_id}")
        return _row_to_event(row)

    def read_events(
        self,
        seq_from: Optional[int] = None,
        seq_to: Optional[int] = None,
        actor: Optional[str] = None,
        target_prefix: Optional[str] = None,
        time_from: Optional[int] = None,
        time_to: Optional[int] = None,
    ) -> List[Event]:
        clauses = []
        args: List[Any] = []
        if seq_from is not None:
            clauses.append("seq >= ?")
            args.append(seq_from)
        if seq_to is not None:
            clauses.append("seq <= ?")
            args.append(seq_to)
        if actor is not None:
            clauses.append("actor = ?")
            args.append(actor)
        if target_prefix is not None:
            clauses.append("(target = ? OR target LIKE ?)")
            args.extend([target_prefix, target_prefix + "/%"])
        if time_from is not None:
            clauses.append("timestamp >= ?")
            args.append(time_from)
        if time_to is not None:
            clauses.append("timestamp <= ?")
            args.append(time_to)
        sql = "SELECT * FROM events"
        if clauses:
            sql += " WHERE " + " AND ".join(clauses)
        sql += " ORDER BY seq"
        return [_row_to_event(r) for r in self._conn.execute(sql, args)]

    def last_event_timestamp(self) -> int:
        row = self._conn.execute("SELECT MAX(timestamp) FROM events").fetchone()
        return row[0] or 0

    # -- tree nodes (NodeStore protocol) ------------------------------------

    def get_node(self, level: int, index: int) -> Optional[bytes]:
        row = self._conn.execute(
            "SELECT digest FROM tree_nodes WHERE level=? AND idx=?", (level, index)
        ).fetchone()
        return row["digest"] if row else None

    def put_node(self, level: int, index: int, digest: bytes) -> None:
        # Nodes are content-addressed by position; never overwritten.
        self._conn.execute(
            "INSERT OR IGNORE INTO tree_nodes (level, idx, digest) VALUES (?,?,?)",
            (level, index, digest),
        )

    # -- actors --------------------------------------------------------------

    def put_actor(self, doc: Dict[str, Any]) -> None:
        self._conn.execute(
            "INSERT INTO actors (id, kind, creator, purpose, expiry, share, status, writable)"
            " VALUES (?,?,?,?,?,?,?,?)",
            (
                doc["id"],
                doc["kind"],
                doc.get("creator"),
                doc.get("purpose"),
                doc.get("expiry"),
                doc["share"],
                doc["status"],
                json.dumps(doc["writable"]),
            ),
        )

    def get_actor(self, actor_id: str) -> Optional[Dict[str, Any]]:
        row = self._conn.execute("SELECT * FROM actors WHERE id=?", (actor_id,)).fetchone()
        if row is None:
            return None
        doc = dict(row)
        doc["writable"] = json.loads(doc["writable"])
        return doc

    def list_actors(self) -> List[Dict[str, Any]]:
        rows = self._conn.execute("SELECT * FROM actors ORDER BY id").fetchall()
        out = []
        for row in rows:
            doc = dict(row)
            doc["writable"] = json.loads(doc["writable"])
            out.append(doc)
        return out

    def set_actor_status(self, actor_id: str, status: str) -> None:
        self._conn.execute("UPDATE actors SET status=? WHERE id=?", (status, actor_id))

    # -- balances ------------------------------------------------------------

    def get_balance(self, actor_id: str) -> Tuple[int, int]:
        row = self._conn.execute(
            "SELECT available, reserved FROM balances WHERE actor=?", (actor_id,)
        ).fetchone()
        return (row["available"], row["reserved"]) if row else (0, 0)

    def set_balance(self, actor_id: str, available: int, reserved: int) -> None:
        if available < 0 or reserved < 0:
            raise ConsistencyError(f"negative balance for {actor_id}")
        self._conn.execute(
            "INSERT INTO balances (actor, available, reserved) VALUES (?,?,?)"
            " ON CONFLICT(actor) DO UPDATE SET available=excluded.available,"
            " reserved=excluded.reserved",
            (actor_id, available, reserved),
        )

    def all_balances(self) -> Dict[str, Tuple[int, int]]:
        return {
            row["actor"]: (row["available"], row["reserved"])
            for row in self._conn.execute("SELECT * FROM balances ORDER BY actor")
        }

    # -- envelopes -------------------------------------------------------------

    def put_envelope(self, doc: Dict[str, Any]) -> None:
        self._conn.execute(
            "INSERT INTO envelopes (id, issuer, holder, budget, consumed, reserved,"
            " refunded_in, carved, refunded_out, targets, actions, issued_at, expires_at,"
            " checkpoint, hold_on, hold_timeout_secs, state, parent)"
            " VALUES (?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?)",
            (
                doc["id"],
                doc["issuer"],
                doc["holder"],
                doc["budget"],
                doc["consumed"],
                doc["reserved"],
                doc["refunded_in"],
                doc["carved"],
                doc["refunded_out"],
                json.dumps(doc["targets"]),
                json.dumps(doc["actions"]),
                doc["issued_at"],
                doc.get("expires_at"),
                doc.get("checkpoint"),
                json.dumps(doc["hold_on"]),
                doc.get("hold_timeout_secs"),
                doc["state"],
                doc.get("parent"),
            ),
        )

    def update_envelope(self, doc: Dict[str, Any]) -> None:
        cur = self._conn.execute(
            "UPDATE envelopes SET consumed=?, reserved=?, refunded_in=?, carved=?,"
            " refunded_out=?, state=? WHERE id=?",
            (
                doc["consumed"],
                doc["reserved"],
                doc["refunded_in"],
                doc["carved"],
                doc["refunded_out"],
                doc["state"],
                doc["id"],
            ),
        )
        if cur.rowcount != 1:
            raise NotFound(f"no envelope {doc['id']}")

    def get_envelope(self, envelope_id: str) -> Optional[Dict[str, Any]]:
        row = self._conn.execute("SELECT * FROM envelopes WHERE id=?", (envelope_id,)).fetchone()
        return self._envelope_doc(row) if row else None

    def list_envelopes(self, holder: Optional[str] = None) -> List[Dict[str, Any]]:
        if holder is None:
            rows = self._conn.execute("SELECT * FROM envelopes ORDER BY id").fetchall()
        else:
            rows = self._conn.execute(
                "SELECT * FROM envelopes WHERE holder=? ORDER BY id", (holder,)
            ).fetchall()
        return [self._envelope_doc(r) for r in rows]

    @staticmethod
    def _envelope_doc(row: sqlite3.Row) -> Dict[str, Any]:
        doc = dict(row)
        doc["targets"] = json.loads(doc["targets"])
        doc["actions"] = json.loads(doc["actions"])
        doc["hold_on"] = json.loads(doc["hold_on"])
        return doc

    # -- holds --------------------------------------------------------------

    def put_hold(self, doc: Dict[str, Any]) -> None:
        self._conn.execute(
            "INSERT INTO holds (id, envelope, actor, type, target, payload,"
            " action_timestamp, reserved_cost, created_at, state, request_event_seq,"
            " decider, decided_at) VALUES (?,?,?,?,?,?,?,?,?,?,?,?,?)",
            (
                doc["id"],
                doc["envelope"],
                doc["actor"],
                doc["type"],
                doc["target"],
                json.dumps(doc["payload"]),
                doc["action_timestamp"],
                doc["reserved_cost"],
                doc["created_at"],
                doc["state"],
                doc["request_event_seq"],
                doc.get("decider"),
                doc.get("decided_at"),
            ),
        )

    def update_hold(self, doc: Dict[str, Any]) -> None:
        cur = self._conn.execute(
            "UPDATE holds SET state=?, decider=?, decided_at=? WHERE id=?",
            (doc["state"], doc.get("decider"), doc.get("decided_at"), doc["id"]),
        )
        if cur.rowcount != 1:
            raise NotFound(f"no hold {doc['id']}")

    def get_hold(self, hold_id: str) -> Optional[Dict[str, Any]]:
        row = self._conn.execute("SELECT * FROM holds WHERE id=?", (hold_id,)).fetchone()
        return self._hold_doc(row) if row else None

    def list_holds(self, state: Optional[str] = None) -> List[Dict[str, Any]]:
        if state is None:
            rows = self._conn.execute("SELECT * FROM holds ORDER BY created_at, id").fetchall()
        else:
            rows = self._conn.execute(
                "SELECT * FROM holds WHERE state=? ORDER BY created_at, id", (state,)
            ).fetchall()
        return [self._hold_doc(r) for r in rows]

    @staticmethod
    def _hold_doc(row: sqlite3.Row) -> Dict[str, Any]:
        doc = dict(row)
        doc["payload"] = json.loads(doc["payload"])
        return doc

    # -- checkpoints ----------------------------------------------------------

    def save_checkpoint_note(self, size: int, note: bytes) -> None:
        self._conn.execute(
            "INSERT OR REPLACE INTO checkpoints (size, note) VALUES (?,?)", (size, note)
        )

    def latest_checkpoint_note(self) -> Optional[Tuple[int, bytes]]:
        row = self._conn.execute(
            "SELECT size, note FROM checkpoints ORDER BY size DESC LIMIT 1"
        ).fetchone()
        return (row["size"], row["note"]) if row else None

    def checkpoint_note_before(self, size: int) -> Optional[Tuple[int, bytes]]:
        row = self._conn.execute(
            "SELECT size, note FROM checkpoints WHERE size < ? AND size > 0"
            " ORDER BY size DESC LIMIT 1",
            (size,),
        ).fetchone()
        return (row["size"], row["note"]) if row else None

    # -- meta -----------------------------------------------------------------

    def get_meta(self, key: str, default: Optional[str] = None) -> Optional[str]:
        row = self._conn.execute("SELECT value FROM meta WHERE key=?", (key,)).fetchone()
        return row["value"] if row else default

    def set_meta(self, key: str, value: str) -> None:
        self._conn.execute(
            "INSERT INTO meta (key, value) VALUES (?,?)"
            " ON CONFLICT(key) DO UPDATE SET value=excluded.value",
            (key, value),
        )


def tamper_event_payload(db_path: str, seq: int, payload_doc: Any) -> None:
    """HARNESS-ONLY backdoor simulating a privileged platform adversary.

    Rewrites a committed event's payload out-of-band, exactly what a root user
    editing the database file could do. Nothing in the kernel calls this; the
    append-only invariant test uses it to show such edits are detected.
    """
    conn = sqlite3.connect(db_path)
    try:
        conn.execute(
            "UPDATE events SET payload=? WHERE seq=?",
            (canonical_encode(payload_doc).decode("utf-8"), seq),
        )
        conn.commit()
    finally:
        conn.close()
