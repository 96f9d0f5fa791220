"""The sole committer: a synchronous, linear, deterministic submit pipeline
(validate -> quote -> reserve -> validate payload -> settle -> append ->
receipt) orchestrating boundary checks, energy accounting, envelopes/holds,
the Merkle tree, and the store.

All state mutation funnels through one lock and one store transaction per
commit, so every outcome is all-or-nothing and the log is totally ordered.
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric import ed25519

from .boundary import ROOT_WRITABLE, WritableEntry, WritableSet, check as boundary_check
from .canonical import canonical_encode
from .config import KernelConfig, default_config_toml, load_config
from .energy import (
    Reservation,
    allocate_shares,
    quote_cost,
    settle as settle_reservation,
    settle_commitment,
)
from .envelopes import Envelope, EnvelopeState, HoldRequest, HoldState, match_hold
from .errors import (
    DuplicateActor,
    EncodingError,
    InsufficientEnergyError,
    NotFound,
    PayloadError,
    PolicyViolation,
    StateError,
)
from .model import (
    Action,
    ActionType,
    Actor,
    ActorKind,
    ActorStatus,
    Event,
    HOLD_APPROVED_MARKER,
    HOLD_RESERVED_COST_MARKER,
    OutcomeStatus,
    Receipt,
    STATE_CHANGING,
    SubmitOutcome,
    event_preimage_body,
    oid_digest,
    payload_hash,
    valid_oid,
    valid_target,
)
from .store import Store
from .tlog import MerkleLog, leaf_hash

ROOT_ACTOR_ID = "root"
HOLD_TARGET_PREFIX = "ledger/hold/"

Clock = Callable[[], int]
IdGen = Callable[[], str]


def _default_id_gen() -> str:
    return str(uuid.uuid4())


def seeded_id_gen(seed: int) -> IdGen:
    """Deterministic v4-shaped UUID stream for reproducible sessions."""
    import random

    rng = random.Random(seed)

    def gen() -> str:
        return str(uuid.UUID(int=rng.getrandbits(128), version=4))

    return gen


@dataclass
class FixedClock:
    """Injectable clock advancing a fixed step per reading."""

    now_ns: int = 1_700_000_000_000_000_000
    step_ns: int = 1_000_000

    def __call__(self) -> int:
        value = self.now_ns
        self.now_ns += self.step_ns
        return value

    def advance(self, ns: int) -> None:
        self.now_ns += ns


class Kernel:
    def __init__(
        self,
        data_dir: str,
        clock: Optional[Clock] = None,
        id_gen: Optional[IdGen] = None,
    ) -> None:
        self.data_dir = Path(data_dir)
        if not self.data_dir.exists():
            raise NotFound(f"data directory {data_dir} does not exist (run init)")
        self.config: KernelConfig = load_config(self.data_dir / "config.toml")
        self.clock: Clock = clock or time.time_ns
        self.id_gen: IdGen = id_gen or _default_id_gen
        self.store = Store(str(self.data_dir / "kernel.db"))
        self.tree = MerkleLog(self.store, size=self.store.event_count())
        self._lock = threading.RLock()
        self._signing_key = self._load_or_create_key()
        if self.store.get_actor(ROOT_ACTOR_ID) is None:
            self._bootstrap_root()

    # -- lifecycle ----------------------------------------------------------

    @classmethod
    def init(
        cls,
        data_dir: str,
        config: Optional[KernelConfig] = None,
        clock: Optional[Clock] = None,
        id_gen: Optional[IdGen] = None,
    ) -> "Kernel":
        path = Path(data_dir)
        path.mkdir(parents=True, exist_ok=True)
        (path / "keys").mkdir(exist_ok=True)
        config_path = path / "config.toml"
        if not config_path.exists():
            if config is None:
                config_path.write_text(default_config_toml())
            else:
                config.validate()
                config_path.write_text(_config_toml(config))
        return cls(data_dir, clock=clock, id_gen=id_gen)

    def close(self) -> None:
        self.store.close()

    def _load_or_create_key(self) -> ed25519.Ed25519PrivateKey:
        key_path = self.data_dir / "keys" / "checkpoint.key"
        pub_path = self.data_dir / "keys" / "checkpoint.pub"
        if key_path.exists():
            seed = key_path.read_bytes()
            return ed25519.Ed25519PrivateKey.from_private_bytes(seed)
        key_path.parent.mkdir(exist_ok=True)
        key = ed25519.Ed25519PrivateKey.generate()
        seed = key.private_bytes(
            serialization.Encoding.Raw,
            serialization.PrivateFormat.Raw,
            serialization.NoEncryption(),
        )
        key_path.write_bytes(seed)
        pub_path.write_bytes(
            key.public_key().public_bytes(
                serialization.Encoding.Raw, serialization.PublicFormat.Raw
            )
        )
        return key

    def public_key_bytes(self) -> bytes:
        key = getattr(self, "_signing_key", None)
        if key is None:
            raise NotFound("signing key not loaded")
        return key.public_key().public_bytes(
            serialization.Encoding.Raw, serialization.PublicFormat.Raw
        )

    def _bootstrap_root(self) -> None:
        # Root exists ab initio: it is the authority every registration event
        # is attributed to, so it is not itself registered through one. A
        # fresh kernel therefore starts with an empty log (root = null).
        now = self.clock()
        root = Actor(id=ROOT_ACTOR_ID, kind=ActorKind.HUMAN, share=1)
        with self._lock:
            self.store.begin()
            try:
                self.store.put_actor({**root.to_doc(), "writable": ROOT_WRITABLE.to_doc()})
                self.store.set_balance(ROOT_ACTOR_ID, 0, 0)
                self.store.set_meta("last_tick_ns", str(now))
                self.store.set_meta("minted_total", "0")
                self.store.set_meta("consumed_total", "0")
                self.store.commit()
            except BaseException:
                self.store.abort()
                raise

    # -- internal helpers -----------------------------------------------------

    def _meta_int(self, key: str) -> int:
        return int(self.store.get_meta(key, "0") or "0")

    def _set_meta_int(self, key: str, value: int) -> None:
        self.store.set_meta(key, str(value))

    def _load_actor(self, actor_id: str) -> Optional[Tuple[Actor, WritableSet]]:
        doc = self.store.get_actor(actor_id)
        if doc is None:
            return None
        actor = Actor(
            id=doc["id"],
            kind=ActorKind(doc["kind"]),
            creator=doc.get("creator"),
            purpose=doc.get("purpose"),
            expiry=doc.get("expiry"),
            share=doc["share"],
            status=ActorStatus(doc["status"]),
        )
        return actor, WritableSet.from_doc(doc["writable"])

    def _refresh_actor(self, actor: Actor, now: int) -> Actor:
        """Lazy agent expiry: flips status in the store when past expiry."""
        if (
            actor.kind == ActorKind.AGENT
            and actor.status == ActorStatus.ACTIVE
            and actor.expiry is not None
            and now >= actor.expiry
        ):
            self.store.set_actor_status(actor.id, ActorStatus.EXPIRED.value)
            return Actor(
                id=actor.id,
                kind=actor.kind,
                creator=actor.creator,
                purpose=actor.purpose,
                expiry=actor.expiry,
                share=actor.share,
                status=ActorStatus.EXPIRED,
            )
        return actor

    def _load_envelope(self, envelope_id: str) -> Optional[Envelope]:
        doc = self.store.get_envelope(envelope_id)
        return Envelope.from_doc(doc) if doc else None

    def _save_envelope(self, env: Envelope) -> None:
        self.store.update_envelope(env.to_doc())

    def _refresh_envelope(self, env: Envelope, now: int) -> Envelope:
        """Lazy envelope expiry; refunds the unspent pool to its source."""
        if (
            env.state == EnvelopeState.ACTIVE
            and env.expires_at is not None
            and now >= env.expires_at
        ):
            env.state = EnvelopeState.EXPIRED
            self._flush_surplus(env)
            self._save_envelope(env)
        return env

    def _flush_surplus(self, env: Envelope) -> None:
        """Move a terminal envelope's spendable remainder back to its source."""
        if env.state == EnvelopeState.ACTIVE:
            return
        surplus = env.available()
        if surplus <= 0:
            return
        env.refunded_out += surplus
        if env.parent is not None:
            parent = self._load_envelope(env.parent)
            if parent is None:
                raise NotFound(f"parent envelope {env.parent} missing")
            parent.refunded_in += surplus
            self._save_envelope(parent)
            self._flush_surplus(parent)
        else:
            available, reserved = self.store.get_balance(env.issuer)
            self.store.set_balance(env.issuer, available + surplus, reserved)

    def _next_timestamp(self, requested: Optional[int]) -> int:
        ts = requested if requested is not None else self.clock()
        last = self.store.last_event_timestamp()
        # Clamp so committed events never move backwards in time.
        return max(ts, last)

    def _append_event_tx(
        self,
        actor: str,
        type: ActionType,
        target: str,
        payload: Any,
        reserved: int,
        settled: int,
        artifact: Optional[bytes] = None,
        timestamp: Optional[int] = None,
    ) -> Event:
        """Build, hash, and append one event to store and tree. Caller must
        hold an open transaction."""
        seq = self.store.event_count() + 1
        ts = self._next_timestamp(timestamp)
        event_id = self.id_gen()
        p_hash = payload_hash(payload)
        body = event_preimage_body(
            event_id, seq, actor, type, target, payload, p_hash, ts, artifact, reserved, settled
        )
        e_hash = leaf_hash(body)
        event = Event(
            id=event_id,
            seq=seq,
            actor=actor,
            type=type,
            target=target,
            payload=payload,
            payload_hash=p_hash,
            timestamp=ts,
            artifact_hash=artifact,
            reserved_energy=reserved,
            settled_energy=settled,
            event_hash=e_hash,
        )
        self.store.append_event(event)
        self.tree.append(e_hash)
        return event

    # -- actor registration ----------------------------------------------------

    def register_actor(
        self,
        requester: str,
        actor_id: str,
        kind: ActorKind,
        writable: Optional[List[Tuple[str, str]]] = None,
        purpose: Optional[str] = None,
        expiry: Optional[int] = None,
        share: int = 1,
    ) -> Actor:
        with self._lock:
            now = self.clock()
            req = self._load_actor(requester)
            if req is None:
                raise NotFound(f"requester {requester} is not registered")
            req_actor = self._refresh_actor(req[0], now)
            if req_actor.status != ActorStatus.ACTIVE:
                raise PolicyViolation(f"requester {requester} is not active")
            if kind == ActorKind.AGENT:
                if req_actor.kind != ActorKind.HUMAN:
                    raise PolicyViolation("agents may not create agents")
                if not purpose:
                    raise PolicyViolation("agent registration requires a purpose")
            else:
                if requester != ROOT_ACTOR_ID:
                    raise PolicyViolation("humans may be registered only by root")
                if expiry is not None:
                    raise PolicyViolation("humans never expire")
            if not actor_id or not valid_target(actor_id) or "/" in actor_id:
                raise PolicyViolation(f"bad actor id {actor_id!r}")
            if share < 1:
                raise PolicyViolation("share must be >= 1")
            if self.store.get_actor(actor_id) is not None:
                raise DuplicateActor(f"actor {actor_id} already exists")
            wset = WritableSet.of(*(writable or []))
            actor = Actor(
                id=actor_id,
                kind=kind,
                creator=requester if kind == ActorKind.AGENT else None,
                purpose=purpose if kind == ActorKind.AGENT else None,
                expiry=expiry,
                share=share,
                status=ActorStatus.ACTIVE,
            )
            self.store.begin()
            try:
                self.store.put_actor({**actor.to_doc(), "writable": wset.to_doc()})
                self.store.set_balance(actor_id, 0, 0)
                self._append_event_tx(
                    actor=ROOT_ACTOR_ID,
                    type=ActionType.CREATE,
                    target=f"system/actors/{actor_id}",
                    payload={
                        "kind": "actor_registered",
                        "requester": requester,
                        "actor": {**actor.to_doc(), "writable": wset.to_doc()},
                    },
                    reserved=0,
                    settled=0,
                    timestamp=now,
                )
                self.store.commit()
            except BaseException:
                self.store.abort()
                raise
            return actor

    # -- envelopes ---------------------------------------------------------------

    def issue_envelope(
        self,
        issuer: str,
        holder: str,
        budget: int,
        targets: List[str],
        actions: List[str],
        duration_secs: Optional[int] = None,
        checkpoint: Optional[int] = None,
        hold_on: Optional[List[Tuple[str, str]]] = None,
        hold_timeout_secs: Optional[int] = None,
    ) -> Envelope:
        with self._lock:
            now = self.clock()
            issuer_info = self._load_actor(issuer)
            if issuer_info is None:
                raise NotFound(f"issuer {issuer} is not registered")
            issuer_actor = self._refresh_actor(issuer_info[0], now)
            if issuer_actor.status != ActorStatus.ACTIVE:
                raise PolicyViolation(f"issuer {issuer} is not active")
            holder_info = self._load_actor(holder)
            if holder_info is None:
                raise NotFound(f"holder {holder} is not registered")
            spec = self._check_envelope_spec(budget, targets, actions, hold_on)
            issuer_w = ROOT_WRITABLE if issuer == ROOT_ACTOR_ID else issuer_info[1]
            for pattern in spec["targets"]:
                for act in spec["actions"]:
                    if not issuer_w.covers(pattern, ActionType(act)):
                        raise PolicyViolation(
                            f"({pattern}, {act}) is not within the issuer's writable set"
                        )
            available, reserved = self.store.get_balance(issuer)
            if available < budget:
                raise InsufficientEnergyError(
                    f"issuer balance {available} cannot fund budget {budget}"
                )
            env = Envelope(
                id=self.id_gen(),
                issuer=issuer,
                holder=holder,
                budget=budget,
                targets=spec["targets"],
                actions=spec["actions"],
                issued_at=now,
                expires_at=now + duration_secs * 1_000_000_000 if duration_secs else None,
                checkpoint=checkpoint,
                hold_on=spec["hold_on"],
                hold_timeout_secs=hold_timeout_secs,
            )
            self.store.begin()
            try:
                self.store.set_balance(issuer, available - budget, reserved)
                self.store.put_envelope(env.to_doc())
                self._append_event_tx(
                    actor=ROOT_ACTOR_ID,
                    type=ActionType.CREATE,
                    target=f"ledger/envelopes/{env.id}",
                    payload={"kind": "envelope_issued", "envelope": env.to_doc()},
                    reserved=0,
                    settled=0,
                    timestamp=now,
                )
                self.store.commit()
            except BaseException:
                self.store.abort()
                raise
            return env

    def issue_sub_envelope(
        self,
        parent_id: str,
        requester: str,
        holder: str,
        budget: int,
        targets: List[str],
        actions: List[str],
        duration_secs: Optional[int] = None,
        checkpoint: Optional[int] = None,
        hold_on: Optional[List[Tuple[str, str]]] = None,
        hold_timeout_secs: Optional[int] = None,
    ) -> Envelope:
        with self._lock:
            now = self.clock()
            self.store.begin()
            try:
                return self._issue_sub_envelope_tx(
                    parent_id, requester, holder, budget, targets, actions,
                    duration_secs, checkpoint, hold_on, hold_timeout_secs, now,
                )
            except BaseException:
                self.store.abort()
                raise

    def _issue_sub_envelope_tx(
        self,
        parent_id: str,
        requester: str,
        holder: str,
        budget: int,
        targets: List[str],
        actions: List[str],
        duration_secs: Optional[int],
        checkpoint: Optional[int],
        hold_on: Optional[List[Tuple[str, str]]],
        hold_timeout_secs: Optional[int],
        now: int,
    ) -> Envelope:
        parent = self._load_envelope(parent_id)
        if parent is None:
            raise NotFound(f"no envelope {parent_id}")
        parent = self._refresh_envelope(parent, now)
        if parent.state != EnvelopeState.ACTIVE:
            raise PolicyViolation(f"parent envelope {parent_id} is {parent.state.value}")
        if parent.holder != requester:
            raise PolicyViolation("only the envelope holder may delegate it")
        holder_info = self._load_actor(holder)
        if holder_info is None:
            raise NotFound(f"holder {holder} is not registered")
        from .patterns import pattern_covers
        spec = self._check_envelope_spec(budget, targets, actions, hold_on)
        for pattern in spec["targets"]:
            if not any(pattern_covers(pp, pattern) for pp in parent.targets):
                raise PolicyViolation(f"target {pattern!r} exceeds the parent envelope")
        for act in spec["actions"]:
            if act not in parent.actions:
                raise PolicyViolation(f"action {act!r} exceeds the parent envelope")
        if budget > parent.available():
            raise PolicyViolation(
                f"budget {budget} exceeds parent remaining {parent.available()}"
            )
        child_expiry = now + duration_secs * 1_000_000_000 if duration_secs else None
        if parent.expires_at is not None:
            child_expiry = min(child_expiry or parent.expires_at, parent.expires_at)
        env = Envelope(
            id=self.id_gen(),
            issuer=requester,
            holder=holder,
            budget=budget,
            targets=spec["targets"],
            actions=spec["actions"],
            issued_at=now,
            expires_at=child_expiry,
            checkpoint=checkpoint,
            hold_on=spec["hold_on"],
            hold_timeout_secs=hold_timeout_secs,
            parent=parent.id,
        )
        parent.carved += budget
        self._save_envelope(parent)
        self.store.put_envelope(env.to_doc())
        self._append_event_tx(
            actor=ROOT_ACTOR_ID,
            type=ActionType.CREATE,
            target=f"ledger/envelopes/{env.id}",
            payload={"kind": "envelope_issued", "envelope": env.to_doc()},
            reserved=0,
            settled=0,
            timestamp=now,
        )
        self.store.commit()
        return env

    @staticmethod
    def _check_envelope_spec(
        budget: int,
        targets: List[str],
        actions: List[str],
        hold_on: Optional[List[Tuple[str, str]]],
    ) -> Dict[str, Any]:
        from .patterns import validate_pattern

        if budget < 0:
            raise PolicyViolation("budget must be >= 0")
        if not targets:
            raise PolicyViolation("envelope needs at least one target pattern")
        if not actions:
            raise PolicyViolation("envelope needs at least one action type")
        for t in targets:
            validate_pattern(t)
        acts = [ActionType.parse(a).value for a in actions]
        rules: List[Tuple[str, str]] = []
        for pattern, act in hold_on or []:
            validate_pattern(pattern)
            if act != "*":
                act = ActionType.parse(act).value
            rules.append((pattern, act))
        return {"targets": list(targets), "actions": acts, "hold_on": rules}

    # -- submit pipeline ---------------------------------------------------------

    def submit_action(
        self,
        actor: str,
        type: ActionType | str,
        target: str,
        payload: Any = None,
        envelope: Optional[str] = None,
        timestamp: Optional[int] = None,
    ) -> SubmitOutcome:
        action = Action(
            actor=actor,
            type=ActionType.parse(type) if isinstance(type, str) else type,
            target=target,
            payload={} if payload is None else payload,
            timestamp=timestamp if timestamp is not None else self.clock(),
            envelope=envelope,
        )
        with self._lock:
            # Hold responses are kernel-routed control actions, still subject
            # to the boundary rules for ledger/hold/*.
            if action.type == ActionType.MUTATE and action.target.startswith(HOLD_TARGET_PREFIX):
                return self._route_hold_response(action)
            outcome = self._run_pipeline(action, replay=None, own_tx=True)
            self._maybe_log_rejection(action, outcome)
            return outcome

    def _maybe_log_rejection(self, action: Action, outcome: SubmitOutcome) -> None:
        if not self.config.log_rejections:
            return
        if outcome.status.value != "rejected":
            return
        self.store.begin()
        try:
            self._append_event_tx(
                actor=ROOT_ACTOR_ID,
                type=ActionType.OBSERVE,
                target="ledger/rejections",
                payload={
                    "kind": "rejection",
                    "actor": action.actor,
                    "type": action.type.value,
                    "target": action.target,
                    "reason": outcome.reason,
                },
                reserved=0,
                settled=0,
                timestamp=action.timestamp,
            )
            self.store.commit()
        except BaseException:
            self.store.abort()
            raise

    def _run_pipeline(
        self,
        action: Action,
        replay: Optional[HoldRequest],
        own_tx: bool,
    ) -> SubmitOutcome:
        """The 7-step pipeline. With `own_tx` the transaction opens here; any
        exception rolls everything back (releasing reservations), while
        Rejected/InsufficientEnergy returns commit only lazy-expiry refreshes
        made during validate (events are appended on success paths alone). In
        replay mode the caller owns the transaction and reservation release."""
        if own_tx:
            self.store.begin()
        try:
            outcome = self._pipeline_steps(action, replay)
        except BaseException:
            if own_tx:
                self.store.abort()
            raise
        if own_tx:
            self.store.commit()
        return outcome

    def _pipeline_steps(self, action: Action, replay: Optional[HoldRequest]) -> SubmitOutcome:
        now = action.timestamp
        # ---- step 1: validate -------------------------------------------------
        try:
            encoded = canonical_encode(action.payload)
        except EncodingError as exc:
            raise PayloadError(f"payload is not canonically encodable: {exc}") from None
        if len(encoded) > self.config.max_payload_bytes:
            raise PayloadError(
                f"payload of {len(encoded)} bytes exceeds limit {self.config.max_payload_bytes}"
            )
        if replay is None and isinstance(action.payload, dict):
            for marker in (HOLD_APPROVED_MARKER, HOLD_RESERVED_COST_MARKER):
                if marker in action.payload:
                    return SubmitOutcome.rejected(f"reserved payload key {marker}")
        info = self._load_actor(action.actor)
        if info is None:
            return SubmitOutcome.rejected(f"unknown actor {action.actor}")
        actor, writable = info
        actor = self._refresh_actor(actor, now)
        if not valid_target(action.target):
            return SubmitOutcome.rejected(f"bad target path {action.target!r}")
        if action.timestamp <= 0:
            return SubmitOutcome.rejected("timestamp must be positive")
        env: Optional[Envelope] = None
        if action.envelope is not None:
            env = self._load_envelope(action.envelope)
            if env is None:
                return SubmitOutcome.rejected(f"unknown envelope {action.envelope}")
            env = self._refresh_envelope(env, now)
            if env.holder != action.actor:
                return SubmitOutcome.rejected("envelope is held by a different actor")
            if env.state != EnvelopeState.ACTIVE:
                return SubmitOutcome.rejected(f"envelope is {env.state.value}")
            effective = WritableSet(
                tuple(
                    WritableEntry(p, a)
                    for p in env.targets
                    for a in env.actions
                )
            )
        else:
            effective = ROOT_WRITABLE if action.actor == ROOT_ACTOR_ID else writable
        decision = boundary_check(
            actor,
            effective,
            action.type,
            action.target,
            is_root=action.actor == ROOT_ACTOR_ID,
        )
        if not decision.validated:
            return SubmitOutcome.rejected(decision.reason or "rejected")
        if env is not None and action.type in STATE_CHANGING and not env.covers(
            action.target, action.type
        ):
            return SubmitOutcome.rejected("envelope does not authorize this action")
        # Hold short-circuit: quote + reserve + hold_request append happen
        # inside validate, then the pipeline exits.
        if env is not None and replay is None and match_hold(env, action):
            return self._trigger_hold(action, env)
        # ---- step 2: quote ----------------------------------------------------
        if replay is not None:
            cost = replay.reserved_cost  # phantom quote: the held amount
        else:
            cost = quote_cost(self.config.costs, action.type, action.payload)
        # ---- step 3: reserve ---------------------------------------------------
        balance_reserved = False
        if replay is not None:
            pass  # reservation already held on the envelope since trigger time
        elif env is not None:
            if not env.reserve(cost):
                return SubmitOutcome.insufficient_energy()
        else:
            available, reserved = self.store.get_balance(action.actor)
            if available < cost:
                return SubmitOutcome.insufficient_energy()
            self.store.set_balance(action.actor, available - cost, reserved + cost)
            balance_reserved = True
        # ---- step 4: validate payload -------------------------------------------
        self._validate_payload(action)  # raises PayloadError; tx rollback releases
        # ---- step 5: settle -----------------------------------------------------
        if replay is not None:
            if env is None:
                raise NotFound(f"envelope {replay.envelope} missing for replay")
            settle_reservation(Reservation(replay.id, replay.envelope, cost), cost)
            env.settle_reserved(cost, cost)
            self._save_envelope(env)
        elif env is not None:
            env.settle_reserved(cost, cost)
            self._save_envelope(env)
        elif balance_reserved:
            available, reserved = self.store.get_balance(action.actor)
            self.store.set_balance(action.actor, available, reserved - cost)
        self._set_meta_int("consumed_total", self._meta_int("consumed_total") + cost)
        # ---- step 6: append -----------------------------------------------------
        artifact: Optional[bytes] = None
        if action.type == ActionType.EXECUTE:
            artifact = oid_digest(action.payload["artifact_hash"])
        event = self._append_event_tx(
            actor=action.actor,
            type=action.type,
            target=action.target,
            payload=action.payload,
            reserved=cost,
            settled=cost,
            artifact=artifact,
            timestamp=action.timestamp,
        )
        # ---- step 7: receipt ------------------------------------------------------
        return SubmitOutcome.committed(Receipt(event.id, event.seq, event.event_hash))

    def _validate_payload(self, action: Action) -> None:
        payload = action.payload
        if action.type == ActionType.EXECUTE:
            if not isinstance(payload, dict):
                raise PayloadError("execute payload must be an object")
            for field in ("input_oid", "output_oid", "artifact_hash"):
                if field not in payload:
                    raise PayloadError(f"missing field {field}")
                if not valid_oid(payload[field]):
                    raise PayloadError(field)
            if "exit_code" not in payload:
                raise PayloadError("exit_code")
            exit_code = payload["exit_code"]
            if isinstance(exit_code, bool) or not isinstance(exit_code, int):
                raise PayloadError("exit_code")
            if "output_bytes" in payload:
                ob = payload["output_bytes"]
                if isinstance(ob, bool) or not isinstance(ob, int) or ob < 0:
                    raise PayloadError("output_bytes")
        elif action.type == ActionType.MUTATE:
            if isinstance(payload, dict) and "content_oid" in payload:
                if not valid_oid(payload["content_oid"]):
                    raise PayloadError("content_oid")
        # create/observe accept any structured document

    # -- hold workflow -------------------------------------------------------------

    def _trigger_hold(self, action: Action, env: Envelope) -> SubmitOutcome:
        """Atomically quote, reserve, append the hold_request event, and
        create the pending hold record (already inside the pipeline tx)."""
        cost = quote_cost(self.config.costs, action.type, action.payload)
        if not env.reserve(cost):
            return SubmitOutcome.insufficient_energy()
        hold_id = self.id_gen()
        event = self._append_event_tx(
            actor=action.actor,
            type=ActionType.CREATE,
            target=f"ledger/hold/{hold_id}",
            payload={
                "kind": "hold_request",
                "hold_id": hold_id,
                "action": {
                    "actor": action.actor,
                    "type": action.type.value,
                    "target": action.target,
                    "payload": action.payload,
                    "envelope": action.envelope,
                    "timestamp": action.timestamp,
                },
                "timeout_secs": env.hold_timeout_secs,
            },
            reserved=cost,
            settled=0,
            timestamp=action.timestamp,
        )
        self._save_envelope(env)
        hold = HoldRequest(
            id=hold_id,
            envelope=env.id,
            actor=action.actor,
            type=action.type.value,
            target=action.target,
            payload=action.payload,
            action_timestamp=action.timestamp,
            reserved_cost=cost,
            created_at=action.timestamp,
            state=HoldState.PENDING,
            request_event_seq=event.seq,
        )
        self.store.put_hold(hold.to_doc())
        return SubmitOutcome.hold_triggered(hold_id)

    def _route_hold_response(self, action: Action) -> SubmitOutcome:
        info = self._load_actor(action.actor)
        if info is None:
            return SubmitOutcome.rejected(f"unknown actor {action.actor}")
        actor, writable = info
        actor = self._refresh_actor(actor, action.timestamp)
        decision_check = boundary_check(
            actor,
            ROOT_WRITABLE if action.actor == ROOT_ACTOR_ID else writable,
            action.type,
            action.target,
            is_root=action.actor == ROOT_ACTOR_ID,
        )
        if not decision_check.validated:
            outcome = SubmitOutcome.rejected(decision_check.reason or "rejected")
            self._maybe_log_rejection(action, outcome)
            return outcome
        if not isinstance(action.payload, dict) or action.payload.get("decision") not in (
            "approve",
            "reject",
        ):
            raise PayloadError('hold response payload must be {"decision":"approve"|"reject"}')
        hold_id = action.target[len(HOLD_TARGET_PREFIX):]
        return self._respond_hold(
            decider=action.actor,
            hold_id=hold_id,
            decision=action.payload["decision"],
            now=action.timestamp,
        )

    def respond_hold(
        self,
        decider: str,
        hold_id: str,
        decision: str,
        timestamp: Optional[int] = None,
    ) -> SubmitOutcome:
        """Direct API equivalent of `mutate ledger/hold/<id>`."""
        now = timestamp if timestamp is not None else self.clock()
        with self._lock:
            info = self._load_actor(decider)
            if info is None:
                raise NotFound(f"unknown actor {decider}")
            if decision not in ("approve", "reject"):
                raise PayloadError('decision must be "approve" or "reject"')
            return self._respond_hold(decider, hold_id, decision, now)

    def _respond_hold(self, decider: str, hold_id: str, decision: str, now: int) -> SubmitOutcome:
        self.expire_holds(now)
        doc = self.store.get_hold(hold_id)
        if doc is None:
            raise NotFound(f"no hold {hold_id}")
        hold = HoldRequest.from_doc(doc)
        info = self._load_actor(decider)
        if info is None:
            raise NotFound(f"unknown actor {decider}")
        actor = info[0]
        if actor.kind != ActorKind.HUMAN:
            raise PolicyViolation("only human actors may decide holds")
        if hold.state != HoldState.PENDING:
            raise StateError(f"hold {hold_id} is already {hold.state.value}")
        env = self._load_envelope(hold.envelope)
        if env is None:
            raise NotFound(f"envelope {hold.envelope} missing")
        if decider != ROOT_ACTOR_ID and decider != env.issuer:
            raise PolicyViolation("only the envelope issuer or root may decide this hold")
        if decision == "reject":
            return self._finish_reject(hold, env, decider, now, timed_out=False)
        return self._finish_approve(hold, env, decider, now)

    def _finish_reject(
        self,
        hold: HoldRequest,
        env: Envelope,
        decider: str,
        now: int,
        timed_out: bool,
    ) -> SubmitOutcome:
        reservation = Reservation(hold.id, hold.envelope, hold.reserved_cost)
        commitment = settle_commitment(reservation, self.config.commitment_rate)
        self.store.begin()
        try:
            env = self._refresh_envelope(env, now)
            env.settle_reserved(hold.reserved_cost, commitment)
            self._save_envelope(env)
            self._flush_surplus(env)
            self._set_meta_int("consumed_total", self._meta_int("consumed_total") + commitment)
            event = self._append_event_tx(
                actor=decider,
                type=ActionType.MUTATE,
                target=f"ledger/hold/{hold.id}",
                payload={"decision": "timeout" if timed_out else "reject"},
                reserved=hold.reserved_cost,
                settled=commitment,
                timestamp=now,
            )
            hold.state = HoldState.TIMED_OUT if timed_out else HoldState.REJECTED
            hold.decider = decider
            hold.decided_at = now
            self.store.update_hold(hold.to_doc())
            self.store.commit()
        except BaseException:
            self.store.abort()
            raise
        return SubmitOutcome.committed(Receipt(event.id, event.seq, event.event_hash))

    def _finish_approve(
        self, hold: HoldRequest, env: Envelope, decider: str, now: int
    ) -> SubmitOutcome:
        replay_payload = hold.payload
        if isinstance(replay_payload, dict):
            replay_payload = dict(replay_payload)
            replay_payload[HOLD_APPROVED_MARKER] = True
            replay_payload[HOLD_RESERVED_COST_MARKER] = hold.reserved_cost
        replay_action = Action(
            actor=hold.actor,
            type=ActionType(hold.type),
            target=hold.target,
            payload=replay_payload,
            timestamp=now,
            envelope=hold.envelope,
        )
        self.store.begin()
        try:
            self._append_event_tx(
                actor=decider,
                type=ActionType.MUTATE,
                target=f"ledger/hold/{hold.id}",
                payload={"decision": "approve"},
                reserved=0,
                settled=0,
                timestamp=now,
            )
            hold.state = HoldState.APPROVED
            hold.decider = decider
            hold.decided_at = now
            self.store.update_hold(hold.to_doc())
            # Re-submit through the full pipeline with replay guards; actor
            # status, boundary, and envelope may all have changed meanwhile.
            try:
                outcome = self._run_pipeline(replay_action, replay=hold, own_tx=False)
            except PayloadError:
                self._release_hold_reservation(hold)
                self.store.commit()
                raise
            if outcome.status != outcome.status.COMMITTED:
                self._release_hold_reservation(hold)
            self.store.commit()
        except BaseException:
            self.store.abort()
            raise
        return outcome

    def _release_hold_reservation(self, hold: HoldRequest) -> None:
        env = self._load_envelope(hold.envelope)
        if env is None:
            raise NotFound(f"envelope {hold.envelope} missing")
        env.release_reserved(hold.reserved_cost)
        self._save_envelope(env)
        self._flush_surplus(env)

    def expire_holds(self, now: Optional[int] = None) -> List[str]:
        """Sweep pending holds past their deadline; each expires exactly as a
        reject (commitment settled, response event appended, state TimedOut)."""
        ts = now if now is not None else self.clock()
        expired: List[str] = []
        with self._lock:
            for doc in self.store.list_holds(state=HoldState.PENDING.value):
                hold = HoldRequest.from_doc(doc)
                env = self._load_envelope(hold.envelope)
                if env is None:
                    continue
                deadline = hold.deadline(env.hold_timeout_secs)
                if deadline is not None and ts >= deadline:
                    self._finish_reject(hold, env, ROOT_ACTOR_ID, ts, timed_out=True)
                    expired.append(hold.id)
        return expired

    # -- energy ticks ------------------------------------------------------------

    def tick(self, now: Optional[int] = None) -> Optional[Event]:
        """Produce one tick's energy and split it by share across active
        actors; appends one production event. No-op before the interval."""
        ts = now if now is not None else self.clock()
        with self._lock:
            last = int(self.store.get_meta("last_tick_ns", "0") or "0")
            if ts < last + self.config.capacity.tick_interval_ns():
                return None
            self.expire_holds(ts)
            production = self.config.capacity.tick_production()
            shares = {
                doc["id"]: doc["share"]
                for doc in self.store.list_actors()
                if doc["status"] == ActorStatus.ACTIVE.value
            }
            credits = allocate_shares(production, shares)
            minted = sum(credits.values())
            self.store.begin()
            try:
                for actor_id, credit in credits.items():
                    if credit == 0:
                        continue
                    available, reserved = self.store.get_balance(actor_id)
                    self.store.set_balance(actor_id, available + credit, reserved)
                self._set_meta_int("minted_total", self._meta_int("minted_total") + minted)
                self.store.set_meta("last_tick_ns", str(ts))
                event = self._append_event_tx(
                    actor=ROOT_ACTOR_ID,
                    type=ActionType.OBSERVE,
                    target="ledger/energy/production",
                    payload={
                        "kind": "energy_production",
                        "produced": production,
                        "minted": minted,
                        "credits": credits,
                    },
                    reserved=0,
                    settled=0,
                    timestamp=ts,
                )
                self.store.commit()
            except BaseException:
                self.store.abort()
                raise
            return event

    # -- reads ----------------------------------------------------------------------

    def status(self) -> Dict[str, Any]:
        with self._lock:
            size = self.tree.size
            root = self.tree.root()
            return {
                "tree_size": size,
                "root": root.hex() if root else "null",
                "origin": self.config.origin,
                "energy": {
                    actor: {"available": bal[0], "reserved": bal[1]}
                    for actor, bal in self.store.all_balances().items()
                },
                "pending_holds": len(self.store.list_holds(state=HoldState.PENDING.value)),
                "minted_total": self._meta_int("minted_total"),
                "consumed_total": self._meta_int("consumed_total"),
            }

    def list_actors(self) -> List[Dict[str, Any]]:
        with self._lock:
            return self.store.list_actors()

    def list_envelopes(self, holder: Optional[str] = None) -> List[Dict[str, Any]]:
        with self._lock:
            return self.store.list_envelopes(holder)

    def get_envelope_doc(self, envelope_id: str) -> Dict[str, Any]:
        with self._lock:
            doc = self.store.get_envelope(envelope_id)
            if doc is None:
                raise NotFound(f"no envelope {envelope_id}")
            env = Envelope.from_doc(doc)
            out = env.to_doc()
            out["available"] = env.available()
            return out

    def list_pending_holds(self, now: Optional[int] = None) -> List[Dict[str, Any]]:
        with self._lock:
            self.expire_holds(now if now is not None else self.clock())
            out = []
            for doc in self.store.list_holds(state=HoldState.PENDING.value):
                hold = HoldRequest.from_doc(doc)
                env = self._load_envelope(hold.envelope)
                deadline = hold.deadline(env.hold_timeout_secs) if env else None
                card = hold.to_doc()
                card["deadline"] = deadline
                out.append(card)
            return out

    def get_hold_doc(self, hold_id: str) -> Dict[str, Any]:
        with self._lock:
            doc = self.store.get_hold(hold_id)
            if doc is None:
                raise NotFound(f"no hold {hold_id}")
            return doc

    def read_events(self, **filters: Any) -> List[Event]:
        with self._lock:
            return self.store.read_events(**filters)

    def prove_inclusion(self, seq: int, tree_size: Optional[int] = None):
        with self._lock:
            size = self.tree.size if tree_size is None else tree_size
            return self.tree.prove_inclusion(seq - 1, size)

    def prove_consistency(self, old_size: int, new_size: Optional[int] = None):
        with self._lock:
            return self.tree.prove_consistency(old_size, new_size)


def _config_toml(config: KernelConfig) -> str:
    rate = config.commitment_rate
    rate_text = str(int(rate)) if rate.denominator == 1 else repr(float(rate))
    return (
        f"log_rejections = {'true' if config.log_rejections else 'false'}\n"
        f'origin = "{config.origin}"\n'
        f"max_payload_bytes = {config.max_payload_bytes}\n"
        "\n"
        "[capacity]\n"
        f"lambda = {config.capacity.lambda_per_sec}\n"
        f"tick_interval_ms = {config.capacity.tick_interval_ms}\n"
        "\n"
        "[costs]\n"
        f"observe = {config.costs.observe}\n"
        f"create = {config.costs.create}\n"
        f"mutate = {config.costs.mutate}\n"
        f"execute_base = {config.costs.execute_base}\n"
        f"execute_bytes_divisor = {config.costs.execute_bytes_divisor}\n"
        "\n"
        "[hold]\n"
        f"commitment_rate = {rate_text}\n"
    )
