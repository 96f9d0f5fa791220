"""Local JSON-over-HTTP service in front of the kernel.

The transport adds no semantics: every state-changing call maps 1:1 onto a
kernel operation, so CLI and HTTP submissions commit identical events. Auth
is a static bearer token per actor from `credentials.json` in the data
directory; the token determines the acting ActorId (callers cannot speak for
anyone else).
"""

from __future__ import annotations

import json
import re
import secrets
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Any, Dict, Optional, Tuple
from urllib.parse import parse_qs, urlparse

from .audit import checkpoint_note, export_package_tar
from .errors import GuardlogError, NotFound, PayloadError
from .kernel import Kernel
from .model import OutcomeStatus, SubmitOutcome

_STATUS_BY_CODE = {
    "REJECTED": 403,
    "INSUFFICIENT_ENERGY": 402,
    "POLICY_VIOLATION": 403,
    "PAYLOAD_ERROR": 400,
    "NOT_FOUND": 404,
    "STATE_ERROR": 409,
    "INTERNAL": 500,
}

MAX_LONG_POLL_SECS = 60


class ApiError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code
        self.message = message


def credentials_path(data_dir: str) -> Path:
    return Path(data_dir) / "credentials.json"


def load_credentials(data_dir: str) -> Dict[str, str]:
    path = credentials_path(data_dir)
    if not path.exists():
        return {}
    return json.loads(path.read_text())


def add_credential(data_dir: str, actor_id: str, token: Optional[str] = None) -> str:
    tokens = load_credentials(data_dir)
    for existing_token, existing_actor in tokens.items():
        if existing_actor == actor_id:
            return existing_token
    token = token or secrets.token_urlsafe(24)
    tokens[token] = actor_id
    credentials_path(data_dir).write_text(json.dumps(tokens, indent=2, sort_keys=True) + "\n")
    return token


def outcome_response(outcome: SubmitOutcome) -> Tuple[int, Dict[str, Any]]:
    if outcome.status == OutcomeStatus.COMMITTED:
        return 200, outcome.to_doc()
    if outcome.status == OutcomeStatus.HOLD_TRIGGERED:
        return 202, outcome.to_doc()
    if outcome.status == OutcomeStatus.REJECTED:
        return 403, {"code": "REJECTED", "message": outcome.reason or "rejected"}
    return 402, {"code": "INSUFFICIENT_ENERGY", "message": "reservation failed"}


class KernelService:
    """Route table + handlers; transport-agnostic so tests can call handle()
    without sockets."""

    def __init__(self, kernel: Kernel, data_dir: str):
        self.kernel = kernel
        self.data_dir = data_dir

    # -- auth ------------------------------------------------------------------

    def actor_for(self, auth_header: Optional[str]) -> str:
        if not auth_header or not auth_header.startswith("Bearer "):
            raise ApiError("POLICY_VIOLATION", "missing bearer token")
        token = auth_header[len("Bearer "):].strip()
        actor = load_credentials(self.data_dir).get(token)
        if actor is None:
            raise ApiError("POLICY_VIOLATION", "unknown token")
        return actor

    # -- dispatch -----------------------------------------------------------------

    def handle(
        self,
        method: str,
        path: str,
        query: Dict[str, list],
        body: Optional[Dict[str, Any]],
        auth_header: Optional[str],
    ) -> Tuple[int, Any, str]:
        """Returns (http status, payload, content type). Payload is a JSON
        document unless content type says otherwise."""
        try:
            return self._route(method, path, query, body, auth_header)
        except ApiError as exc:
            return (
                _STATUS_BY_CODE.get(exc.code, 500),
                {"code": exc.code, "message": exc.message},
                "application/json",
            )
        except GuardlogError as exc:
            code = exc.code
            return (
                _STATUS_BY_CODE.get(code, 500),
                {"code": code, "message": str(exc)},
                "application/json",
            )

    def _route(self, method, path, query, body, auth_header):
        def q1(name, default=None):
            values = query.get(name)
            return values[0] if values else default

        def qint(name, default=None):
            raw = q1(name)
            if raw is None:
                return default
            try:
                return int(raw)
            except ValueError:
                raise ApiError("PAYLOAD_ERROR", f"query parameter {name} must be an integer")

        actor = self.actor_for(auth_header)
        k = self.kernel

        if method == "GET" and path == "/v1/status":
            return 200, k.status(), "application/json"

        if method == "POST" and path == "/v1/actors":
            doc = body or {}
            from .model import ActorKind

            created = k.register_actor(
                requester=actor,
                actor_id=doc.get("id", ""),
                kind=ActorKind(doc.get("kind", "agent")),
                writable=[(w["pattern"], w["action"]) for w in doc.get("writable", [])],
                purpose=doc.get("purpose"),
                expiry=doc.get("expiry"),
                share=doc.get("share", 1),
            )
            token = add_credential(self.data_dir, created.id)
            return 200, {**created.to_doc(), "token": token}, "application/json"

        if method == "GET" and path == "/v1/actors":
            return 200, {"actors": k.list_actors()}, "application/json"

        if method == "POST" and path == "/v1/envelopes":
            doc = body or {}
            kwargs = dict(
                holder=doc.get("holder", ""),
                budget=doc.get("budget", 0),
                targets=doc.get("targets", []),
                actions=doc.get("actions", []),
                duration_secs=doc.get("duration_secs"),
                checkpoint=doc.get("checkpoint"),
                hold_on=[(h[0], h[1]) for h in doc.get("hold_on", [])],
                hold_timeout_secs=doc.get("hold_timeout_secs"),
            )
            if doc.get("parent"):
                env = k.issue_sub_envelope(doc["parent"], requester=actor, **kwargs)
            else:
                env = k.issue_envelope(issuer=actor, **kwargs)
            return 200, k.get_envelope_doc(env.id), "application/json"

        if method == "GET" and path == "/v1/envelopes":
            envelopes = k.list_envelopes(holder=q1("holder"))
            return 200, {"envelopes": envelopes}, "application/json"

        if method == "POST" and path == "/v1/actions":
            doc = body or {}
            if "type" not in doc or "target" not in doc:
                raise ApiError("PAYLOAD_ERROR", "action needs type and target")
            outcome = k.submit_action(
                actor=actor,
                type=doc["type"],
                target=doc["target"],
                payload=doc.get("payload", {}),
                envelope=doc.get("envelope"),
                timestamp=doc.get("timestamp"),
            )
            status, payload = outcome_response(outcome)
            return status, payload, "application/json"

        if method == "GET" and path == "/v1/events":
            events = k.read_events(
                seq_from=qint("from"),
                seq_to=qint("to"),
                actor=q1("actor"),
                target_prefix=q1("target"),
                time_from=qint("time_from"),
                time_to=qint("time_to"),
            )
            return 200, {"events": [e.to_doc() for e in events]}, "application/json"

        if method == "GET" and path == "/v1/holds/pending":
            wait_secs = _parse_wait(q1("wait"))
            deadline = time.monotonic() + min(wait_secs, MAX_LONG_POLL_SECS)
            while True:
                holds = k.list_pending_holds()
                if holds or time.monotonic() >= deadline:
                    return 200, {"holds": holds}, "application/json"
                time.sleep(0.1)

        match = re.fullmatch(r"/v1/holds/([a-zA-Z0-9_\-]+)", path)
        if method == "POST" and match:
            doc = body or {}
            decision = doc.get("decision")
            if decision not in ("approve", "reject"):
                raise PayloadError('body must be {"decision":"approve"|"reject"}')
            outcome = k.respond_hold(decider=actor, hold_id=match.group(1), decision=decision)
            status, payload = outcome_response(outcome)
            return status, payload, "application/json"

        if method == "GET" and path == "/v1/proof/inclusion":
            seq = qint("seq")
            if seq is None:
                raise ApiError("PAYLOAD_ERROR", "seq query parameter required")
            proof = k.prove_inclusion(seq, qint("tree_size"))
            return 200, proof.to_doc(), "application/json"

        if method == "GET" and path == "/v1/proof/consistency":
            old = qint("old")
            if old is None:
                raise ApiError("PAYLOAD_ERROR", "old query parameter required")
            proof = k.prove_consistency(old, qint("new"))
            return 200, proof.to_doc(), "application/json"

        if method == "GET" and path == "/v1/log/checkpoint":
            return 200, checkpoint_note(k), "text/plain; charset=utf-8"

        if method == "GET" and path == "/v1/export":
            blob = export_package_tar(k, seq_from=qint("from"), seq_to=qint("to"))
            return 200, blob, "application/x-tar"

        raise ApiError("NOT_FOUND", f"no route {method} {path}")


def _parse_wait(raw: Optional[str]) -> float:
    if not raw:
        return 0.0
    text = raw[:-1] if raw.endswith("s") else raw
    try:
        return max(0.0, float(text))
    except ValueError:
        raise ApiError("PAYLOAD_ERROR", "wait must look like '30s'")


class _Handler(BaseHTTPRequestHandler):
    service: KernelService  # set by serve()

    def log_message(self, format, *args):  # quiet server
        pass

    def _dispatch(self, method: str) -> None:
        parsed = urlparse(self.path)
        body = None
        length = int(self.headers.get("Content-Length") or 0)
        if length:
            raw = self.rfile.read(length)
            try:
                body = json.loads(raw.decode("utf-8"))
            except ValueError:
                self._send(400, {"code": "PAYLOAD_ERROR", "message": "body is not JSON"},
                           "application/json")
                return
        status, payload, content_type = self.service.handle(
            method, parsed.path, parse_qs(parsed.query), body,
            self.headers.get("Authorization"),
        )
        self._send(status, payload, content_type)

    def _send(self, status: int, payload: Any, content_type: str) -> None:
        if isinstance(payload, (dict, list)):
            data = json.dumps(payload).encode("utf-8")
        elif isinstance(payload, bytes):
            data = payload
        else:
            data = str(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(data)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Headers", "Authorization, Content-Type")
        self.end_headers()
        self.wfile.write(data)

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    def do_OPTIONS(self):
        self._send(204, b"", "text/plain")


class ServiceHandle:
    def __init__(self, server: ThreadingHTTPServer, thread: threading.Thread,
                 ticker: Optional[threading.Event]):
        self.server = server
        self.thread = thread
        self._ticker_stop = ticker

    @property
    def port(self) -> int:
        return self.server.server_address[1]

    def stop(self) -> None:
        if self._ticker_stop is not None:
            self._ticker_stop.set()
        self.server.shutdown()
        self.server.server_close()
        self.thread.join(timeout=5)


def serve(
    kernel: Kernel,
    data_dir: str,
    host: str = "127.0.0.1",
    port: int = 0,
    run_ticker: bool = True,
) -> ServiceHandle:
    """Start the HTTP service on a background thread; energy ticks are
    scheduled unless disabled (tests drive ticks explicitly)."""
    service = KernelService(kernel, data_dir)
    handler = type("BoundHandler", (_Handler,), {"service": service})
    server = ThreadingHTTPServer((host, port), handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    ticker_stop: Optional[threading.Event] = None
    if run_ticker:
        ticker_stop = threading.Event()
        interval = kernel.config.capacity.tick_interval_ms / 1000.0

        def tick_loop():
            while not ticker_stop.wait(min(interval / 4, 1.0)):
                try:
                    kernel.tick()
                except GuardlogError:
                    pass

        threading.Thread(target=tick_loop, daemon=True).start()
    return ServiceHandle(server, thread, ticker_stop)
