"""Operator CLI. Usage errors exit 2 (argparse); kernel rejections exit 1
with the reason on stderr; results print as JSON on stdout."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, List, Optional

from .config import KernelConfig, config_from_dict
from .errors import GuardlogError
from .kernel import Kernel, ROOT_ACTOR_ID
from .model import ActorKind, OutcomeStatus


def _print(doc: Any) -> None:
    json.dump(doc, sys.stdout, indent=2, sort_keys=True, default=str)
    sys.stdout.write("\n")


def _parse_pairs(pairs: Optional[List[str]], what: str) -> list:
    out = []
    for raw in pairs or []:
        pattern, sep, action = raw.rpartition(":")
        if not sep:
            raise SystemExit(f"{what} must look like pattern:action, got {raw!r}")
        out.append((pattern, action))
    return out


def _load_payload(arg: Optional[str]) -> Any:
    if arg is None:
        return {}
    if arg == "-":
        return json.load(sys.stdin)
    text = Path(arg).read_text() if Path(arg).exists() else arg
    return json.loads(text)


def _open_kernel(args) -> Kernel:
    return Kernel(args.data_dir)


def cmd_init(args) -> int:
    overrides = {}
    if args.capacity_lambda is not None:
        overrides.setdefault("capacity", {})["lambda"] = args.capacity_lambda
    if args.tick_interval_ms is not None:
        overrides.setdefault("capacity", {})["tick_interval_ms"] = args.tick_interval_ms
    if args.origin is not None:
        overrides["origin"] = args.origin
    config = config_from_dict(overrides) if overrides else KernelConfig().validate()
    kernel = Kernel.init(args.data_dir, config=config)
    from .service import add_credential

    token = add_credential(args.data_dir, ROOT_ACTOR_ID)
    pub = kernel.public_key_bytes().hex()
    _print({
        "data_dir": args.data_dir,
        "origin": kernel.config.origin,
        "checkpoint_public_key": pub,
        "root_token": token,
    })
    kernel.close()
    return 0


def cmd_actor(args) -> int:
    kernel = _open_kernel(args)
    try:
        if args.actor_cmd == "list":
            _print({"actors": kernel.list_actors()})
            return 0
        writable = _parse_pairs(args.writable, "--writable")
        actor = kernel.register_actor(
            requester=args.requester,
            actor_id=args.id,
            kind=ActorKind(args.kind),
            writable=writable,
            purpose=args.purpose,
            expiry=args.expiry_ns,
            share=args.share,
        )
        from .service import add_credential

        token = add_credential(args.data_dir, actor.id)
        _print({**actor.to_doc(), "token": token})
        return 0
    finally:
        kernel.close()


def cmd_envelope(args) -> int:
    kernel = _open_kernel(args)
    try:
        if args.envelope_cmd == "list":
            _print({"envelopes": kernel.list_envelopes(holder=args.holder)})
            return 0
        hold_on = _parse_pairs(args.hold_on, "--hold-on")
        kwargs = dict(
            holder=args.holder,
            budget=args.budget,
            targets=args.target,
            actions=args.action,
            duration_secs=args.duration_secs,
            checkpoint=args.checkpoint,
            hold_on=hold_on,
            hold_timeout_secs=args.hold_timeout_secs,
        )
        if args.parent:
            env = kernel.issue_sub_envelope(args.parent, requester=args.issuer, **kwargs)
        else:
            env = kernel.issue_envelope(issuer=args.issuer, **kwargs)
        _print(kernel.get_envelope_doc(env.id))
        return 0
    finally:
        kernel.close()


def cmd_submit(args) -> int:
    kernel = _open_kernel(args)
    try:
        outcome = kernel.submit_action(
            actor=args.actor,
            type=args.type,
            target=args.target,
            payload=_load_payload(args.payload),
            envelope=args.envelope,
        )
        _print(outcome.to_doc())
        return 0 if outcome.status in (OutcomeStatus.COMMITTED, OutcomeStatus.HOLD_TRIGGERED) else 1
    finally:
        kernel.close()


def cmd_hold(args) -> int:
    kernel = _open_kernel(args)
    try:
        if args.hold_cmd == "list":
            _print({"holds": kernel.list_pending_holds()})
            return 0
        outcome = kernel.respond_hold(
            decider=args.decider, hold_id=args.id, decision=args.hold_cmd
        )
        _print(outcome.to_doc())
        return 0 if outcome.status == OutcomeStatus.COMMITTED else 1
    finally:
        kernel.close()


def cmd_proof(args) -> int:
    kernel = _open_kernel(args)
    try:
        if args.proof_cmd == "inclusion":
            proof = kernel.prove_inclusion(args.seq, args.tree_size)
        else:
            proof = kernel.prove_consistency(args.old, args.new)
        _print(proof.to_doc())
        return 0
    finally:
        kernel.close()


def cmd_checkpoint(args) -> int:
    from .audit import checkpoint_note

    kernel = _open_kernel(args)
    try:
        sys.stdout.write(checkpoint_note(kernel).decode("utf-8"))
        return 0
    finally:
        kernel.close()


def cmd_export(args) -> int:
    from .audit import export_package

    kernel = _open_kernel(args)
    try:
        pkg = export_package(
            kernel, args.out, seq_from=getattr(args, "from"), seq_to=args.to
        )
        _print({"package": str(pkg), "files": sorted(p.name for p in pkg.iterdir())})
        return 0
    finally:
        kernel.close()


def cmd_verify(args) -> int:
    from . import verifier

    argv = [args.package, "--key", args.key]
    if args.json:
        argv.append("--json")
    return verifier.main(argv)


def cmd_status(args) -> int:
    kernel = _open_kernel(args)
    try:
        _print(kernel.status())
        return 0
    finally:
        kernel.close()


def cmd_tick(args) -> int:
    kernel = _open_kernel(args)
    try:
        event = kernel.tick()
        _print({"ticked": event is not None,
                "event": event.to_doc() if event else None})
        return 0
    finally:
        kernel.close()


def cmd_serve(args) -> int:
    from .service import serve

    kernel = Kernel(args.data_dir)
    handle = serve(kernel, args.data_dir, host=args.host, port=args.port)
    print(f"guardlog service listening on http://{args.host}:{handle.port}", file=sys.stderr)
    try:
        handle.thread.join()
    except KeyboardInterrupt:
        handle.stop()
    finally:
        kernel.close()
    return 0


def cmd_invariants(args) -> int:
    from .harness import run_invariants

    results = run_invariants()
    ok = True
    for r in results:
        print(f"{r.invariant}: {'PASS' if r.passed else 'FAIL'} ({r.elapsed_ms} ms)")
        if not r.passed:
            ok = False
            for line in r.failures:
                print(f"  - {line}")
    return 0 if ok else 1


def cmd_bench(args) -> int:
    from . import harness

    if args.bench_cmd == "latency":
        report = harness.bench_latency(iterations=args.iterations, warmup=args.warmup)
    elif args.bench_cmd == "throughput":
        report = harness.bench_throughput(window_secs=args.window_secs)
    elif args.bench_cmd == "proofs":
        report = harness.bench_proof_scaling()
    else:
        report = harness.bench_hold(samples=args.samples)
    _print(report)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="guardlog",
        description="Tamper-evident action ledger: capability boundaries, "
        "energy budgets, human approval holds, Merkle audit log.",
    )
    parser.add_argument("--data-dir", default="./guardlog-data",
                        help="kernel data directory (default ./guardlog-data)")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("init", help="create a data directory and root actor")
    p.add_argument("--origin", help="checkpoint origin string")
    p.add_argument("--lambda", dest="capacity_lambda", type=int,
                   help="energy units produced per second")
    p.add_argument("--tick-ms", dest="tick_interval_ms", type=int,
                   help="tick interval in milliseconds")
    p.set_defaults(fn=cmd_init)

    p = sub.add_parser("actor", help="manage actors")
    actor_sub = p.add_subparsers(dest="actor_cmd", required=True)
    c = actor_sub.add_parser("create")
    c.add_argument("id")
    c.add_argument("--kind", choices=["human", "agent"], default="agent")
    c.add_argument("--requester", default=ROOT_ACTOR_ID,
                   help="acting principal (default root)")
    c.add_argument("--purpose", help="required for agents")
    c.add_argument("--writable", action="append",
                   help="pattern:action entry (repeatable)")
    c.add_argument("--share", type=int, default=1)
    c.add_argument("--expiry-ns", type=int, default=None)
    c.set_defaults(fn=cmd_actor)
    l = actor_sub.add_parser("list")
    l.set_defaults(fn=cmd_actor)

    p = sub.add_parser("envelope", help="issue or list envelopes")
    env_sub = p.add_subparsers(dest="envelope_cmd", required=True)
    c = env_sub.add_parser("issue")
    c.add_argument("--issuer", default=ROOT_ACTOR_ID)
    c.add_argument("--holder", required=True)
    c.add_argument("--budget", type=int, required=True)
    c.add_argument("--target", action="append", required=True)
    c.add_argument("--action", action="append", required=True)
    c.add_argument("--duration-secs", type=int)
    c.add_argument("--checkpoint", type=int)
    c.add_argument("--hold-on", action="append", help="pattern:type rule")
    c.add_argument("--hold-timeout-secs", type=int)
    c.add_argument("--parent", help="delegate from this envelope instead")
    c.set_defaults(fn=cmd_envelope)
    l = env_sub.add_parser("list")
    l.add_argument("--holder")
    l.set_defaults(fn=cmd_envelope)

    p = sub.add_parser("submit", help="submit one action")
    p.add_argument("type", choices=["observe", "create", "mutate", "execute"])
    p.add_argument("target")
    p.add_argument("--actor", default=ROOT_ACTOR_ID)
    p.add_argument("--payload", help="JSON file, inline JSON, or - for stdin")
    p.add_argument("--envelope")
    p.set_defaults(fn=cmd_submit)

    p = sub.add_parser("hold", help="list or decide pending holds")
    hold_sub = p.add_subparsers(dest="hold_cmd", required=True)
    l = hold_sub.add_parser("list")
    l.set_defaults(fn=cmd_hold)
    for decision in ("approve", "reject"):
        c = hold_sub.add_parser(decision)
        c.add_argument("id")
        c.add_argument("--decider", default=ROOT_ACTOR_ID)
        c.set_defaults(fn=cmd_hold)

    p = sub.add_parser("proof", help="generate Merkle proofs")
    proof_sub = p.add_subparsers(dest="proof_cmd", required=True)
    c = proof_sub.add_parser("inclusion")
    c.add_argument("--seq", type=int, required=True)
    c.add_argument("--tree-size", type=int)
    c.set_defaults(fn=cmd_proof)
    c = proof_sub.add_parser("consistency")
    c.add_argument("--old", type=int, required=True)
    c.add_argument("--new", type=int)
    c.set_defaults(fn=cmd_proof)

    p = sub.add_parser("checkpoint", help="print the current signed checkpoint")
    p.set_defaults(fn=cmd_checkpoint)

    p = sub.add_parser("export", help="write a standalone audit package")
    p.add_argument("out")
    p.add_argument("--from", type=int, dest="from")
    p.add_argument("--to", type=int)
    p.set_defaults(fn=cmd_export)

    p = sub.add_parser("verify", help="run the independent package verifier")
    p.add_argument("package")
    p.add_argument("--key", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("status", help="log size, root, energy summary")
    p.set_defaults(fn=cmd_status)

    p = sub.add_parser("tick", help="run one energy production tick")
    p.set_defaults(fn=cmd_tick)

    p = sub.add_parser("serve", help="run the local JSON/HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8484)
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("invariants", help="run the adversarial invariant suite")
    p.set_defaults(fn=cmd_invariants)

    p = sub.add_parser("bench", help="performance benchmarks")
    bench_sub = p.add_subparsers(dest="bench_cmd", required=True)
    c = bench_sub.add_parser("latency")
    c.add_argument("--iterations", type=int, default=200)
    c.add_argument("--warmup", type=int, default=20)
    c.set_defaults(fn=cmd_bench)
    c = bench_sub.add_parser("throughput")
    c.add_argument("--window-secs", type=float, default=5.0)
    c.set_defaults(fn=cmd_bench)
    c = bench_sub.add_parser("proofs")
    c.set_defaults(fn=cmd_bench)
    c = bench_sub.add_parser("hold")
    c.add_argument("--samples", type=int, default=8)
    c.set_defaults(fn=cmd_bench)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except GuardlogError as exc:
        print(f"error: {exc} ({exc.code})", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
