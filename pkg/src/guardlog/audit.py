"""Audit prover and exporter: signed checkpoints and standalone audit
packages (events + inclusion proofs + checkpoint + optional consistency link).

Packages are verified by the `verifier` module, which shares no code with the
kernel; this module only produces them.
"""

from __future__ import annotations

import io
import tarfile
import time
from pathlib import Path
from typing import Optional

from .canonical import canonical_encode
from .checkpoint import Checkpoint, format_checkpoint, parse_checkpoint, sign_checkpoint
from .errors import NotFound, StateError
from .kernel import Kernel
from .tlog import InclusionProof


def publish_checkpoint(kernel: Kernel) -> Checkpoint:
    """Sign the current tree head, persist the note, and return it.

    Published sizes are monotone; re-publishing an unchanged tree returns a
    byte-identical note (Ed25519 is deterministic).
    """
    with kernel._lock:
        size = kernel.tree.size
        root = kernel.tree.root()
        latest = kernel.store.latest_checkpoint_note()
        if latest is not None and latest[0] > size:
            raise StateError(
                f"refusing to publish size {size} below already-published {latest[0]}"
            )
        cp = sign_checkpoint(
            origin=kernel.config.origin,
            tree_size=size,
            root=root,
            signer_name=kernel.config.origin,
            private_key=kernel._signing_key,
        )
        note = format_checkpoint(cp)
        kernel.store.save_checkpoint_note(size, note)
        return cp


def checkpoint_note(kernel: Kernel) -> bytes:
    return format_checkpoint(publish_checkpoint(kernel))


def export_package(
    kernel: Kernel,
    out_dir: str,
    seq_from: Optional[int] = None,
    seq_to: Optional[int] = None,
    time_from: Optional[int] = None,
    time_to: Optional[int] = None,
) -> Path:
    """Write a standalone audit package directory:

    events.jsonl   one canonical-JSON event per line, seq order
    proofs.json    one inclusion proof per event, at the checkpoint tree size
    checkpoint     current signed note
    prior_checkpoint + consistency.json   when an older note was published
    """
    with kernel._lock:
        events = kernel.store.read_events(
            seq_from=seq_from, seq_to=seq_to, time_from=time_from, time_to=time_to
        )
        if not events:
            raise NotFound("export range matches no events")
        cp = publish_checkpoint(kernel)
        size = cp.tree_size
        proofs = [kernel.tree.prove_inclusion(e.seq - 1, size) for e in events]
        prior = kernel.store.checkpoint_note_before(size)
        consistency = None
        prior_note = None
        if prior is not None:
            prior_size, prior_note = prior
            consistency = kernel.tree.prove_consistency(prior_size, size)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "events.jsonl", "wb") as fh:
        for e in events:
            fh.write(canonical_encode(e.to_doc()))
            fh.write(b"\n")
    with open(out / "proofs.json", "wb") as fh:
        fh.write(canonical_encode([p.to_doc() for p in proofs]))
        fh.write(b"\n")
    (out / "checkpoint").write_bytes(format_checkpoint(cp))
    if prior_note is not None and consistency is not None:
        (out / "prior_checkpoint").write_bytes(prior_note)
        with open(out / "consistency.json", "wb") as fh:
            fh.write(canonical_encode(consistency.to_doc()))
            fh.write(b"\n")
    return out


def export_package_tar(kernel: Kernel, seq_from: Optional[int] = None,
                       seq_to: Optional[int] = None) -> bytes:
    """Same package as export_package, as an in-memory tar archive."""
    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        pkg = export_package(kernel, tmp, seq_from=seq_from, seq_to=seq_to)
        buf = io.BytesIO()
        with tarfile.open(fileobj=buf, mode="w") as tar:
            for name in sorted(p.name for p in pkg.iterdir()):
                path = pkg / name
                info = tarfile.TarInfo(name=name)
                data = path.read_bytes()
                info.size = len(data)
                info.mtime = int(time.time())
                tar.addfile(info, io.BytesIO(data))
        return buf.getvalue()
