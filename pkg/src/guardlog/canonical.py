"""Canonical JSON encoding: the byte form every hash in the system is taken over.

Rules (fixed; re-implemented independently by the audit verifier and the web
console, so any drift here is caught by cross-implementation tests):

- objects: keys sorted by UTF-8 byte order, no insignificant whitespace
- strings: NFC-normalized UTF-8; escapes limited to \\" \\\\ \\b \\f \\n \\r \\t
  and \\u00XX for remaining control characters (lowercase hex)
- integers: shortest decimal form; booleans/null as JSON literals
- floats are not representable (energy and counts are integers)
"""

from __future__ import annotations

import unicodedata
from typing import Any

from .errors import EncodingError

# Two-character escapes per JSON; everything else < 0x20 becomes \u00xx.
_SHORT_ESCAPES = {
    '"': '\\"',
    "\\": "\\\\",
    "\b": "\\b",
    "\f": "\\f",
    "\n": "\\n",
    "\r": "\\r",
    "\t": "\\t",
}


def _encode_string(s: str, out: list[str]) -> None:
    s = unicodedata.normalize("NFC", s)
    out.append('"')
    for ch in s:
        esc = _SHORT_ESCAPES.get(ch)
        if esc is not None:
            out.append(esc)
        elif ch < "\x20":
            out.append("\\u%04x" % ord(ch))
        else:
            out.append(ch)
    out.append('"')


def _encode(value: Any, out: list[str]) -> None:
    if value is None:
        out.append("null")
    elif value is True:
        out.append("true")
    elif value is False:
        out.append("false")
    elif isinstance(value, int):
        out.append(str(value))
    elif isinstance(value, str):
        _encode_string(value, out)
    elif isinstance(value, (list, tuple)):
        out.append("[")
        for i, item in enumerate(value):
            if i:
                out.append(",")
            _encode(item, out)
        out.append("]")
    elif isinstance(value, dict):
        pairs = []
        for k, v in value.items():
            if not isinstance(k, str):
                raise EncodingError(f"object key must be a string, got {type(k).__name__}")
            pairs.append((unicodedata.normalize("NFC", k), v))
        pairs.sort(key=lambda kv: kv[0].encode("utf-8"))
        for i in range(1, len(pairs)):
            if pairs[i][0] == pairs[i - 1][0]:
                raise EncodingError(f"duplicate key after NFC normalization: {pairs[i][0]!r}")
        out.append("{")
        for i, (k, v) in enumerate(pairs):
            if i:
                out.append(",")
            _encode_string(k, out)
            out.append(":")
            _encode(v, out)
        out.append("}")
    else:
        raise EncodingError(f"unsupported value kind: {type(value).__name__}")


def canonical_encode(doc: Any) -> bytes:
    """Encode a structured document (maps/lists/strings/ints/bools/null) to
    canonical JSON bytes. Deterministic: equal documents yield equal bytes
    regardless of key insertion order."""
    out: list[str] = []
    _encode(doc, out)
    return "".join(out).encode("utf-8")
