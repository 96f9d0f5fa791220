"""Glob patterns over target paths.

Grammar: pattern := segment ("/" segment)* ; segment := "**" | literal with
optional "*" runs. `*` inside a segment matches a run of non-"/" characters,
`*` alone matches one whole segment, `**` matches zero or more segments and
must occupy a whole segment.

Also provides structural containment (does pattern P authorize everything
pattern C does?) for envelope subset checks; undecidable-looking cases are
conservatively rejected.
"""

from __future__ import annotations

import re
from functools import lru_cache
from typing import List, Tuple

from .errors import PatternError

_PATTERN_SEGMENT_RE = re.compile(r"[a-z0-9_.\-*]+\Z")


def validate_pattern(pattern: str) -> None:
    """Raises PatternError for syntactically invalid patterns. Called at
    actor/envelope creation time, never at check time."""
    if not pattern:
        raise PatternError("empty pattern")
    for seg in pattern.split("/"):
        if seg == "**":
            continue
        if not _PATTERN_SEGMENT_RE.match(seg):
            raise PatternError(f"bad pattern segment {seg!r} in {pattern!r}")
        if "**" in seg:
            raise PatternError(f"'**' must occupy a whole segment: {pattern!r}")


@lru_cache(maxsize=4096)
def _segment_regex(seg: str) -> "re.Pattern[str]":
    parts = seg.split("*")
    return re.compile("[^/]*".join(re.escape(p) for p in parts) + r"\Z")


def _match_segments(pat: Tuple[str, ...], tgt: Tuple[str, ...]) -> bool:
    if not pat:
        return not tgt
    head = pat[0]
    if head == "**":
        return any(_match_segments(pat[1:], tgt[i:]) for i in range(len(tgt) + 1))
    if not tgt:
        return False
    if not _segment_regex(head).match(tgt[0]):
        return False
    return _match_segments(pat[1:], tgt[1:])


def match_pattern(pattern: str, target: str) -> bool:
    """Does the glob pattern match the target path?"""
    return _match_segments(tuple(pattern.split("/")), tuple(target.split("/")))


def _covers_segment(p: str, c: str) -> bool:
    """Every string matched by segment-pattern c is matched by p (sound,
    conservatively incomplete)."""
    if p == "":
        return c == ""
    if p[0] == "*":
        return any(_covers_segment(p[1:], c[j:]) for j in range(len(c) + 1))
    if not c or c[0] == "*":
        return False  # a literal never covers a wildcard
    if c[0] == p[0]:
        return _covers_segment(p[1:], c[1:])
    return False


def _covers_segments(p: Tuple[str, ...], c: Tuple[str, ...]) -> bool:
    if not p:
        return not c
    if p[0] == "**":
        return any(_covers_segments(p[1:], c[i:]) for i in range(len(c) + 1))
    if not c:
        return False
    if c[0] == "**":
        return False  # child spans arbitrary depth, parent segment cannot
    if not _covers_segment(p[0], c[0]):
        return False
    return _covers_segments(p[1:], c[1:])


def pattern_covers(parent: str, child: str) -> bool:
    """True when every target matched by `child` is matched by `parent`."""
    return _covers_segments(tuple(parent.split("/")), tuple(child.split("/")))
