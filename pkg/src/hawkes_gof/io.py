"""Sequence-file and config-file parsing.

The sequence format is line-delimited JSON, one record per line with
exactly the fields ``id`` (string), ``T`` (horizon), ``events``
(ascending array of times in (0, T]). It is canonical: emit writes
shortest-round-trip floats with fixed key order, so
emit(ingest(file)) reproduces a canonical file byte for byte.

The config format is flat ``key = value`` text; blank lines and lines
starting with ``#`` are ignored; array values are comma-separated.
"""

from __future__ import annotations

import json

from .errors import EmptyFile, ParseError
from .sequences import EventSequence, validate_sequence

__all__ = ["ingest", "emit", "read_config"]

_REQUIRED_KEYS = ("id", "T", "events")


def ingest(path: str) -> list[EventSequence]:
    """Read a sequence file; errors carry 1-based line numbers."""
    seqs: list[EventSequence] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(lineno, f"invalid JSON: {exc.msg}") from None
            if not isinstance(rec, dict):
                raise ParseError(lineno, "record is not an object")
            if set(rec) != set(_REQUIRED_KEYS):
                raise ParseError(
                    lineno,
                    f"record keys {sorted(rec)} != {sorted(_REQUIRED_KEYS)}",
                )
            if not isinstance(rec["id"], str):
                raise ParseError(lineno, "id must be a string")
            events = rec["events"]
            if not isinstance(events, list) or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool)
                for v in events
            ):
                raise ParseError(lineno, "events must be an array of numbers")
            if any(b < a for a, b in zip(events, events[1:])):
                raise ParseError(lineno, "events must be ascending")
            try:
                seq = validate_sequence(rec["id"], rec["T"], events)
            except Exception as exc:
                raise ParseError(lineno, str(exc)) from None
            seqs.append(seq)
    if not seqs:
        raise EmptyFile(f"no records in {path}")
    return seqs


def emit(seqs: list[EventSequence], path: str) -> None:
    """Write sequences in the canonical line-delimited format."""
    with open(path, "w", encoding="utf-8") as fh:
        for seq in seqs:
            rec = {
                "id": seq.id,
                "T": seq.horizon,
                "events": [float(t) for t in seq.times],
            }
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def read_config(path: str) -> dict[str, str]:
    """Parse flat key = value config text into a string mapping."""
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError(lineno, f"expected key = value, got {line!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if not key:
                raise ParseError(lineno, "empty key")
            if key in out:
                raise ParseError(lineno, f"duplicate key {key!r}")
            out[key] = value
    return out
