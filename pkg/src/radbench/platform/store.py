"""Append-only record log plus periodic snapshots.

Layout of a data directory::

    log.jsonl       one canonical JSON record per line
    snapshot.json   {"seq": <last applied seq>, "state": {...}}

Each log line is ``{"seq": n, "type": ..., "data": ..., "check": <sha256[:16]>}``
where ``check`` covers the canonical encoding of the other three fields.
A torn final line (crash mid-append) is detected by a missing newline or a
checksum mismatch and truncated on open; damage anywhere else is an error.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from pathlib import Path
from typing import Callable, Iterator, Optional

from ..errors import RadbenchError

LOG_NAME = "log.jsonl"
SNAPSHOT_NAME = "snapshot.json"

_kill_hook: Optional[Callable[[str], None]] = None


def set_kill_hook(hook: Optional[Callable[[str], None]]) -> None:
    """Install a callback invoked at every named kill point (tests only)."""
    global _kill_hook
    _kill_hook = hook


def killpoint(name: str) -> None:
    if _kill_hook is not None:
        _kill_hook(name)
        return
    target = os.environ.get("RADBENCH_KILLPOINT")
    if target and target == name:
        os._exit(99)


class CorruptLog(RadbenchError):
    pass


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def _check(seq: int, rtype: str, data) -> str:
    body = canonical_json({"seq": seq, "type": rtype, "data": data})
    return hashlib.sha256(body.encode("utf-8")).hexdigest()[:16]


def encode_record(seq: int, rtype: str, data) -> bytes:
    rec = {"seq": seq, "type": rtype, "data": data, "check": _check(seq, rtype, data)}
    return (canonical_json(rec) + "\n").encode("utf-8")


def _decode_line(line: bytes) -> dict:
    rec = json.loads(line.decode("utf-8"))
    if rec.get("check") != _check(rec["seq"], rec["type"], rec["data"]):
        raise ValueError("checksum mismatch")
    return rec


class RecordLog:
    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.path = self.directory / LOG_NAME
        self.snapshot_path = self.directory / SNAPSHOT_NAME
        self._lock = threading.Lock()
        self.last_seq = 0
        self._repair_tail()
        self._fd = os.open(self.path, os.O_WRONLY | os.O_APPEND | os.O_CREAT, 0o644)

    def close(self) -> None:
        if self._fd >= 0:
            os.close(self._fd)
            self._fd = -1

    def _repair_tail(self) -> None:
        if not self.path.exists():
            self.path.touch()
            return
        data = self.path.read_bytes()
        good_end = 0
        pos = 0
        while pos < len(data):
            nl = data.find(b"\n", pos)
            if nl < 0:
                break  # torn final line
            try:
                rec = _decode_line(data[pos:nl])
            except (ValueError, KeyError, UnicodeDecodeError):
                if data.find(b"\n", nl + 1) >= 0:
                    raise CorruptLog(f"damaged record at byte {pos} of {self.path}")
                break
            self.last_seq = rec["seq"]
            pos = good_end = nl + 1
        if good_end < len(data):
            with open(self.path, "r+b") as fh:
                fh.truncate(good_end)
                fh.flush()
                os.fsync(fh.fileno())

    def records(self, after_seq: int = 0) -> Iterator[dict]:
        with open(self.path, "rb") as fh:
            for line in fh:
                rec = _decode_line(line.rstrip(b"\n"))
                if rec["seq"] > after_seq:
                    yield rec

    def append(self, rtype: str, data) -> int:
        """Durably append one record; returns its sequence number."""
        with self._lock:
            seq = self.last_seq + 1
            payload = encode_record(seq, rtype, data)
            half = len(payload) // 2
            os.write(self._fd, payload[:half])
            killpoint(f"log.{rtype}.mid-write")
            os.write(self._fd, payload[half:])
            killpoint(f"log.{rtype}.before-fsync")
            os.fsync(self._fd)
            self.last_seq = seq
            return seq

    def read_snapshot(self) -> tuple[int, Optional[dict]]:
        if not self.snapshot_path.exists():
            return 0, None
        doc = json.loads(self.snapshot_path.read_text(encoding="utf-8"))
        return doc["seq"], doc["state"]

    def write_snapshot(self, seq: int, state: dict) -> None:
        tmp = self.snapshot_path.with_suffix(".json.tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(canonical_json({"seq": seq, "state": state}))
            fh.flush()
            killpoint("snapshot.before-fsync")
            os.fsync(fh.fileno())
        killpoint("snapshot.before-replace")
        os.replace(tmp, self.snapshot_path)
