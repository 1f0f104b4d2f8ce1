"""Wire protocol: JSON envelopes over WebSocket text frames or over plain TCP
with 4-byte big-endian length prefixes. Schemas are documented with examples
in PROTOCOL.md; the protocol version is announced in the server hello.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from typing import Optional

PROTOCOL_VERSION = 1
MAX_FRAME_BYTES = 64 * 1024 * 1024

CLIENT_MESSAGE_TYPES = frozenset(
    {
        "pilot_acquire",
        "pilot_release",
        "input",
        "mode_set",
        "preset_goto",
        "fault_clear",
        "seq_upload",
        "seq_play",
        "seq_stop",
        "log_fetch",
        "analyze",
        "config_get",
    }
)

SERVER_MESSAGE_TYPES = frozenset(
    {
        "hello",
        "snapshot",
        "ok",
        "error",
        "not_pilot",
        "busy",
        "pilot_granted",
        "pilot_denied",
        "pilot_released",
        "play_done",
        "preset_done",
        "log",
        "report",
        "config",
    }
)

ALL_MESSAGE_TYPES = CLIENT_MESSAGE_TYPES | SERVER_MESSAGE_TYPES


class ProtocolError(ValueError):
    """Malformed frame or envelope."""


@dataclass(frozen=True)
class Envelope:
    type: str
    seq_no: int
    payload: object = None
    reply_to: Optional[int] = None

    def to_dict(self) -> dict:
        d = {"type": self.type, "seq_no": self.seq_no, "payload": self.payload}
        if self.reply_to is not None:
            d["reply_to"] = self.reply_to
        return d


def encode(env: Envelope) -> bytes:
    """Envelope -> UTF-8 JSON bytes (one WebSocket text frame / TCP frame body)."""
    return json.dumps(env.to_dict(), separators=(",", ":"), sort_keys=True).encode("utf-8")


def decode(data: bytes | str) -> Envelope:
    """Parse and structurally validate one envelope."""
    try:
        obj = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ProtocolError(f"frame is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ProtocolError("envelope must be a JSON object")
    msg_type = obj.get("type")
    seq_no = obj.get("seq_no")
    if not isinstance(msg_type, str):
        raise ProtocolError("envelope missing string 'type'")
    if not isinstance(seq_no, int) or isinstance(seq_no, bool):
        raise ProtocolError("envelope missing integer 'seq_no'")
    reply_to = obj.get("reply_to")
    if reply_to is not None and (not isinstance(reply_to, int) or isinstance(reply_to, bool)):
        raise ProtocolError("'reply_to' must be an integer when present")
    return Envelope(type=msg_type, seq_no=seq_no, payload=obj.get("payload"), reply_to=reply_to)


def frame(data: bytes) -> bytes:
    """Prefix a frame body with its 4-byte big-endian length (TCP transport)."""
    if len(data) > MAX_FRAME_BYTES:
        raise ProtocolError(f"frame of {len(data)} bytes exceeds the {MAX_FRAME_BYTES} cap")
    return struct.pack(">I", len(data)) + data


class FrameDecoder:
    """Incremental decoder for the length-prefixed TCP transport."""

    def __init__(self):
        self._buf = bytearray()

    def feed(self, data: bytes) -> list[bytes]:
        self._buf.extend(data)
        frames = []
        while True:
            if len(self._buf) < 4:
                break
            (length,) = struct.unpack(">I", self._buf[:4])
            if length > MAX_FRAME_BYTES:
                raise ProtocolError(f"frame of {length} bytes exceeds the {MAX_FRAME_BYTES} cap")
            if len(self._buf) < 4 + length:
                break
            frames.append(bytes(self._buf[4 : 4 + length]))
            del self._buf[: 4 + length]
        return frames
