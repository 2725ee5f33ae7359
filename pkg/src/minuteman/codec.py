"""Wire framing for bus payloads: length-prefixed JSON header + raw body.

Audio-bearing messages carry PCM in the body; pure-control messages have an
empty body. The header is canonical JSON (sorted keys) so identical messages
are byte-identical, which keeps replays deterministic.
"""

from __future__ import annotations

import json
import struct

_LEN = struct.Struct(">I")


def pack(header: dict, body: bytes = b"") -> bytes:
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return _LEN.pack(len(head)) + head + body


def unpack(payload: bytes) -> tuple[dict, bytes]:
    (head_len,) = _LEN.unpack_from(payload, 0)
    head = json.loads(payload[4:4 + head_len].decode("utf-8"))
    return head, payload[4 + head_len:]
