"""Tiny PNG files that carry a float32 vector in a tEXt chunk.

The image payload is a small grayscale thumbnail derived from the vector
hash, so blobs open in any viewer, while the exact vector rides along in
an auxiliary text chunk and survives byte-for-byte.
"""

import base64
import hashlib
import struct
import zlib

import numpy as np

from .errors import MalformedResponse

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
VECTOR_KEY = b"genir-vector"
THUMB_SIDE = 8


def _chunk(tag: bytes, body: bytes) -> bytes:
    return (
        struct.pack(">I", len(body))
        + tag
        + body
        + struct.pack(">I", zlib.crc32(tag + body) & 0xFFFFFFFF)
    )


def encode_vector_png(vector) -> bytes:
    """Serialize a real vector into a valid grayscale PNG."""
    vec = np.asarray(vector, dtype=np.float32)
    raw = vec.tobytes()
    # thumbnail pixels: hash of the payload, repeated to fill the patch
    digest = hashlib.blake2b(raw, digest_size=THUMB_SIDE * THUMB_SIDE).digest()
    scanlines = b"".join(
        b"\x00" + digest[r * THUMB_SIDE:(r + 1) * THUMB_SIDE]
        for r in range(THUMB_SIDE)
    )
    ihdr = struct.pack(">IIBBBBB", THUMB_SIDE, THUMB_SIDE, 8, 0, 0, 0, 0)
    text = VECTOR_KEY + b"\x00" + base64.b64encode(raw)
    return (
        PNG_SIGNATURE
        + _chunk(b"IHDR", ihdr)
        + _chunk(b"tEXt", text)
        + _chunk(b"IDAT", zlib.compress(scanlines, 9))
        + _chunk(b"IEND", b"")
    )


def decode_vector_png(data: bytes) -> np.ndarray:
    """Recover the float32 vector from a PNG produced by encode_vector_png."""
    if not data.startswith(PNG_SIGNATURE):
        raise MalformedResponse("not a PNG payload")
    pos = len(PNG_SIGNATURE)
    while pos + 8 <= len(data):
        (length,) = struct.unpack(">I", data[pos:pos + 4])
        tag = data[pos + 4:pos + 8]
        body = data[pos + 8:pos + 8 + length]
        if len(body) < length:
            raise MalformedResponse("truncated PNG chunk")
        if tag == b"tEXt" and body.startswith(VECTOR_KEY + b"\x00"):
            payload = body[len(VECTOR_KEY) + 1:]
            try:
                raw = base64.b64decode(payload, validate=True)
            except Exception as exc:
                raise MalformedResponse(f"bad vector chunk: {exc}") from exc
            if len(raw) % 4 != 0:
                raise MalformedResponse("vector chunk length not a float32 multiple")
            return np.frombuffer(raw, dtype=np.float32).copy()
        pos += 12 + length
    raise MalformedResponse("PNG carries no vector chunk")
