"""Unified telemetry model: events, hashed partition keys, time buckets and fact ids.

Everything in this module is immutable and pure, so values can be shared
freely across threads. The byte encodings used by ``hash_key`` and
``fact_id`` are normative: they must stay bit-exact across processes and
runs, because fact ids key both the alert stream and the fact store.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field

__all__ = [
    "Event",
    "PartitionKey",
    "BucketIndex",
    "FactId",
    "PayloadError",
    "hash_key",
    "propagation_delay",
    "clamped_delay",
    "bucket_of",
    "window_end",
    "fact_id",
    "cluster_id",
    "canonical_json",
    "encode_payload",
    "decode_payload",
]

KEY_DIGEST_LEN = 32
FACT_ID_LEN = 16

_PAYLOAD_SCALARS = (str, int, float, bool)


class PayloadError(ValueError):
    """Raised when an event payload cannot be decoded as a flat scalar map."""


@dataclass(frozen=True, slots=True)
class PartitionKey:
    """Cryptographically hashed partition key; never carries raw identifiers."""

    digest: bytes

    def __post_init__(self):
        if len(self.digest) != KEY_DIGEST_LEN:
            raise ValueError(f"partition key digest must be {KEY_DIGEST_LEN} bytes")

    @property
    def hex(self) -> str:
        return self.digest.hex()

    @classmethod
    def from_hex(cls, text: str) -> "PartitionKey":
        return cls(bytes.fromhex(text))


@dataclass(frozen=True, slots=True)
class Event:
    """One telemetry record: event time, arrival time, hashed key and payload.

    Timestamps are milliseconds since the epoch. Arrival before event time is
    allowed (edge clock skew); consumers that need non-negative delays must
    clamp explicitly via :func:`clamped_delay`.
    """

    event_time: int
    arrival_time: int
    key: PartitionKey
    sector_id: str
    stream_id: str
    payload: bytes = field(repr=False)


@dataclass(frozen=True, slots=True)
class BucketIndex:
    """Tumbling time bucket: ``index = floor(t / width_ms)``."""

    index: int
    width_ms: int

    def __post_init__(self):
        if self.width_ms <= 0:
            raise ValueError("bucket width must be positive")

    @property
    def start_ms(self) -> int:
        return self.index * self.width_ms

    @property
    def end_ms(self) -> int:
        return (self.index + 1) * self.width_ms


@dataclass(frozen=True, slots=True)
class FactId:
    """16-byte identifier, fully determined by (rule, key, bucket)."""

    value: bytes

    def __post_init__(self):
        if len(self.value) != FACT_ID_LEN:
            raise ValueError(f"fact id must be {FACT_ID_LEN} bytes")

    @property
    def hex(self) -> str:
        return self.value.hex()

    @classmethod
    def from_hex(cls, text: str) -> "FactId":
        return cls(bytes.fromhex(text))


def hash_key(raw: bytes | str) -> PartitionKey:
    """One-way SHA-256 of a raw identifier (username, source IP, MAC, ...)."""
    if isinstance(raw, str):
        raw = raw.encode("utf-8")
    if not raw:
        raise ValueError("cannot hash an empty identifier")
    return PartitionKey(hashlib.sha256(raw).digest())


def propagation_delay(e: Event) -> int:
    """Transit delay in ms: arrival minus event time. Negative under skew."""
    return e.arrival_time - e.event_time


def clamped_delay(e: Event) -> int:
    """Propagation delay clamped at zero, as fed to watermark statistics."""
    d = propagation_delay(e)
    return d if d > 0 else 0


def bucket_of(t_ms: int, width_ms: int) -> BucketIndex:
    """Map a timestamp to its tumbling bucket (floor division, not truncation)."""
    if width_ms <= 0:
        raise ValueError("bucket width must be positive")
    return BucketIndex(index=t_ms // width_ms, width_ms=width_ms)


def window_end(bucket: BucketIndex) -> int:
    """Exclusive end timestamp of a bucket's window."""
    return bucket.end_ms


def fact_id(rule_id: str, key: PartitionKey, bucket: BucketIndex) -> FactId:
    """Deterministic fact id for (rule, key, bucket).

    Canonical encoding (normative, bit-exact):
    ``utf8(rule_id) || 0x00 || key.digest || 0x00 || be64(index) || be64(width_ms)``.
    Bucket width is part of the encoding so the same rule id with different
    window widths can never collide.
    """
    if not rule_id:
        raise ValueError("rule_id must be non-empty")
    h = hashlib.sha256()
    h.update(rule_id.encode("utf-8"))
    h.update(b"\x00")
    h.update(key.digest)
    h.update(b"\x00")
    h.update(struct.pack(">q", bucket.index))
    h.update(struct.pack(">q", bucket.width_ms))
    return FactId(h.digest()[:FACT_ID_LEN])


def cluster_id(fid: FactId, family_tag: str) -> bytes:
    """16-byte anonymized grouping id: hash of fact id plus rule family tag.

    Lets cross-sector subscribers group related alerts without any identity
    exposure; revisions of the same fact share the cluster id.
    """
    h = hashlib.sha256()
    h.update(fid.value)
    h.update(family_tag.encode("utf-8"))
    return h.digest()[:FACT_ID_LEN]


def canonical_json(obj) -> bytes:
    """Canonical JSON bytes: sorted keys, no whitespace, UTF-8."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def encode_payload(fields: dict) -> bytes:
    """Encode a flat field map as canonical JSON payload bytes."""
    for k, v in fields.items():
        if not isinstance(k, str) or not isinstance(v, _PAYLOAD_SCALARS):
            raise PayloadError(f"payload must be a flat str->scalar map, got {k!r}={v!r}")
    return canonical_json(fields)


def decode_payload(payload: bytes) -> dict:
    """Decode payload bytes into a flat field map; raises PayloadError otherwise."""
    try:
        obj = json.loads(payload)
    except (ValueError, UnicodeDecodeError) as exc:
        raise PayloadError(f"payload is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise PayloadError("payload must be a JSON object")
    for k, v in obj.items():
        if not isinstance(v, _PAYLOAD_SCALARS) or isinstance(v, dict):
            raise PayloadError(f"payload field {k!r} is not a scalar")
    return obj
