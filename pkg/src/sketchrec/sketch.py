"""Linear-counting bitvector sketch.

Each user id is hashed (64-bit FNV-1a over its bytes) into one of ``m``
buckets and the bucket's bit is set. The number of distinct ids is estimated
from the fraction of bits still zero::

    n_hat = -m * ln(zeros / m)

Union is a bitwise OR of two sketches of the same width; the intersection is
recovered by inclusion-exclusion over the three estimates. Bits are held in a
Python ``int`` (bit ``i`` is ``1 << i``), which makes OR and popcount cheap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1

UserId = Union[bytes, str]


def _as_bytes(user_id: UserId) -> bytes:
    return user_id.encode("utf-8") if isinstance(user_id, str) else bytes(user_id)


def fnv1a_64(data: UserId) -> int:
    h = FNV_OFFSET
    for byte in _as_bytes(data):
        h ^= byte
        h = (h * FNV_PRIME) & _MASK64
    return h


def fnv1a_64_matrix(data: np.ndarray, lengths: np.ndarray | None = None) -> np.ndarray:
    """Vectorised FNV-1a over the rows of a ``(n, width)`` uint8 matrix.

    Row ``r`` hashes only its first ``lengths[r]`` bytes when ``lengths`` is
    given, otherwise the full width.
    """
    data = np.asarray(data, dtype=np.uint8)
    h = np.full(data.shape[0], FNV_OFFSET, dtype=np.uint64)
    prime = np.uint64(FNV_PRIME)
    for j in range(data.shape[1]):
        step = (h ^ data[:, j].astype(np.uint64)) * prime
        if lengths is None:
            h = step
        else:
            h = np.where(lengths > j, step, h)
    return h


def fnv1a_64_many(items: Sequence[UserId]) -> np.ndarray:
    raw = [_as_bytes(x) for x in items]
    if not raw:
        return np.zeros(0, dtype=np.uint64)
    lengths = np.fromiter((len(b) for b in raw), dtype=np.int64, count=len(raw))
    width = int(lengths.max())
    buf = np.zeros((len(raw), width), dtype=np.uint8)
    for row, b in enumerate(raw):
        buf[row, : len(b)] = np.frombuffer(b, dtype=np.uint8)
    return fnv1a_64_matrix(buf, None if (lengths == width).all() else lengths)


def auto_width(n_users: int) -> int:
    """Next power of two >= n_users / 10 (at least 1)."""
    target = max(1, math.ceil(n_users / 10))
    return 1 << (target - 1).bit_length()


@dataclass(frozen=True)
class CardinalityEstimate:
    value: float
    saturated: bool = False

    def __float__(self) -> float:
        return self.value


class LinearCountingSketch:
    """An ``m``-bit linear-counting sketch.

    Insertion is idempotent and order independent. A finished sketch should
    be treated as immutable; ``union`` and ``|`` return new sketches.
    """

    __slots__ = ("m", "bits", "inserted_events")

    def __init__(self, m: int, bits: int = 0, inserted_events: int = 0) -> None:
        if not isinstance(m, (int, np.integer)) or m < 1:
            raise ValueError(f"sketch width must be a positive integer, got {m!r}")
        m = int(m)
        if bits < 0 or bits >> m:
            raise ValueError("bit pattern does not fit in the sketch width")
        self.m = m
        self.bits = bits
        self.inserted_events = inserted_events

    @classmethod
    def from_hashes(cls, m: int, hashes: np.ndarray) -> "LinearCountingSketch":
        """Sketch with the buckets ``hashes mod m`` set."""
        sketch = cls(m)
        sketch._set_buckets(np.asarray(hashes, dtype=np.uint64) % np.uint64(m))
        sketch.inserted_events = len(hashes)
        return sketch

    @classmethod
    def from_users(cls, m: int, user_ids: Iterable[UserId]) -> "LinearCountingSketch":
        return cls.from_hashes(m, fnv1a_64_many(list(user_ids)))

    def bucket(self, user_id: UserId) -> int:
        return fnv1a_64(user_id) % self.m

    def insert(self, user_id: UserId) -> None:
        self.bits |= 1 << self.bucket(user_id)
        self.inserted_events += 1

    def update(self, user_ids: Iterable[UserId]) -> None:
        ids = list(user_ids)
        self._set_buckets(fnv1a_64_many(ids) % np.uint64(self.m))
        self.inserted_events += len(ids)

    def _set_buckets(self, buckets: np.ndarray) -> None:
        if len(buckets) == 0:
            return
        mask = np.zeros(self.m, dtype=bool)
        mask[buckets.astype(np.int64)] = True
        packed = np.packbits(mask, bitorder="little")
        self.bits |= int.from_bytes(packed.tobytes(), "little")

    def copy(self) -> "LinearCountingSketch":
        return LinearCountingSketch(self.m, self.bits, self.inserted_events)

    @property
    def ones(self) -> int:
        return self.bits.bit_count()

    @property
    def zero_count(self) -> int:
        return self.m - self.bits.bit_count()

    @property
    def zero_fraction(self) -> float:
        return self.zero_count / self.m

    def is_empty(self) -> bool:
        return self.bits == 0

    def estimate(self) -> CardinalityEstimate:
        return estimate_from_zeros(self.m, self.zero_count)

    def union(self, other: "LinearCountingSketch") -> "LinearCountingSketch":
        _check_width(self, other)
        return LinearCountingSketch(
            self.m, self.bits | other.bits, self.inserted_events + other.inserted_events
        )

    __or__ = union

    def overlaps(self, other: "LinearCountingSketch") -> bool:
        """True if the two sketches share at least one set bit."""
        _check_width(self, other)
        return (self.bits & other.bits) != 0

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LinearCountingSketch):
            return NotImplemented
        return self.m == other.m and self.bits == other.bits

    def __hash__(self) -> int:
        return hash((self.m, self.bits))

    def __repr__(self) -> str:
        return f"LinearCountingSketch(m={self.m}, ones={self.ones})"

    # Text form: "<m> <hex>", MSB-first within each byte, bit 0 = first bit
    # of the first byte; the pad bits of the last byte are zero.
    def to_hex(self) -> str:
        nbits = 8 * ((self.m + 7) // 8)
        flipped = int(format(self.bits, f"0{nbits}b")[::-1], 2)
        return flipped.to_bytes(nbits // 8, "big").hex()

    def to_text(self) -> str:
        return f"{self.m} {self.to_hex()}"

    @classmethod
    def from_hex(cls, m: int, text: str) -> "LinearCountingSketch":
        nbytes = (m + 7) // 8
        if len(text) != 2 * nbytes or text != text.lower():
            raise ValueError(f"expected {2 * nbytes} lowercase hex digits for m={m}")
        raw = bytes.fromhex(text)
        nbits = 8 * nbytes
        bits = int(format(int.from_bytes(raw, "big"), f"0{nbits}b")[::-1], 2)
        if bits >> m:
            raise ValueError("padding bits beyond the sketch width are set")
        return cls(m, bits)

    @classmethod
    def from_text(cls, text: str) -> "LinearCountingSketch":
        m_str, hex_str = text.split()
        return cls.from_hex(int(m_str), hex_str)


def _check_width(a: LinearCountingSketch, b: LinearCountingSketch) -> None:
    if a.m != b.m:
        raise ValueError(f"sketch widths differ: {a.m} != {b.m}")


def estimate_from_zeros(m: int, zeros: int) -> CardinalityEstimate:
    """Linear-counting estimate for ``zeros`` unset bits out of ``m``.

    A full sketch has no finite estimate; ``zeros`` is clamped to 1 and the
    result is flagged as saturated.
    """
    saturated = zeros == 0
    z = 1 if saturated else zeros
    if z == m:
        # empty sketch, or a saturated one-bit sketch (m ln m = 0)
        return CardinalityEstimate(0.0, saturated)
    return CardinalityEstimate(-m * math.log(z / m), saturated)


def jaccard_from_estimates(est_a: float, est_b: float, est_union: float) -> float:
    if est_union <= 0.0:
        return 0.0
    inter = max(0.0, est_a + est_b - est_union)
    return min(1.0, max(0.0, inter / est_union))


def estimate_intersection(a: LinearCountingSketch, b: LinearCountingSketch) -> float:
    _check_width(a, b)
    ea = a.estimate().value
    eb = b.estimate().value
    eu = (a | b).estimate().value
    return max(0.0, ea + eb - eu)


def estimate_jaccard(a: LinearCountingSketch, b: LinearCountingSketch) -> float:
    """Estimated |A n B| / |A u B|, clamped to [0, 1]; 0 for an empty union."""
    _check_width(a, b)
    return jaccard_from_estimates(
        a.estimate().value, b.estimate().value, (a | b).estimate().value
    )
