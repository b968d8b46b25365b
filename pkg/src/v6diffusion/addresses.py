"""IPv6 address values, canonical text, nybble views and prefix masking.

An address is a 128-bit unsigned integer in network order. The model-facing
view is the 32-nybble sequence (one hex digit per position, most significant
first); the interchange views are canonical RFC 5952 text and the
space-separated word-address line used for debugging dumps.
"""

from __future__ import annotations

import ipaddress
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import MalformedAddress

_MAX_BITS = (1 << 128) - 1

NYBBLES_PER_ADDRESS = 32

#: Fixed-length sequence of 32 ints in [0, 15], most significant nybble first.
NybbleSequence = tuple


@dataclass(frozen=True, slots=True)
class Ipv6Address:
    """A 128-bit IPv6 address value."""

    bits: int

    def __post_init__(self):
        if not 0 <= self.bits <= _MAX_BITS:
            raise ValueError(f"address value out of range: {self.bits!r}")

    def __str__(self):
        return format_address(self)

    def __int__(self):
        return self.bits


@dataclass(frozen=True, slots=True)
class Prefix:
    """A masked address head: `length` leading bits, the rest zeroed."""

    bits: int
    length: int

    def __post_init__(self):
        if not 0 <= self.length <= 128:
            raise ValueError(f"prefix length out of range: {self.length}")
        if self.bits & ~_mask(self.length) & _MAX_BITS:
            raise ValueError("prefix has nonzero bits beyond its length")

    def covers(self, a: Ipv6Address) -> bool:
        return (a.bits & _mask(self.length)) == self.bits

    def __str__(self):
        return f"{format_address(Ipv6Address(self.bits))}/{self.length}"


def _mask(length: int) -> int:
    if length <= 0:
        return 0
    return (_MAX_BITS >> (128 - length)) << (128 - length)


def parse_address(text: str) -> Ipv6Address:
    """Parse textual IPv6 (full or ``::``-compressed) to its 128-bit value.

    Dotted-quad tails (IPv4-mapped forms) and zone identifiers are rejected:
    the pipeline deals in pure hexadecimal addresses only.
    """
    if not isinstance(text, str) or text != text.strip() or not text:
        raise MalformedAddress(f"not a clean address string: {text!r}")
    if "." in text:
        raise MalformedAddress(f"dotted-quad tail not accepted: {text!r}")
    if "%" in text:
        raise MalformedAddress(f"zone identifier not accepted: {text!r}")
    try:
        value = int(ipaddress.IPv6Address(text))
    except ValueError as exc:
        raise MalformedAddress(f"invalid IPv6 address {text!r}: {exc}") from None
    return Ipv6Address(value)


def format_address(a: Ipv6Address) -> str:
    """Canonical RFC 5952 text: lowercase, longest zero run as ``::``."""
    return str(ipaddress.IPv6Address(a.bits))


def to_nybbles(a: Ipv6Address) -> NybbleSequence:
    """All 32 hex digits of the address, most significant first."""
    bits = a.bits
    return tuple((bits >> (4 * (31 - j))) & 0xF for j in range(32))


def from_nybbles(nybbles: Sequence[int]) -> Ipv6Address:
    if len(nybbles) != NYBBLES_PER_ADDRESS:
        raise MalformedAddress(f"expected 32 nybbles, got {len(nybbles)}")
    bits = 0
    for v in nybbles:
        iv = int(v)
        if not 0 <= iv <= 0xF:
            raise MalformedAddress(f"nybble out of range: {v!r}")
        bits = (bits << 4) | iv
    return Ipv6Address(bits)


def to_word_address(nybbles: Sequence[int]) -> str:
    """Space-separated single hex chars, e.g. ``2 0 0 1 0 d b 8 ...``."""
    if len(nybbles) != NYBBLES_PER_ADDRESS:
        raise MalformedAddress(f"expected 32 nybbles, got {len(nybbles)}")
    return " ".join(format(int(v), "x") for v in nybbles)


def parse_word_address(text: str) -> NybbleSequence:
    parts = text.split(" ")
    if len(parts) != NYBBLES_PER_ADDRESS:
        raise MalformedAddress(f"expected 32 space-separated nybbles: {text!r}")
    try:
        nybbles = tuple(int(p, 16) for p in parts)
    except ValueError:
        raise MalformedAddress(f"non-hex nybble in word address: {text!r}") from None
    if any(len(p) != 1 for p in parts):
        raise MalformedAddress(f"each word must be a single hex char: {text!r}")
    return nybbles


def prefix_of(a: Ipv6Address, length: int) -> Prefix:
    """The /length head of `a` with low bits cleared."""
    if not 0 <= length <= 128:
        raise ValueError(f"prefix length out of range: {length}")
    return Prefix(a.bits & _mask(length), length)


def parse_prefix(text: str) -> Prefix:
    """Parse ``address/length`` CIDR text; host bits beyond length are cleared."""
    from .errors import MalformedPrefix

    head, sep, tail = text.partition("/")
    if not sep:
        raise MalformedPrefix(f"missing /length in prefix: {text!r}")
    try:
        length = int(tail)
    except ValueError:
        raise MalformedPrefix(f"bad prefix length in {text!r}") from None
    if not 0 <= length <= 128:
        raise MalformedPrefix(f"prefix length out of range in {text!r}")
    try:
        addr = parse_address(head)
    except MalformedAddress as exc:
        raise MalformedPrefix(str(exc)) from None
    return prefix_of(addr, length)


def addresses_from_ints(values: Iterable[int]):
    return [Ipv6Address(int(v)) for v in values]
