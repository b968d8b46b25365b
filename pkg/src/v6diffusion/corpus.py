"""Seed-set ingestion and scanner file formats.

Seed files are one address per line with ``#`` comments and blank lines
skipped. Malformed lines are collected with their line numbers instead of
aborting the load; duplicate addresses (by 128-bit value, not text) keep
their first occurrence. Target lists are canonical one-address-per-line;
result files are either bare address lines (present means active) or
``address,0|1`` lines.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import IO, Iterable, Iterator, Sequence

import numpy as np

from .addresses import (Ipv6Address, format_address, parse_address,
                        parse_prefix, to_nybbles)
from .dealias import AliasPrefixSet
from .errors import EmptyCorpus, MalformedAddress, MalformedResultLine
from .probing import Prober


@dataclass(frozen=True, slots=True)
class ScanResult:
    address: Ipv6Address
    active: bool


@dataclass(frozen=True, slots=True)
class Reject:
    line_no: int
    text: str
    reason: str


class SeedSet:
    """Ordered, duplicate-free collection of addresses."""

    __slots__ = ("addresses", "_members")

    def __init__(self, addresses: Sequence[Ipv6Address]):
        unique: list[Ipv6Address] = []
        members: set[int] = set()
        for a in addresses:
            if a.bits not in members:
                members.add(a.bits)
                unique.append(a)
        self.addresses = tuple(unique)
        self._members = frozenset(members)

    @property
    def n(self) -> int:
        return len(self.addresses)

    def __len__(self):
        return self.n

    def __iter__(self) -> Iterator[Ipv6Address]:
        return iter(self.addresses)

    def __contains__(self, a) -> bool:
        bits = a.bits if isinstance(a, Ipv6Address) else int(a)
        return bits in self._members

    def __eq__(self, other):
        return isinstance(other, SeedSet) and self.addresses == other.addresses

    def to_nybble_array(self) -> np.ndarray:
        """(n, 32) uint8 token matrix for model training."""
        out = np.empty((self.n, 32), dtype=np.uint8)
        for i, a in enumerate(self.addresses):
            out[i] = to_nybbles(a)
        return out


@dataclass
class SeedLoadResult:
    seeds: SeedSet
    rejects: list[Reject]
    duplicates: int


def _content_lines(source: Iterable[str]) -> Iterator[tuple[int, str]]:
    for line_no, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield line_no, line


def load_seed_set(source: Iterable[str]) -> SeedLoadResult:
    """Parse, validate and deduplicate a seed stream.

    Raises EmptyCorpus when no line parses; malformed lines are reported,
    not fatal, so a bad record cannot sink a multi-million-line ingest.
    """
    addresses: list[Ipv6Address] = []
    rejects: list[Reject] = []
    for line_no, line in _content_lines(source):
        try:
            addresses.append(parse_address(line))
        except MalformedAddress as exc:
            rejects.append(Reject(line_no, line, str(exc)))
    seeds = SeedSet(addresses)
    if seeds.n == 0:
        raise EmptyCorpus(f"no valid addresses in seed input ({len(rejects)} rejects)")
    return SeedLoadResult(seeds, rejects, duplicates=len(addresses) - seeds.n)


def prescan_seeds(seeds: SeedSet, prober: Prober, chunk: int = 8192) -> SeedSet:
    """Keep only seeds the prober reports active, preserving order."""
    kept: list[Ipv6Address] = []
    addrs = seeds.addresses
    for i in range(0, len(addrs), chunk):
        batch = addrs[i:i + chunk]
        for a, active in zip(batch, prober.probe_batch(batch)):
            if active:
                kept.append(a)
    return SeedSet(kept)


def load_alias_prefixes(source: Iterable[str]) -> AliasPrefixSet:
    """Read one CIDR per line into the coarse-filter trie."""
    trie = AliasPrefixSet()
    for _line_no, line in _content_lines(source):
        trie.add(parse_prefix(line))
    return trie


def write_target_list(addresses: Iterable[Ipv6Address], sink: IO[str]) -> int:
    n = 0
    for a in addresses:
        sink.write(format_address(a) + "\n")
        n += 1
    return n


def read_result_list(source: Iterable[str]) -> list[ScanResult]:
    """Accepts bare-address lines (active) or ``address,0|1`` lines."""
    results: list[ScanResult] = []
    for line_no, line in _content_lines(source):
        addr_text, sep, flag = line.partition(",")
        try:
            address = parse_address(addr_text.strip())
        except MalformedAddress as exc:
            raise MalformedResultLine(f"line {line_no}: {exc}") from None
        if not sep:
            results.append(ScanResult(address, True))
            continue
        flag = flag.strip()
        if flag not in ("0", "1"):
            raise MalformedResultLine(f"line {line_no}: activity flag must be 0 or 1, got {flag!r}")
        results.append(ScanResult(address, flag == "1"))
    return results
