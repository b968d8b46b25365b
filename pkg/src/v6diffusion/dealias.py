"""Alias-address removal.

Aliased regions (one responder answering a whole prefix) inflate hit counts,
so candidates pass through two stages: a coarse filter against a trie of
known alias prefixes, then a fine probe check for the survivors. The fine
check fixes the top 96 bits and probes 16 random distinct suffixes; only if
all 16 answer is the address called an alias.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .addresses import Ipv6Address, Prefix
from .probing import Prober

FINE_PROBE_COUNT = 16
FINE_PREFIX_BITS = 96


class AliasPrefixSet:
    """Binary trie over address bits answering "is `a` covered by any stored prefix?"."""

    __slots__ = ("_root", "_prefixes")

    def __init__(self):
        # node := [zero_child, one_child, terminal]
        self._root = [None, None, False]
        self._prefixes: list[Prefix] = []

    def add(self, prefix: Prefix) -> None:
        node = self._root
        for i in range(prefix.length):
            bit = (prefix.bits >> (127 - i)) & 1
            if node[bit] is None:
                node[bit] = [None, None, False]
            node = node[bit]
        if not node[2]:
            node[2] = True
            self._prefixes.append(prefix)

    def covers(self, a: Ipv6Address) -> bool:
        node = self._root
        if node[2]:
            return True
        bits = a.bits
        for i in range(128):
            node = node[(bits >> (127 - i)) & 1]
            if node is None:
                return False
            if node[2]:
                return True
        return False

    def __len__(self):
        return len(self._prefixes)

    def __iter__(self):
        return iter(self._prefixes)


@dataclass(frozen=True, slots=True)
class AliasVerdict:
    address: Ipv6Address
    stage: str  # "coarse" | "fine"
    is_alias: bool
    probes_used: int


@dataclass
class AliasReport:
    total_in: int = 0
    duplicates_dropped: int = 0
    coarse_aliases: int = 0
    fine_aliases: int = 0
    clean: int = 0
    verdicts: list[AliasVerdict] = field(default_factory=list)

    def lines(self) -> Iterable[str]:
        yield (f"# in={self.total_in} dup={self.duplicates_dropped} "
               f"coarse_alias={self.coarse_aliases} fine_alias={self.fine_aliases} "
               f"clean={self.clean}")
        for v in self.verdicts:
            yield f"{v.address},{v.stage},{'alias' if v.is_alias else 'nonalias'}"


def coarse_filter(candidates: Sequence[Ipv6Address],
                  aliases: AliasPrefixSet) -> tuple[list[Ipv6Address], list[Ipv6Address]]:
    """Partition candidates by trie coverage, preserving order."""
    nonalias, alias = [], []
    for a in candidates:
        (alias if aliases.covers(a) else nonalias).append(a)
    return nonalias, alias


def fine_probe_targets(a: Ipv6Address, rng: np.random.Generator,
                       prefix_bits: int = FINE_PREFIX_BITS) -> list[Ipv6Address]:
    """16 addresses sharing `a`'s top 96 bits with distinct random suffixes.

    The candidate's own suffix is excluded so an actually-live host cannot
    vote for its own alias verdict.
    """
    tail = 128 - prefix_bits
    head = a.bits & ~((1 << tail) - 1)
    own = a.bits & ((1 << tail) - 1)
    suffixes: set[int] = set()
    while len(suffixes) < FINE_PROBE_COUNT:
        chunk = rng.integers(0, 1 << tail, size=FINE_PROBE_COUNT, dtype=np.uint64)
        for s in chunk.tolist():
            if s != own:
                suffixes.add(s)
            if len(suffixes) == FINE_PROBE_COUNT:
                break
    return [Ipv6Address(head | s) for s in sorted(suffixes)]


def classify_fine(a: Ipv6Address, prober: Prober, rng: np.random.Generator,
                  prefix_bits: int = FINE_PREFIX_BITS) -> AliasVerdict:
    """Alias iff all 16 random same-prefix probes report active."""
    targets = fine_probe_targets(a, rng, prefix_bits)
    verdicts = prober.probe_batch(targets)
    return AliasVerdict(a, "fine", all(verdicts), len(targets))


def dealias(candidates: Sequence[Ipv6Address], aliases: AliasPrefixSet,
            prober: Prober, rng: np.random.Generator,
            prefix_bits: int = FINE_PREFIX_BITS,
            probe_chunk: int = 4096) -> tuple[list[Ipv6Address], AliasReport]:
    """Dedup, coarse-filter, then fine-probe the coarse survivors.

    Fine probes are batched through the prober in chunks, 16 per candidate;
    verdict assembly preserves candidate order.
    """
    report = AliasReport(total_in=len(candidates))

    seen: set[int] = set()
    unique: list[Ipv6Address] = []
    for a in candidates:
        if a.bits not in seen:
            seen.add(a.bits)
            unique.append(a)
    report.duplicates_dropped = report.total_in - len(unique)

    survivors, coarse_hits = coarse_filter(unique, aliases)
    report.coarse_aliases = len(coarse_hits)
    for a in coarse_hits:
        report.verdicts.append(AliasVerdict(a, "coarse", True, 0))

    # fine stage: one flat target list, probed in chunks, regrouped per candidate
    targets: list[Ipv6Address] = []
    for a in survivors:
        targets.extend(fine_probe_targets(a, rng, prefix_bits))
    flat: list[bool] = []
    for i in range(0, len(targets), probe_chunk):
        flat.extend(prober.probe_batch(targets[i:i + probe_chunk]))

    clean: list[Ipv6Address] = []
    for idx, a in enumerate(survivors):
        block = flat[idx * FINE_PROBE_COUNT:(idx + 1) * FINE_PROBE_COUNT]
        is_alias = all(block)
        report.verdicts.append(AliasVerdict(a, "fine", is_alias, FINE_PROBE_COUNT))
        if is_alias:
            report.fine_aliases += 1
        else:
            clean.append(a)
    report.clean = len(clean)
    return clean, report


def prefix_set_from_cidrs(prefixes: Iterable[Prefix]) -> AliasPrefixSet:
    s = AliasPrefixSet()
    for p in prefixes:
        s.add(p)
    return s
