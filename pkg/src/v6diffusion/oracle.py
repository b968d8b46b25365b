"""Synthetic ground-truth address space for offline end-to-end runs.

A universe is a set of /64 prefixes, each carrying one enumerable
interface-identifier pattern (low-value counters, fixed-stride subnets, or
templated words with a few free nybbles — the shapes administrators actually
use), plus a set of /96 alias regions where every suffix answers. Activity
is a pure predicate, so the whole universe doubles as a deterministic prober
and exact hit counting stays possible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .addresses import Ipv6Address
from .corpus import SeedSet
from .sampling import CandidateSet

_LOW64 = (1 << 64) - 1


@dataclass(frozen=True)
class CounterPattern:
    """Suffixes 1..count under the prefix (think ::1, ::2, ...)."""
    count: int

    def contains(self, iid: int) -> bool:
        return 1 <= iid <= self.count

    @property
    def size(self) -> int:
        return self.count

    def member(self, i: int) -> int:
        return 1 + i

    def to_dict(self):
        return {"kind": "counter", "count": self.count}


@dataclass(frozen=True)
class StridePattern:
    """Suffixes base, base+stride, ... (fixed-stride subnet numbering)."""
    base: int
    stride: int
    count: int

    def contains(self, iid: int) -> bool:
        if iid < self.base:
            return False
        q, r = divmod(iid - self.base, self.stride)
        return r == 0 and q < self.count

    @property
    def size(self) -> int:
        return self.count

    def member(self, i: int) -> int:
        return self.base + i * self.stride

    def to_dict(self):
        return {"kind": "stride", "base": self.base, "stride": self.stride,
                "count": self.count}


@dataclass(frozen=True)
class WordPattern:
    """16-nybble template; positions marked -1 range over all hex digits."""
    template: tuple

    def __post_init__(self):
        if len(self.template) != 16:
            raise ValueError("template must cover 16 IID nybbles")

    @property
    def free_positions(self) -> tuple:
        return tuple(i for i, v in enumerate(self.template) if v < 0)

    def contains(self, iid: int) -> bool:
        for pos, want in enumerate(self.template):
            if want < 0:
                continue
            if (iid >> (4 * (15 - pos))) & 0xF != want:
                return False
        return True

    @property
    def size(self) -> int:
        return 16 ** len(self.free_positions)

    def member(self, i: int) -> int:
        iid = 0
        free = self.free_positions
        digits = []
        for _ in free:
            digits.append(i & 0xF)
            i >>= 4
        digits.reverse()
        it = iter(digits)
        for pos, want in enumerate(self.template):
            nyb = next(it) if want < 0 else want
            iid = (iid << 4) | nyb
        return iid

    def to_dict(self):
        return {"kind": "word", "template": list(self.template)}


def _pattern_from_dict(d: dict):
    kind = d["kind"]
    if kind == "counter":
        return CounterPattern(d["count"])
    if kind == "stride":
        return StridePattern(d["base"], d["stride"], d["count"])
    if kind == "word":
        return WordPattern(tuple(d["template"]))
    raise ValueError(f"unknown pattern kind {kind!r}")


@dataclass(frozen=True)
class UniverseConfig:
    n_active_prefixes: int = 32
    n_alias_regions: int = 4
    counter_max: int = 512
    stride_count_max: int = 256
    word_free_nybbles: int = 2

    def to_dict(self):
        return {"n_active_prefixes": self.n_active_prefixes,
                "n_alias_regions": self.n_alias_regions,
                "counter_max": self.counter_max,
                "stride_count_max": self.stride_count_max,
                "word_free_nybbles": self.word_free_nybbles}


class SyntheticUniverse:
    """Deterministic activity oracle; implements the prober contract."""

    def __init__(self, patterns: dict[int, object], alias_prefixes: Sequence[int],
                 rng_seed: int = 0):
        self.patterns = dict(patterns)           # top-64 value -> pattern
        self.alias_prefixes = frozenset(alias_prefixes)  # top-96 values
        self.rng_seed = rng_seed
        self._order = sorted(self.patterns)
        self._sizes = [self.patterns[p].size for p in self._order]
        self._cum = np.cumsum([0] + self._sizes)

    # -- predicates ----------------------------------------------------------

    def is_active(self, a: Ipv6Address) -> bool:
        if (a.bits >> 32) in self.alias_prefixes:
            return True
        pattern = self.patterns.get(a.bits >> 64)
        return pattern is not None and pattern.contains(a.bits & _LOW64)

    def in_alias_region(self, a: Ipv6Address) -> bool:
        return (a.bits >> 32) in self.alias_prefixes

    def probe_batch(self, addresses: Sequence[Ipv6Address]) -> list[bool]:
        return [self.is_active(a) for a in addresses]

    # -- enumeration ---------------------------------------------------------

    @property
    def n_active(self) -> int:
        return int(self._cum[-1])

    def active_at(self, index: int) -> Ipv6Address:
        """index-th active pattern address, prefixes in sorted order."""
        k = int(np.searchsorted(self._cum, index, side="right")) - 1
        prefix = self._order[k]
        iid = self.patterns[prefix].member(index - int(self._cum[k]))
        return Ipv6Address((prefix << 64) | iid)

    def sample_seeds(self, n: int, seed: int) -> SeedSet:
        if n > self.n_active:
            raise ValueError(f"universe has only {self.n_active} active addresses")
        rng = np.random.default_rng([self.rng_seed, seed])
        idx = rng.choice(self.n_active, size=n, replace=False)
        return SeedSet([self.active_at(int(i)) for i in idx])

    def random_baseline(self, m: int, seed: int) -> CandidateSet:
        """Control arm: seed-prefix heads with uniformly random 64-bit tails."""
        rng = np.random.default_rng([self.rng_seed, seed, 1])
        prefixes = self._order
        picks = rng.integers(0, len(prefixes), size=m)
        tails = rng.integers(0, 1 << 64, size=m, dtype=np.uint64)
        addrs = [Ipv6Address((prefixes[int(p)] << 64) | int(t))
                 for p, t in zip(picks, tails)]
        return CandidateSet(addrs, {"kind": "random_baseline", "seed": seed, "m": m})

    # -- persistence -----------------------------------------------------------

    def to_json(self) -> str:
        return json.dumps({
            "rng_seed": self.rng_seed,
            "patterns": {format(p, "016x"): self.patterns[p].to_dict()
                         for p in self._order},
            "alias_prefixes": [format(p, "024x") for p in sorted(self.alias_prefixes)],
        }, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "SyntheticUniverse":
        d = json.loads(text)
        patterns = {int(k, 16): _pattern_from_dict(v) for k, v in d["patterns"].items()}
        aliases = [int(x, 16) for x in d["alias_prefixes"]]
        return cls(patterns, aliases, d.get("rng_seed", 0))


_REGISTRY_HEADS = (0x2001, 0x2A01, 0x2400, 0x2600)


def build_universe(config: UniverseConfig, seed: int) -> SyntheticUniverse:
    """Deterministic universe: distinct global-unicast /64s, varied patterns,
    alias /96 regions disjoint from every active /64.

    Prefixes mimic allocation practice: a registry head, a random
    organization block, then low-entropy site and subnet fields.
    """
    rng = np.random.default_rng(seed)

    def random_prefix64() -> int:
        head = _REGISTRY_HEADS[int(rng.integers(0, len(_REGISTRY_HEADS)))]
        org = int(rng.integers(0, 1 << 16))
        site = int(rng.integers(0, 16))
        subnet = int(rng.integers(0, 256))
        return (head << 48) | (org << 32) | (site << 16) | subnet

    patterns: dict[int, object] = {}
    while len(patterns) < config.n_active_prefixes:
        prefix = random_prefix64()
        if prefix in patterns:
            continue
        kind = len(patterns) % 3
        if kind == 0:
            pat = CounterPattern(int(rng.integers(16, config.counter_max + 1)))
        elif kind == 1:
            stride = 1 << int(rng.integers(4, 9))
            pat = StridePattern(base=stride, stride=stride,
                                count=int(rng.integers(16, config.stride_count_max + 1)))
        else:
            template = [0] * 16
            word = [int(rng.integers(0, 16)) for _ in range(4)]
            template[8:12] = word
            free = rng.choice(np.arange(12, 16), size=config.word_free_nybbles,
                              replace=False)
            for pos in free:
                template[int(pos)] = -1
            pat = WordPattern(tuple(template))
        patterns[prefix] = pat

    aliases: set[int] = set()
    active64 = set(patterns)
    while len(aliases) < config.n_alias_regions:
        p96 = (random_prefix64() << 32) | int(rng.integers(0, 1 << 32))
        if (p96 >> 32) in active64:
            continue
        aliases.add(p96)
    return SyntheticUniverse(patterns, sorted(aliases), rng_seed=seed)
