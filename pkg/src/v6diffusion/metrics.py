"""Candidate-quality metrics.

Five rates over a deduplicated candidate set: hit rate (active share),
generation rate (active-and-new share), non-alias rate, and the two prefix
diversity rates — new candidate prefixes and new active-generation prefixes
per candidate, also expressed per 10,000 candidates. Prefix rates are
computed at /32, /48, /64 and /80 by default. Every rate has a pure
count-level core so recorded evaluation runs can be re-scored without the
address lists.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

from .addresses import Ipv6Address
from .corpus import SeedSet
from .errors import EmptyCandidateSet

DEFAULT_PREFIX_LENGTHS = (32, 48, 64, 80)


@dataclass(frozen=True)
class EvaluationInput:
    """Deduplicated candidates with aligned activity/alias annotations."""

    candidates: tuple
    seeds: SeedSet
    activity: tuple
    alias: tuple

    def __post_init__(self):
        n = len(self.candidates)
        if len(self.activity) != n or len(self.alias) != n:
            raise ValueError("annotation vectors must align 1:1 with candidates")

    @classmethod
    def build(cls, candidates: Sequence[Ipv6Address], seeds: SeedSet,
              activity: Sequence[bool], alias: Sequence[bool]) -> "EvaluationInput":
        return cls(tuple(candidates), seeds, tuple(bool(x) for x in activity),
                   tuple(bool(x) for x in alias))

    @property
    def n_candidate(self) -> int:
        return len(self.candidates)

    @property
    def n_hit(self) -> int:
        return sum(self.activity)

    @property
    def n_repeat(self) -> int:
        return sum(1 for a, act in zip(self.candidates, self.activity)
                   if act and a in self.seeds)

    @property
    def n_aliased(self) -> int:
        return sum(self.alias)


@dataclass(frozen=True)
class PrefixRateRow:
    length: int
    n_c_pre: int        # distinct candidate prefixes
    n_cn_pre: int       # candidate prefixes not present among seed prefixes
    r_cn_pre: float
    cn_per_10k: float
    n_g_pre: int        # distinct prefixes of active non-repeat candidates
    n_gn_pre: int       # of those, not present among seed prefixes
    r_gn_pre: float
    gn_per_10k: float


@dataclass(frozen=True)
class MetricsReport:
    n_candidate: int
    n_hit: int
    n_repeat: int
    n_aliased: int
    r_hit: float
    r_gen: float
    r_nonaliased: float
    prefix_rows: tuple

    def to_dict(self) -> dict:
        return {
            "n_candidate": self.n_candidate, "n_hit": self.n_hit,
            "n_repeat": self.n_repeat, "n_aliased": self.n_aliased,
            "r_hit": self.r_hit, "r_gen": self.r_gen,
            "r_nonaliased": self.r_nonaliased,
            "prefix_rates": [vars(row) for row in self.prefix_rows],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def lines(self):
        """Fixed-schema key/value text: metric, length, num, den, ratio, per10k."""
        yield f"hit_rate,-,{self.n_hit},{self.n_candidate},{self.r_hit:.4f},-"
        yield (f"generation_rate,-,{self.n_hit - self.n_repeat},{self.n_candidate},"
               f"{self.r_gen:.4f},-")
        yield (f"nonalias_rate,-,{self.n_candidate - self.n_aliased},{self.n_candidate},"
               f"{self.r_nonaliased:.4f},-")
        for row in self.prefix_rows:
            yield (f"candidate_new_prefix_rate,{row.length},{row.n_cn_pre},"
                   f"{self.n_candidate},{row.r_cn_pre:.4f},{row.cn_per_10k:.2f}")
            yield (f"generation_new_prefix_rate,{row.length},{row.n_gn_pre},"
                   f"{self.n_candidate},{row.r_gn_pre:.4f},{row.gn_per_10k:.2f}")


# -- count-level cores -------------------------------------------------------

def hit_rate_from_counts(n_hit: int, n_candidate: int) -> float:
    if n_candidate <= 0:
        raise EmptyCandidateSet("hit rate needs a nonempty candidate set")
    return n_hit / n_candidate

def generation_rate_from_counts(n_hit: int, n_repeat: int, n_candidate: int) -> float:
    if n_candidate <= 0:
        raise EmptyCandidateSet("generation rate needs a nonempty candidate set")
    return (n_hit - n_repeat) / n_candidate

def nonalias_rate_from_counts(n_aliased: int, n_candidate: int) -> float:
    if n_candidate <= 0:
        raise EmptyCandidateSet("non-alias rate needs a nonempty candidate set")
    return (n_candidate - n_aliased) / n_candidate

def prefix_rate_from_counts(n_new_pre: int, n_candidate: int) -> tuple[float, float]:
    if n_candidate <= 0:
        raise EmptyCandidateSet("prefix rate needs a nonempty candidate set")
    ratio = n_new_pre / n_candidate
    return ratio, ratio * 10000.0


# -- set-level metrics -------------------------------------------------------

def _prefixes(addresses, length: int) -> set[int]:
    shift = 128 - length
    return {a.bits >> shift for a in addresses}


def hit_rate(inp: EvaluationInput) -> float:
    return hit_rate_from_counts(inp.n_hit, inp.n_candidate)


def generation_rate(inp: EvaluationInput) -> float:
    return generation_rate_from_counts(inp.n_hit, inp.n_repeat, inp.n_candidate)


def nonalias_rate(inp: EvaluationInput) -> float:
    return nonalias_rate_from_counts(inp.n_aliased, inp.n_candidate)


def candidate_new_prefix_rate(inp: EvaluationInput, length: int):
    """(n_c_pre, n_cn_pre, ratio, per10k) for candidate /length prefixes."""
    if inp.n_candidate <= 0:
        raise EmptyCandidateSet("prefix rate needs a nonempty candidate set")
    cand = _prefixes(inp.candidates, length)
    seed = _prefixes(inp.seeds, length)
    new = len(cand - seed)
    ratio, per10k = prefix_rate_from_counts(new, inp.n_candidate)
    return len(cand), new, ratio, per10k


def generation_new_prefix_rate(inp: EvaluationInput, length: int):
    """(n_g_pre, n_gn_pre, ratio, per10k) over active non-repeat candidates."""
    if inp.n_candidate <= 0:
        raise EmptyCandidateSet("prefix rate needs a nonempty candidate set")
    gen = [a for a, act in zip(inp.candidates, inp.activity)
           if act and a not in inp.seeds]
    gset = _prefixes(gen, length)
    seed = _prefixes(inp.seeds, length)
    new = len(gset - seed)
    ratio, per10k = prefix_rate_from_counts(new, inp.n_candidate)
    return len(gset), new, ratio, per10k


def full_report(inp: EvaluationInput,
                prefix_lengths: Sequence[int] = DEFAULT_PREFIX_LENGTHS) -> MetricsReport:
    rows = []
    for length in prefix_lengths:
        n_c, n_cn, r_cn, cn10k = candidate_new_prefix_rate(inp, length)
        n_g, n_gn, r_gn, gn10k = generation_new_prefix_rate(inp, length)
        rows.append(PrefixRateRow(length, n_c, n_cn, r_cn, cn10k,
                                  n_g, n_gn, r_gn, gn10k))
    return MetricsReport(
        n_candidate=inp.n_candidate, n_hit=inp.n_hit, n_repeat=inp.n_repeat,
        n_aliased=inp.n_aliased, r_hit=hit_rate(inp), r_gen=generation_rate(inp),
        r_nonaliased=nonalias_rate(inp), prefix_rows=tuple(rows))


def report_from_counts(counts: dict) -> MetricsReport:
    """Re-score a recorded run from its raw counts alone.

    Expected keys: n_candidate, n_hit, n_repeat, n_aliased, and a
    "prefix_counts" map of length -> {n_c_pre, n_cn_pre, n_g_pre, n_gn_pre}.
    """
    n = counts["n_candidate"]
    rows = []
    for length, c in sorted((int(k), v) for k, v in counts.get("prefix_counts", {}).items()):
        r_cn, cn10k = prefix_rate_from_counts(c["n_cn_pre"], n)
        r_gn, gn10k = prefix_rate_from_counts(c["n_gn_pre"], n)
        rows.append(PrefixRateRow(length, c.get("n_c_pre", 0), c["n_cn_pre"], r_cn, cn10k,
                                  c.get("n_g_pre", 0), c["n_gn_pre"], r_gn, gn10k))
    return MetricsReport(
        n_candidate=n, n_hit=counts["n_hit"], n_repeat=counts["n_repeat"],
        n_aliased=counts["n_aliased"],
        r_hit=hit_rate_from_counts(counts["n_hit"], n),
        r_gen=generation_rate_from_counts(counts["n_hit"], counts["n_repeat"], n),
        r_nonaliased=nonalias_rate_from_counts(counts["n_aliased"], n),
        prefix_rows=tuple(rows))
