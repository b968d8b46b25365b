import numpy as np
import pytest

from v6diffusion.addresses import Ipv6Address, parse_address, prefix_of
from v6diffusion.corpus import load_alias_prefixes
from v6diffusion.dealias import (AliasPrefixSet, classify_fine, coarse_filter,
                                 dealias, fine_probe_targets)
from v6diffusion.probing import CountingProber


class SetProber:
    def __init__(self, active_bits):
        self.active = set(active_bits)

    def probe_batch(self, addresses):
        return [a.bits in self.active for a in addresses]


class RegionProber:
    """Active iff inside one of the /96 regions."""

    def __init__(self, tops96):
        self.tops = set(tops96)

    def probe_batch(self, addresses):
        return [(a.bits >> 32) in self.tops for a in addresses]


def test_coarse_filter_empty_set_passes_all():
    cands = [parse_address(f"2001:db8::{i:x}") for i in range(1, 6)]
    keep, drop = coarse_filter(cands, AliasPrefixSet())
    assert keep == cands and drop == []


def test_coarse_filter_containment():
    trie = load_alias_prefixes(["2001:db8::/32"])
    inside = parse_address("2001:db8:1::1")
    outside = parse_address("2001:db9::1")
    keep, drop = coarse_filter([inside, outside], trie)
    assert drop == [inside] and keep == [outside]


def test_coarse_filter_matches_linear_scan():
    rng = np.random.default_rng(11)
    prefixes = []
    while len(prefixes) < 100:
        bits = int.from_bytes(rng.bytes(16), "big")
        prefixes.append(prefix_of(Ipv6Address(bits), int(rng.choice([32, 48, 64]))))
    trie = AliasPrefixSet()
    for p in prefixes:
        trie.add(p)
    cands = [Ipv6Address(int.from_bytes(rng.bytes(16), "big")) for _ in range(1000)]
    # make some candidates actually covered
    for i in range(0, 1000, 17):
        p = prefixes[i % len(prefixes)]
        cands[i] = Ipv6Address(p.bits | (cands[i].bits & ((1 << (128 - p.length)) - 1)))
    keep, drop = coarse_filter(cands, trie)
    for a in keep:
        assert not any(p.covers(a) for p in prefixes)
    for a in drop:
        assert any(p.covers(a) for p in prefixes)
    assert len(keep) + len(drop) == 1000


def test_fine_probe_targets_share_prefix_and_distinct():
    rng = np.random.default_rng(2)
    a = parse_address("2001:db8:85a3::8a2e:370:7334")
    targets = fine_probe_targets(a, rng)
    assert len(targets) == 16
    head = prefix_of(a, 96)
    assert all(prefix_of(t, 96) == head for t in targets)
    suffixes = {t.bits & 0xFFFFFFFF for t in targets}
    assert len(suffixes) == 16
    assert (a.bits & 0xFFFFFFFF) not in suffixes


def test_fine_probe_targets_reproducible():
    a = parse_address("2001:db8::42")
    t1 = fine_probe_targets(a, np.random.default_rng(9))
    t2 = fine_probe_targets(a, np.random.default_rng(9))
    assert [x.bits for x in t1] == [x.bits for x in t2]


def test_classify_fine_alias_region():
    a = parse_address("2001:db8::1")
    prober = RegionProber([a.bits >> 32])
    verdict = classify_fine(a, prober, np.random.default_rng(0))
    assert verdict.is_alias and verdict.stage == "fine" and verdict.probes_used == 16


def test_classify_fine_lone_host_is_not_alias():
    a = parse_address("2001:db8::1")
    prober = SetProber([a.bits])  # only the host itself answers
    verdict = classify_fine(a, prober, np.random.default_rng(0))
    assert not verdict.is_alias


def test_classify_fine_fifteen_of_sixteen_is_not_alias():
    a = parse_address("2001:db8::1")

    class AllButOne:
        def probe_batch(self, addresses):
            return [i != 0 for i in range(len(addresses))]

    verdict = classify_fine(a, AllButOne(), np.random.default_rng(0))
    assert not verdict.is_alias


def test_dealias_pipeline_counts_and_probe_budget():
    rng = np.random.default_rng(4)
    alias96 = parse_address("2001:db8:dead:beef:cafe:f00d::").bits >> 32
    region = RegionProber([alias96])
    known = AliasPrefixSet()
    known.add(prefix_of(parse_address("2001:db8:aaaa::"), 48))

    coarse_hit = parse_address("2001:db8:aaaa::5")
    fine_hits = [Ipv6Address((alias96 << 32) | i) for i in (1, 2, 3)]
    clean_addrs = [parse_address(f"2001:db8:1::{i:x}") for i in range(1, 5)]
    candidates = [coarse_hit] + fine_hits + clean_addrs + [coarse_hit, clean_addrs[0]]

    counter = CountingProber(region)
    clean, report = dealias(candidates, known, counter, rng)
    assert report.total_in == len(candidates)
    assert report.duplicates_dropped == 2
    assert report.coarse_aliases == 1
    assert report.fine_aliases == 3
    assert [a.bits for a in clean] == [a.bits for a in clean_addrs]
    # 16 probes for each coarse survivor, none for coarse hits
    assert counter.probes == 16 * (3 + 4)
    coarse_verdicts = [v for v in report.verdicts if v.stage == "coarse"]
    assert all(v.probes_used == 0 for v in coarse_verdicts)
    fine_verdicts = [v for v in report.verdicts if v.stage == "fine"]
    assert all(v.probes_used == 16 for v in fine_verdicts)


def test_dealias_never_emits_coarse_covered():
    rng = np.random.default_rng(5)
    known = load_alias_prefixes(["2001:db8::/32"])
    cands = [parse_address(f"2001:db8::{i:x}") for i in range(1, 50)]
    cands += [parse_address(f"2001:db9::{i:x}") for i in range(1, 50)]
    clean, _ = dealias(cands, known, SetProber(set()), rng)
    for a in clean:
        assert not known.covers(a)
