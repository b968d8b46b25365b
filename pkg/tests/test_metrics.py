import numpy as np
import pytest

from v6diffusion.addresses import Ipv6Address
from v6diffusion.corpus import SeedSet
from v6diffusion.errors import EmptyCandidateSet
from v6diffusion import metrics


def make_input(rng, n_cand=200, n_seed=100, overlap=0.2, active_p=0.5, alias_p=0.1):
    pool = [Ipv6Address(int.from_bytes(rng.bytes(16), "big")) for _ in range(n_cand + n_seed)]
    seeds = pool[:n_seed]
    n_overlap = int(overlap * n_cand)
    cands = pool[:n_overlap] + pool[n_seed:n_seed + (n_cand - n_overlap)]
    activity = rng.random(len(cands)) < active_p
    alias = rng.random(len(cands)) < alias_p
    return metrics.EvaluationInput.build(cands, SeedSet(seeds),
                                         activity.tolist(), alias.tolist())


def brute_force_report(inp, lengths):
    """Independent recount with plain python sets."""
    cands = inp.candidates
    n = len(cands)
    seeds = {a.bits for a in inp.seeds}
    hits = [a for a, act in zip(cands, inp.activity) if act]
    n_hit = len(hits)
    n_repeat = len([a for a in hits if a.bits in seeds])
    n_alias = sum(inp.alias)
    rows = {}
    for L in lengths:
        cp = {a.bits >> (128 - L) for a in cands}
        sp = {b >> (128 - L) for b in seeds}
        gp = {a.bits >> (128 - L) for a in hits if a.bits not in seeds}
        rows[L] = (len(cp - sp), len(gp - sp))
    return n_hit, n_repeat, n_alias, rows


def test_hit_rate_published_counts():
    assert metrics.hit_rate_from_counts(44435, 95092) == pytest.approx(0.4673, abs=5e-5)


def test_generation_rate_published_counts():
    r = metrics.generation_rate_from_counts(44435, 63, 95092)
    assert r == pytest.approx(0.46662, abs=5e-6)


def test_nonalias_rate_published_counts():
    r = metrics.nonalias_rate_from_counts(95092 - 88528, 95092)
    assert r == pytest.approx(0.9310, abs=5e-5)


def test_zero_and_degenerate_cases(rng):
    inp = make_input(rng, active_p=0.0)
    assert metrics.hit_rate(inp) == 0.0
    assert metrics.generation_rate(inp) == 0.0
    inp2 = make_input(rng, alias_p=0.0)
    assert metrics.nonalias_rate(inp2) == 1.0


def test_candidates_equal_seeds_all_active_gives_zero_generation(rng):
    seeds = [Ipv6Address(int.from_bytes(rng.bytes(16), "big")) for _ in range(50)]
    inp = metrics.EvaluationInput.build(seeds, SeedSet(seeds),
                                        [True] * 50, [False] * 50)
    assert metrics.generation_rate(inp) == 0.0
    assert metrics.hit_rate(inp) == 1.0


def test_prefixes_subset_of_seeds_gives_zero_new(rng):
    seeds = [Ipv6Address(int.from_bytes(rng.bytes(16), "big")) for _ in range(20)]
    # candidates reuse seed /64 heads with different tails
    cands = [Ipv6Address((a.bits >> 64 << 64) | int(rng.integers(1, 1 << 32)))
             for a in seeds]
    inp = metrics.EvaluationInput.build(cands, SeedSet(seeds),
                                        [False] * 20, [False] * 20)
    _, new, ratio, per10k = metrics.candidate_new_prefix_rate(inp, 64)
    assert new == 0 and ratio == 0.0 and per10k == 0.0


def test_empty_candidate_set_raises():
    inp = metrics.EvaluationInput.build([], SeedSet([]), [], [])
    with pytest.raises(EmptyCandidateSet):
        metrics.hit_rate(inp)
    with pytest.raises(EmptyCandidateSet):
        metrics.candidate_new_prefix_rate(inp, 64)


def test_all_metrics_match_brute_force_on_random_instances():
    rng = np.random.default_rng(31)
    lengths = (32, 48, 64, 80)
    for trial in range(100):
        n_cand = int(rng.integers(1, 500))
        inp = make_input(rng, n_cand=n_cand, n_seed=int(rng.integers(1, 300)),
                         overlap=float(rng.random() * 0.5),
                         active_p=float(rng.random()),
                         alias_p=float(rng.random() * 0.3))
        n_hit, n_repeat, n_alias, rows = brute_force_report(inp, lengths)
        assert inp.n_hit == n_hit
        assert inp.n_repeat == n_repeat
        assert metrics.hit_rate(inp) == n_hit / inp.n_candidate
        assert metrics.generation_rate(inp) == (n_hit - n_repeat) / inp.n_candidate
        assert metrics.nonalias_rate(inp) == (inp.n_candidate - n_alias) / inp.n_candidate
        for L in lengths:
            _, n_cn, r_cn, p_cn = metrics.candidate_new_prefix_rate(inp, L)
            _, n_gn, r_gn, p_gn = metrics.generation_new_prefix_rate(inp, L)
            assert (n_cn, n_gn) == rows[L]
            assert r_cn == rows[L][0] / inp.n_candidate
            assert p_cn == r_cn * 10000.0
            assert r_gn == rows[L][1] / inp.n_candidate


def test_invariants_gen_le_hit_and_prefix_monotonicity(rng):
    for _ in range(20):
        inp = make_input(rng, n_cand=int(rng.integers(10, 300)))
        assert metrics.generation_rate(inp) <= metrics.hit_rate(inp)
        if inp.n_repeat == 0:
            assert metrics.generation_rate(inp) == metrics.hit_rate(inp)
        sizes = [metrics.candidate_new_prefix_rate(inp, L)[0] for L in (32, 48, 64, 80)]
        assert all(a <= b for a, b in zip(sizes, sizes[1:]))


def test_full_report_structure(rng):
    inp = make_input(rng)
    report = metrics.full_report(inp)
    assert report.n_candidate == inp.n_candidate
    assert len(report.prefix_rows) == 4
    lines = list(report.lines())
    assert lines[0].startswith("hit_rate,")
    assert any(l.startswith("candidate_new_prefix_rate,64,") for l in lines)
    d = report.to_dict()
    assert d["r_hit"] == report.r_hit


def test_report_from_counts_roundtrip(rng):
    inp = make_input(rng)
    full = metrics.full_report(inp)
    counts = {
        "n_candidate": inp.n_candidate, "n_hit": inp.n_hit,
        "n_repeat": inp.n_repeat, "n_aliased": inp.n_aliased,
        "prefix_counts": {str(row.length): {
            "n_c_pre": row.n_c_pre, "n_cn_pre": row.n_cn_pre,
            "n_g_pre": row.n_g_pre, "n_gn_pre": row.n_gn_pre,
        } for row in full.prefix_rows},
    }
    again = metrics.report_from_counts(counts)
    assert again.r_hit == full.r_hit
    assert again.prefix_rows == full.prefix_rows
