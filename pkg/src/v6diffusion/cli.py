"""Command-line pipeline driver.

Subcommands: preprocess | train | generate | dealias | evaluate | demo.
Every stage is re-runnable from its on-disk inputs. Exit codes: 0 success,
2 configuration problems, 3 data problems, 4 runtime failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import metrics
from .addresses import parse_address
from .corpus import (load_alias_prefixes, load_seed_set, prescan_seeds,
                     read_result_list, write_target_list)
from .dealias import AliasPrefixSet, dealias
from .errors import ConfigurationError, DataError, PipelineError, RuntimeFailure
from .model import DenoiserModel
from .oracle import SyntheticUniverse
from .pipeline import desk_profile, full_profile, load_config, run_demo
from .probing import FileProber
from .sampling import generate
from .training import train


def _load_pipeline_config(args):
    base = desk_profile() if getattr(args, "profile", "full") == "desk" \
        else full_profile()
    if getattr(args, "config", None):
        return load_config(args.config, base)
    return base


def _make_prober(args, out_dir: Path):
    if args.prober == "oracle":
        if not args.universe:
            raise ConfigurationError("--prober oracle needs --universe FILE")
        return SyntheticUniverse.from_json(Path(args.universe).read_text())
    if not args.probe_results:
        raise ConfigurationError("--prober file needs --probe-results FILE")
    results_path = Path(args.probe_results)
    if not results_path.exists():
        raise RuntimeFailure(f"probe results not found: {results_path}")
    with open(results_path) as fh:
        results = read_result_list(fh)
    target_log = open(out_dir / "probe_targets.txt", "w")
    return FileProber.from_results(results, target_log=target_log)


def _read_seeds(path):
    with open(path) as fh:
        return load_seed_set(fh)


def cmd_preprocess(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    loaded = _read_seeds(args.seeds)
    seeds = loaded.seeds
    if loaded.rejects:
        with open(out / "rejects.txt", "w") as fh:
            for r in loaded.rejects:
                fh.write(f"{r.line_no}\t{r.text}\t{r.reason}\n")
    prescanned = None
    if args.prescan:
        prober = _make_prober(args, out)
        seeds = prescan_seeds(seeds, prober)
        prescanned = seeds.n
        if seeds.n == 0:
            raise DataError("prescan removed every seed")
    with open(out / "seeds_canonical.txt", "w") as fh:
        write_target_list(seeds, fh)
    stats = {"valid": loaded.seeds.n, "duplicates": loaded.duplicates,
             "rejects": len(loaded.rejects), "prescanned_active": prescanned}
    (out / "preprocess_stats.json").write_text(json.dumps(stats, indent=2))
    print(json.dumps(stats))
    return 0


def cmd_train(args) -> int:
    cfg = _load_pipeline_config(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seeds = _read_seeds(args.seeds).seeds
    train_cfg = cfg.train
    if args.seed is not None:
        from dataclasses import replace
        train_cfg = replace(train_cfg, rng_seed=args.seed)
    with open(out / "train.log", "w") as log:
        result = train(cfg.model, train_cfg, seeds.to_nybble_array(),
                       checkpoint_path=out / "checkpoint.npz",
                       log_stream=log, progress=not args.quiet)
    final = result.history[-1]
    print(f"checkpoint written: {out / 'checkpoint.npz'} "
          f"(final loss {final.total:.6f})")
    return 0


def cmd_generate(args) -> int:
    cfg = _load_pipeline_config(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model, meta = DenoiserModel.load(args.checkpoint)
    t_steps = meta.get("train_config", {}).get("T", cfg.train.T)
    beta1 = meta.get("train_config", {}).get("beta1", cfg.train.beta1)
    betaT = meta.get("train_config", {}).get("betaT", cfg.train.betaT)
    from .schedule import linear_schedule
    schedule = linear_schedule(t_steps, beta1, betaT)
    sampler_cfg = cfg.sampler(count=args.count, stride=args.stride, seed=args.seed)
    candidates = generate(
        model, schedule, sampler_cfg,
        progress=None if args.quiet else
        (lambda b, n: print(f"[generate] batch {b}/{n}", file=sys.stderr)))
    with open(out / "candidates.txt", "w") as fh:
        write_target_list(candidates.addresses, fh)
    manifest = dict(candidates.provenance, checkpoint=str(args.checkpoint))
    (out / "run_manifest.json").write_text(json.dumps(manifest, indent=2))
    print(f"{len(candidates.addresses)} candidates written to {out / 'candidates.txt'}")
    return 0


def _read_candidates(path):
    addresses = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                addresses.append(parse_address(line))
    if not addresses:
        raise DataError(f"no candidates in {path}")
    return addresses


def cmd_dealias(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    candidates = _read_candidates(args.candidates)
    if args.alias_prefixes:
        with open(args.alias_prefixes) as fh:
            known = load_alias_prefixes(fh)
    else:
        known = AliasPrefixSet()
    prober = _make_prober(args, out)
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    clean, report = dealias(candidates, known, prober, rng)
    with open(out / "candidates_clean.txt", "w") as fh:
        write_target_list(clean, fh)
    with open(out / "alias_report.txt", "w") as fh:
        for line in report.lines():
            fh.write(line + "\n")
    print(f"clean={report.clean} coarse_alias={report.coarse_aliases} "
          f"fine_alias={report.fine_aliases} dup={report.duplicates_dropped}")
    return 0


def cmd_evaluate(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lengths = tuple(int(x) for x in args.prefix_lengths.split(",")) \
        if args.prefix_lengths else metrics.DEFAULT_PREFIX_LENGTHS

    if args.counts_fixture:
        counts = json.loads(Path(args.counts_fixture).read_text())
        report = metrics.report_from_counts(counts)
    else:
        if not (args.candidates and args.seeds and args.activity_results):
            raise ConfigurationError(
                "evaluate needs --candidates, --seeds and --activity-results "
                "(or --counts-fixture)")
        candidates = _read_candidates(args.candidates)
        unique = []
        seen = set()
        for a in candidates:
            if a.bits not in seen:
                seen.add(a.bits)
                unique.append(a)
        seeds = _read_seeds(args.seeds).seeds
        with open(args.activity_results) as fh:
            active = {r.address.bits for r in read_result_list(fh) if r.active}
        alias_flags = {}
        if args.alias_report:
            with open(args.alias_report) as fh:
                for line in fh:
                    line = line.strip()
                    if not line or line.startswith("#"):
                        continue
                    addr, _stage, verdict = line.split(",")
                    alias_flags[parse_address(addr).bits] = verdict == "alias"
        inp = metrics.EvaluationInput.build(
            unique, seeds, [a.bits in active for a in unique],
            [alias_flags.get(a.bits, False) for a in unique])
        report = metrics.full_report(inp, lengths)

    (out / "report.json").write_text(report.to_json())
    with open(out / "report.txt", "w") as fh:
        for line in report.lines():
            fh.write(line + "\n")
    for line in report.lines():
        print(line)
    return 0


def cmd_demo(args) -> int:
    cfg = _load_pipeline_config(args)
    if args.seed is not None:
        from dataclasses import replace
        cfg = replace(cfg, seed=args.seed,
                      train=replace(cfg.train, rng_seed=args.seed))
    if args.count is not None:
        from dataclasses import replace
        cfg = replace(cfg, count=args.count)
    result = run_demo(cfg, args.out_dir, progress=not args.quiet)
    print(json.dumps({
        "hit_rate": result.report.r_hit,
        "generation_rate": result.report.r_gen,
        "nonalias_rate": result.report.r_nonaliased,
        "baseline_hit_rate": result.baseline_hit_rate,
    }))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="v6diffusion",
        description="Diffusion-based IPv6 target generation pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, profile=True, default_profile="full"):
        p.add_argument("--out-dir", required=True)
        p.add_argument("--config", help="YAML config overrides")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--quiet", action="store_true")
        if profile:
            p.add_argument("--profile", choices=("full", "desk"),
                           default=default_profile)

    def prober_opts(p):
        p.add_argument("--prober", choices=("oracle", "file"), default="oracle")
        p.add_argument("--universe", help="universe JSON for the oracle prober")
        p.add_argument("--probe-results", help="scan result file for the file prober")

    p = sub.add_parser("preprocess", help="validate, dedup and optionally prescan seeds")
    p.add_argument("--seeds", required=True)
    p.add_argument("--prescan", action="store_true")
    prober_opts(p)
    common(p, profile=False)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="train the denoiser on a seed file")
    p.add_argument("--seeds", required=True)
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="sample candidate addresses from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--stride", type=int, default=None)
    common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("dealias", help="two-stage alias removal over a candidate file")
    p.add_argument("--candidates", required=True)
    p.add_argument("--alias-prefixes", help="known alias prefixes, one CIDR per line")
    prober_opts(p)
    common(p, profile=False)
    p.set_defaults(func=cmd_dealias)

    p = sub.add_parser("evaluate", help="score candidates against seeds and scan results")
    p.add_argument("--candidates")
    p.add_argument("--seeds")
    p.add_argument("--activity-results")
    p.add_argument("--alias-report")
    p.add_argument("--counts-fixture", help="JSON of recorded raw counts to re-score")
    p.add_argument("--prefix-lengths", help="comma list, default 32,48,64,80")
    common(p, profile=False)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("demo", help="synthetic end-to-end run against a built universe")
    p.add_argument("--count", type=int, default=None)
    common(p, default_profile="desk")
    p.set_defaults(func=cmd_demo)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except PipelineError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
