"""Command-line entry point for the training laboratory.

Subcommands: gen-corpus, profile-entropy, train, sweep, rq1-sweep,
verify-theorem. Every subcommand writes its artifacts plus exactly one
manifest.json into --out; progress goes to stderr and stdout stays clean.

Exit codes: 0 success, 2 usage/config error, 3 precondition error
(missing inputs, output collision), 4 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import itertools
import json
import os
import shutil
import subprocess
import sys
import time

from .corpus import CorpusSpec, generate_general_corpus, generate_target_corpus, \
    read_shard, write_shard
from .entropy import MODES, SCOPES, load_cache, profile_corpus
from .model import load_checkpoint
from .trainer import BASE_CHECKPOINT, MissingCacheError, auto_j0, config_from_dict, \
    config_to_dict, rq1_budget_sweep, train
from .variance import run_verification

OUT_ROOT_ENV = "ENTRODROP_OUT_ROOT"

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PRECONDITION = 3
EXIT_RUNTIME = 4

TARGET_SHARD = "target.jsonl"
GENERAL_SHARD = "general.jsonl"
CACHE_FILE = "cache.json"


class UsageError(Exception):
    """Bad flag value or malformed config file."""


class PreconditionError(Exception):
    """Required input missing or output directory already populated."""


# ------------------------------------------------------------------ manifest


@dataclasses.dataclass
class RunManifest:
    run_id: str
    subcommand: str
    config: dict
    input_hashes: dict
    outputs: list
    wall_clock_s: float
    tokens_per_s: float | None = None


def _file_sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir: str, subcommand: str, config: dict,
                   input_hashes: dict, started: float,
                   tokens_per_s: float | None = None) -> RunManifest:
    """One manifest per output directory; run id is content-derived so
    reruns with identical inputs produce identical config snapshots."""
    outputs = sorted(
        os.path.relpath(os.path.join(root, f), out_dir)
        for root, _, files in os.walk(out_dir) for f in files
        if f != "manifest.json")
    ident = json.dumps({"config": config, "inputs": input_hashes},
                       sort_keys=True).encode()
    man = RunManifest(
        run_id=hashlib.sha256(ident).hexdigest()[:12],
        subcommand=subcommand,
        config=config,
        input_hashes=input_hashes,
        outputs=outputs,
        wall_clock_s=round(time.monotonic() - started, 3),
        tokens_per_s=tokens_per_s,
    )
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(dataclasses.asdict(man), fh, indent=2, sort_keys=True)
    return man


# ------------------------------------------------------------------ plumbing


def resolve_out(path: str) -> str:
    root = os.environ.get(OUT_ROOT_ENV)
    if root and not os.path.isabs(path):
        return os.path.join(root, path)
    return path


def prepare_out_dir(path: str, force: bool) -> str:
    """Refuse to write into a populated directory unless --force wipes it."""
    path = resolve_out(path)
    if os.path.isdir(path) and os.listdir(path):
        if not force:
            raise PreconditionError(
                f"output directory {path} is not empty; pass --force to overwrite")
        shutil.rmtree(path)
    os.makedirs(path, exist_ok=True)
    return path


def _load_json(path: str, what: str) -> dict:
    if not os.path.exists(path):
        raise PreconditionError(f"{what} file not found: {path}")
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as e:
        raise UsageError(f"{what} file {path} is not valid JSON: {e}")


def _corpus_spec_from_dict(d: dict) -> CorpusSpec:
    known = {f.name for f in dataclasses.fields(CorpusSpec)}
    unknown = sorted(set(d) - known)
    if unknown:
        raise UsageError(
            f"unknown corpus spec keys {unknown}; expected a subset of {sorted(known)}")
    if "mix_ratio" in d:
        d = dict(d, mix_ratio=tuple(d["mix_ratio"]))
    try:
        return CorpusSpec(**d)
    except (TypeError, ValueError) as e:
        raise UsageError(f"invalid corpus spec: {e}")


def _train_config(d: dict):
    try:
        return config_from_dict(d)
    except (KeyError, TypeError, ValueError) as e:
        raise UsageError(f"invalid train config: {e!r}")


# -------------------------------------------------------------- subcommands


def cmd_gen_corpus(args) -> int:
    started = time.monotonic()
    spec_dict = _load_json(args.spec, "corpus spec")
    spec = _corpus_spec_from_dict(spec_dict)
    out = prepare_out_dir(args.out, args.force)

    print(f"[gen-corpus] target {spec.target_unique_tokens} tokens", file=sys.stderr)
    target = generate_target_corpus(spec)
    write_shard(os.path.join(out, TARGET_SHARD), target)

    print(f"[gen-corpus] general {spec.general_unique_tokens} tokens", file=sys.stderr)
    general, total = [], 0
    for seq in generate_general_corpus(spec):
        if total >= spec.general_unique_tokens:
            break
        general.append(seq)
        total += len(seq)
    write_shard(os.path.join(out, GENERAL_SHARD), general)

    tokens = sum(len(s) for s in target) + total
    write_manifest(out, "gen-corpus", dataclasses.asdict(spec),
                   {args.spec: _file_sha256(args.spec)}, started,
                   tokens_per_s=round(tokens / max(time.monotonic() - started, 1e-9), 1))
    return EXIT_OK


def cmd_profile_entropy(args) -> int:
    started = time.monotonic()
    if args.mode not in MODES:
        raise UsageError(f"--mode must be one of {MODES}")
    if args.scope not in SCOPES:
        raise UsageError(f"--scope must be one of {SCOPES}")
    if not (0.0 < args.k <= 1.0):
        raise UsageError("--k must be in (0, 1]")
    shard = (os.path.join(args.corpus, TARGET_SHARD)
             if os.path.isdir(args.corpus) else args.corpus)
    if not os.path.exists(shard):
        raise PreconditionError(f"corpus shard not found: {shard}")
    if not os.path.exists(args.checkpoint):
        raise PreconditionError(f"model checkpoint not found: {args.checkpoint}")
    corpus = read_shard(shard)
    model, _ = load_checkpoint(args.checkpoint)
    out = prepare_out_dir(args.out, args.force)

    print(f"[profile-entropy] scoring {len(corpus)} sequences", file=sys.stderr)
    cache = profile_corpus(model, corpus, args.k, args.mode,
                           os.path.join(out, CACHE_FILE), scope=args.scope)
    cfg = {"k": args.k, "mode": args.mode, "scope": args.scope,
           "model_fingerprint": cache.fingerprint, "n_profiles": len(cache)}
    write_manifest(out, "profile-entropy", cfg,
                   {shard: _file_sha256(shard),
                    args.checkpoint: _file_sha256(args.checkpoint)}, started)
    return EXIT_OK


def _load_cache_arg(path: str | None):
    if path is None:
        return None, {}
    cache_path = os.path.join(path, CACHE_FILE) if os.path.isdir(path) else path
    if not os.path.exists(cache_path):
        raise PreconditionError(
            f"entropy cache not found at {cache_path}; run profile-entropy first")
    return load_cache(cache_path), {cache_path: _file_sha256(cache_path)}


def cmd_train(args) -> int:
    started = time.monotonic()
    cfg_dict = _load_json(args.config, "train config")
    if args.policy is not None:
        cfg_dict.setdefault("policy", {})["kind"] = args.policy
    if args.seed is not None:
        cfg_dict["seed"] = args.seed
    if args.j0_from is not None:
        if not os.path.exists(args.j0_from):
            raise PreconditionError(f"--j0-from metrics not found: {args.j0_from}")
        cfg_dict.setdefault("schedule", {})["j0"] = auto_j0(args.j0_from)
        print(f"[train] j0 <- {cfg_dict['schedule']['j0']} from {args.j0_from}",
              file=sys.stderr)
    cfg = _train_config(cfg_dict)
    cache, cache_hashes = _load_cache_arg(args.cache)
    if cfg.policy.kind == "entrodrop" and cache is None:
        raise MissingCacheError(
            "policy entrodrop needs --cache pointing at a profile-entropy "
            "output; run profile-entropy first")
    inputs = {args.config: _file_sha256(args.config), **cache_hashes}
    if cfg.base_checkpoint:
        if not os.path.exists(cfg.base_checkpoint):
            raise PreconditionError(
                f"base checkpoint not found: {cfg.base_checkpoint}")
        inputs[cfg.base_checkpoint] = _file_sha256(cfg.base_checkpoint)
    out = prepare_out_dir(args.out, args.force)

    summary = train(cfg, out, cache=cache, log=sys.stderr)
    tokens = cfg.total_token_budget + (0 if cfg.base_checkpoint else cfg.base_token_budget)
    write_manifest(out, "train", config_to_dict(cfg), inputs, started,
                   tokens_per_s=round(tokens / max(time.monotonic() - started, 1e-9), 1))
    if summary.diverged:
        print(f"[train] diverged at step {summary.diverged_step}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def _set_dotted(d: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    cur = d
    for k in keys[:-1]:
        cur = cur.setdefault(k, {})
        if not isinstance(cur, dict):
            raise UsageError(f"grid key {dotted!r} does not address a config field")
    cur[keys[-1]] = value


def _sweep_cells(grid: dict) -> list[dict]:
    """Cartesian product of the vary axes; one dict of overrides per cell."""
    vary = grid.get("vary", {})
    if not isinstance(vary, dict) or not vary or not all(vary.values()):
        raise UsageError("grid needs a nonempty 'vary' map of dotted key -> values")
    keys = sorted(vary)
    return [dict(zip(keys, combo))
            for combo in itertools.product(*(vary[k] for k in keys))]


def _cell_name(overrides: dict) -> str:
    return "__".join(f"{k.split('.')[-1]}={v}" for k, v in sorted(overrides.items()))


def cmd_sweep(args) -> int:
    started = time.monotonic()
    grid = _load_json(args.grid, "sweep grid")
    if "config" not in grid:
        raise UsageError("grid file needs a 'config' object with the base train config")
    cells = _sweep_cells(grid)
    _train_config(json.loads(json.dumps(grid["config"])))  # validate base config early
    cache_arg = grid.get("cache")
    if cache_arg is not None:
        _load_cache_arg(cache_arg)  # existence check before spending any compute
    out = prepare_out_dir(args.out, args.force)

    # one config file and one subprocess per cell, bounded by --jobs
    jobs = []
    for overrides in cells:
        cfg_dict = json.loads(json.dumps(grid["config"]))
        for key, value in overrides.items():
            _set_dotted(cfg_dict, key, value)
        name = _cell_name(overrides)
        cell_dir = os.path.join(out, name)
        cfg_path = os.path.join(out, f"{name}.config.json")
        with open(cfg_path, "w") as fh:
            json.dump(cfg_dict, fh, indent=2, sort_keys=True)
        cmd = [sys.executable, "-m", "entrodrop", "train",
               "--config", cfg_path, "--out", cell_dir]
        if cache_arg is not None:
            cmd += ["--cache", cache_arg]
        jobs.append({"name": name, "dir": cell_dir, "cmd": cmd,
                     "overrides": overrides})

    max_jobs = max(1, args.jobs)
    running: list[tuple[dict, subprocess.Popen]] = []
    pending = list(jobs)
    while pending or running:
        while pending and len(running) < max_jobs:
            job = pending.pop(0)
            print(f"[sweep] start {job['name']}", file=sys.stderr)
            log = open(os.path.join(out, f"{job['name']}.log"), "w")
            proc = subprocess.Popen(job["cmd"], stdout=log, stderr=log)
            job["log"] = log
            running.append((job, proc))
        job, proc = running.pop(0)
        job["exit"] = proc.wait()
        job["log"].close()
        print(f"[sweep] done {job['name']} exit {job['exit']}", file=sys.stderr)

    vary_keys = sorted(grid.get("vary", {}))
    fields = [k.split(".")[-1] for k in vary_keys]
    agg_path = os.path.join(out, "aggregate.csv")
    failures = 0
    with open(agg_path, "w") as fh:
        fh.write(",".join(fields + ["status", "best_epoch", "min_val_loss",
                                    "best_downstream", "steps"]) + "\n")
        for job in jobs:
            vals = [str(job["overrides"][k]) for k in vary_keys]
            summary_path = os.path.join(job["dir"], "summary.json")
            if job["exit"] == 0 and os.path.exists(summary_path):
                with open(summary_path) as sf:
                    s = json.load(sf)
                fh.write(",".join(vals + ["ok", f"{s['best_epoch']:.6f}",
                                          f"{s['min_val_loss']:.6f}",
                                          f"{s['best_downstream']:.6f}",
                                          str(s['steps'])]) + "\n")
            else:
                failures += 1
                fh.write(",".join(vals + [f"failed(exit={job['exit']})",
                                          "", "", "", ""]) + "\n")
    write_manifest(out, "sweep", grid, {args.grid: _file_sha256(args.grid)}, started)
    if failures:
        print(f"[sweep] {failures}/{len(jobs)} cells failed; aggregate still "
              f"written to {agg_path}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_rq1_sweep(args) -> int:
    started = time.monotonic()
    cfg_dict = _load_json(args.config, "train config")
    if args.seed is not None:
        cfg_dict["seed"] = args.seed
    cfg = _train_config(cfg_dict)
    try:
        epochs = [int(t) for t in args.epochs.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"--epochs must be comma-separated integers, got {args.epochs!r}")
    if not epochs:
        raise UsageError("--epochs lists no cells")
    cache, cache_hashes = _load_cache_arg(args.cache)
    out = prepare_out_dir(args.out, args.force)

    rows = rq1_budget_sweep(cfg, epochs, out, cache=cache, log=sys.stderr)
    for n in epochs:
        cell_dir = os.path.join(out, f"epochs_{n}")
        cfg_path = os.path.join(cell_dir, "config.json")
        if os.path.isdir(cell_dir) and os.path.exists(cfg_path):
            with open(cfg_path) as fh:
                cell_cfg = json.load(fh)
            write_manifest(cell_dir, "rq1-sweep-cell", cell_cfg,
                           {args.config: _file_sha256(args.config)}, started)
    write_manifest(out, "rq1-sweep",
                   {"config": config_to_dict(cfg), "epochs": epochs},
                   {args.config: _file_sha256(args.config), **cache_hashes}, started)
    bad = [r for r in rows if r["status"] != "ok"]
    if bad:
        print(f"[rq1-sweep] {len(bad)} infeasible cells: "
              f"{[r['requested_epochs'] for r in bad]}", file=sys.stderr)
    return EXIT_OK


def cmd_verify_theorem(args) -> int:
    started = time.monotonic()
    cfg = _load_json(args.config, "verification config") if args.config else {}
    known = {"gammas", "ks", "seed", "mc_n", "n_pairs"}
    unknown = sorted(set(cfg) - known)
    if unknown:
        raise UsageError(f"unknown verification config keys {unknown}; "
                         f"expected a subset of {sorted(known)}")
    out = prepare_out_dir(args.out, args.force)

    print("[verify-theorem] running exact enumeration grid", file=sys.stderr)
    report = run_verification(
        gammas=tuple(cfg.get("gammas", (0.05, 0.1, 0.2, 0.3, 0.4))),
        ks=tuple(cfg.get("ks", (0.25, 0.5, 1.0))),
        seed=int(cfg.get("seed", 0)),
        mc_n=int(cfg.get("mc_n", 0)),
        n_pairs=int(cfg.get("n_pairs", 1000)))
    with open(os.path.join(out, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    inputs = {args.config: _file_sha256(args.config)} if args.config else {}
    write_manifest(out, "verify-theorem", cfg, inputs, started)
    ok = report["all_bounds_hold"] and report["all_binomial_moments_exact"]
    print(f"[verify-theorem] bounds hold: {report['all_bounds_hold']}, "
          f"binomial moments exact: {report['all_binomial_moments_exact']}",
          file=sys.stderr)
    return EXIT_OK if ok else EXIT_RUNTIME


# ------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="entrodrop",
        description="Entropy-guided token dropout training laboratory.",
        epilog="Exit codes: 0 ok, 2 usage/config, 3 precondition, 4 runtime.")
    sub = p.add_subparsers(dest="subcommand", required=True)

    def add_out(sp):
        sp.add_argument("--out", required=True,
                        help=f"output directory (relative paths resolve under "
                             f"${OUT_ROOT_ENV} when set)")
        sp.add_argument("--force", action="store_true",
                        help="overwrite a populated output directory")

    sp = sub.add_parser("gen-corpus", help="materialize corpus shards")
    sp.add_argument("--spec", required=True, help="corpus spec JSON file")
    add_out(sp)
    sp.set_defaults(fn=cmd_gen_corpus)

    sp = sub.add_parser("profile-entropy",
                        help="score a corpus with a frozen model and write the gate cache")
    sp.add_argument("--corpus", required=True,
                    help="gen-corpus output directory or target shard file")
    sp.add_argument("--checkpoint", required=True, help="frozen scorer checkpoint")
    sp.add_argument("--k", type=float, required=True, help="gate percentile in (0, 1]")
    sp.add_argument("--mode", default="shannon", help=f"one of {MODES}")
    sp.add_argument("--scope", default="per_sequence", help=f"one of {SCOPES}")
    add_out(sp)
    sp.set_defaults(fn=cmd_profile_entropy)

    sp = sub.add_parser("train", help="run one continual-pretraining experiment")
    sp.add_argument("--config", required=True, help="train config JSON file")
    sp.add_argument("--policy", help="override the config's policy kind")
    sp.add_argument("--cache", help="profile-entropy output (dir or cache file)")
    sp.add_argument("--seed", type=int, help="override the config's seed")
    sp.add_argument("--j0-from", dest="j0_from",
                    help="set schedule.j0 from a baseline run's metrics CSV")
    add_out(sp)
    sp.set_defaults(fn=cmd_train)

    sp = sub.add_parser("sweep", help="grid of training runs with an aggregate table")
    sp.add_argument("--grid", required=True,
                    help="JSON with 'config', 'vary' {dotted key: values}, optional 'cache'")
    sp.add_argument("--jobs", type=int, default=1, help="parallel cell subprocesses")
    add_out(sp)
    sp.set_defaults(fn=cmd_sweep)

    sp = sub.add_parser("rq1-sweep",
                        help="fixed-budget epoch sweep over the target corpus")
    sp.add_argument("--config", required=True, help="train config JSON file")
    sp.add_argument("--epochs", required=True, help="comma-separated epoch counts")
    sp.add_argument("--cache", help="profile-entropy output (dir or cache file)")
    sp.add_argument("--seed", type=int, help="override the config's seed")
    add_out(sp)
    sp.set_defaults(fn=cmd_rq1_sweep)

    sp = sub.add_parser("verify-theorem",
                        help="exact/MC variance-bound verification on the tiny instance")
    sp.add_argument("--config", help="JSON with gammas/ks/seed/mc_n/n_pairs")
    add_out(sp)
    sp.set_defaults(fn=cmd_verify_theorem)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (PreconditionError, MissingCacheError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PRECONDITION
    except FloatingPointError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as e:  # noqa: BLE001 - last-resort runtime mapping
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
