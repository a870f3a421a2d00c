"""Continual-pretraining loop with perturbation policies and run diagnostics.

A run continues a general-domain base model on a target/general token mixture
until a token budget is exhausted. At each eval point it records target
validation loss (overall and stratified into fixed confidence groups), a
greedy exact-match probe on held-out derivation answers, and the dropout
schedule state. Batch composition depends only on (corpus, seed), never on
the policy, so same-seed runs across policies see identical data order.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .corpus import (BOS_ID, CorpusSpec, TokenSequence, decode, encode,
                     final_answer, generate_general_corpus,
                     generate_target_corpus, mixed_batches, problem_prefix,
                     split_validation, target_per_batch)
from .dropout import (CurriculumSchedule, PerturbationPolicy, curriculum_cap,
                      embedding_noise_amplitude, full_gate_profile,
                      hidden_dropout_masks, sample_mask, sample_ratio)
from .entropy import EntropyCache, EntropyProfile, gate, score_sequence, \
    stratify_validation
from .model import ModelConfig, TinyDecoder, load_checkpoint, save_checkpoint
from .rng import stream

METRICS_HEADER = ("step,target_epoch,train_loss,val_loss_all,val_loss_low,"
                  "val_loss_high,exact_match,gamma_cap,mean_gamma")
BEST_CHECKPOINT = "checkpoint_best.ed"
LAST_CHECKPOINT = "checkpoint_last.ed"
BASE_CHECKPOINT = "base.ed"

# rng stream tags, disjoint from the corpus module's 1..4
_TAG_GAMMA, _TAG_MASK, _TAG_NOISE, _TAG_HIDDEN = 10, 11, 12, 13


class MissingCacheError(RuntimeError):
    """Entropy-gated policies need a prebuilt cache covering the run corpus."""


@dataclass(frozen=True)
class TrainConfig:
    model: ModelConfig
    corpus: CorpusSpec
    policy: PerturbationPolicy
    schedule: CurriculumSchedule
    total_token_budget: int
    batch_size: int = 32
    peak_lr: float = 1e-3
    lr_warmup_steps: int = 100
    seed: int = 1
    eval_every: int = 200
    val_fraction: float = 0.05
    probe_cap: int = 64
    probe_max_new: int = 24
    base_token_budget: int = 0
    base_checkpoint: str | None = None
    mask_trace: bool = False

    def __post_init__(self):
        if self.total_token_budget <= 0:
            raise ValueError("total_token_budget must be positive")
        if self.batch_size <= 0 or self.eval_every <= 0:
            raise ValueError("batch_size and eval_every must be positive")
        if not (0.0 < self.val_fraction < 1.0):
            raise ValueError("val_fraction must be in (0, 1)")
        if self.peak_lr <= 0.0:
            raise ValueError("peak_lr must be positive")
        if self.base_token_budget < 0:
            raise ValueError("base_token_budget must be nonnegative")


@dataclass
class RunSummary:
    policy: str
    best_epoch: float
    best_epoch_raw: float
    min_val_loss: float
    best_downstream: float
    steps: int
    diverged: bool = False
    diverged_step: int = -1


# ------------------------------------------------------------ config (de)ser


def config_to_dict(cfg: TrainConfig) -> dict:
    return dataclasses.asdict(cfg)


def config_from_dict(d: dict) -> TrainConfig:
    d = dict(d)
    corpus = dict(d.pop("corpus"))
    corpus["mix_ratio"] = tuple(corpus["mix_ratio"])
    return TrainConfig(
        model=ModelConfig(**d.pop("model")),
        corpus=CorpusSpec(**corpus),
        policy=PerturbationPolicy(**d.pop("policy")),
        schedule=CurriculumSchedule(**d.pop("schedule")),
        **d,
    )


# ----------------------------------------------------------------- optimizer


class AdamW:
    """Adam with decoupled weight decay; decay hits Tensors of rank >= 2 only."""

    def __init__(self, params: dict[str, T.Tensor], weight_decay: float = 0.0,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.params = params
        self.weight_decay = weight_decay
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v.data) for k, v in params.items()}
        self.v = {k: np.zeros_like(v.data) for k, v in params.items()}

    def step(self, lr: float) -> None:
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            m, v = self.m[name], self.v[name]
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * (g * g)
            upd = (m / c1) / (np.sqrt(v / c2) + self.eps)
            if self.weight_decay > 0.0 and p.data.ndim >= 2:
                upd = upd + self.weight_decay * p.data
            p.data -= lr * upd


def cosine_lr(step: int, total_steps: int, peak: float, warmup: int) -> float:
    if step < warmup:
        return peak * (step + 1) / warmup
    prog = (step - warmup) / max(1, total_steps - warmup)
    prog = min(1.0, max(0.0, prog))
    return peak * 0.5 * (1.0 + math.cos(math.pi * prog))


# ----------------------------------------------------- schedule auto-tuning


def default_sharpness(total_steps: int, j0: float) -> float:
    """s such that the cap rises 10% -> 90% over a quarter of the post-j0 run."""
    span = max(1.0, 0.25 * (total_steps - j0))
    return 2.0 * math.log(9.0) / span


def auto_j0(metrics_path: str) -> float:
    """Step of minimum smoothed validation loss in a baseline pilot run."""
    rows = read_metrics(metrics_path)
    smoothed = _median5(rows["val_loss_all"])
    cand = np.flatnonzero(smoothed == smoothed.min())
    pick = cand[int(np.argmin(rows["val_loss_all"][cand]))]
    return float(rows["step"][pick])


# ------------------------------------------------------------------ batching


def _batch_arrays(seqs: list[TokenSequence]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pad a batch: inputs[b] = [BOS] + ids[:-1], targets[b] = ids, weight 1 on real tokens."""
    t_max = max(len(s.ids) for s in seqs)
    b = len(seqs)
    inputs = np.full((b, t_max), BOS_ID, dtype=np.int64)
    targets = np.full((b, t_max), BOS_ID, dtype=np.int64)
    weights = np.zeros((b, t_max))
    for i, s in enumerate(seqs):
        n = len(s.ids)
        inputs[i, 1:n] = s.ids[:-1]
        targets[i, :n] = s.ids
        weights[i, :n] = 1.0
    return inputs, targets, weights


# rows per forward pass; short derivations and long general sentences are
# padded separately so pad positions stay a small fraction of the compute
GROUP_ROWS = 32


def _compute_groups(batch: list[TokenSequence]) -> list[list[TokenSequence]]:
    """Split one sampled batch into domain-pure, length-sorted compute groups.

    Padding a mixed batch to its longest row spends most of the forward and
    backward work on pad positions. Grouping changes neither which rows were
    sampled nor the token-weighted loss they produce; each group is just a
    narrower padded array. The step loss recombines groups by token count.
    """
    groups: list[list[TokenSequence]] = []
    for tag in ("target", "general"):
        seqs = sorted((s for s in batch if s.domain_tag == tag),
                      key=lambda s: len(s.ids))
        groups.extend(seqs[i:i + GROUP_ROWS]
                      for i in range(0, len(seqs), GROUP_ROWS))
    return [g for g in groups if g]


def _estimate_tokens_per_batch(train_target: list[TokenSequence], cfg: TrainConfig) -> float:
    n_t = target_per_batch(cfg.batch_size, cfg.corpus.mix_ratio)
    n_g = cfg.batch_size - n_t
    avg_t = float(np.mean([len(s.ids) for s in train_target]))
    probe = generate_general_corpus(cfg.corpus)
    avg_g = float(np.mean([len(next(probe).ids) for _ in range(200)])) if n_g else 0.0
    return n_t * avg_t + n_g * avg_g


# ---------------------------------------------------------------- evaluation


def _weighted_ce(logits: T.Tensor, targets: np.ndarray, weights: np.ndarray) -> tuple[float, float]:
    """(sum of per-token NLL over weighted positions, weight total)."""
    w = float(weights.sum())
    if w == 0.0:
        return 0.0, 0.0
    loss = T.softmax_cross_entropy(logits, targets, position_weights=weights)
    return float(loss.data) * w, w


def evaluate(model: TinyDecoder, val_seqs: list[TokenSequence],
             strata: dict[int, tuple[np.ndarray, np.ndarray]],
             batch_size: int = 64) -> tuple[float, float, float]:
    """Mean per-token validation NLL: overall, low-confidence-group, high-group."""
    sums = np.zeros(3)
    wts = np.zeros(3)
    by_len = sorted(val_seqs, key=lambda s: len(s.ids))  # narrower pad widths
    for i in range(0, len(by_len), batch_size):
        chunk = by_len[i:i + batch_size]
        inputs, targets, weights = _batch_arrays(chunk)
        low = np.zeros_like(weights)
        high = np.zeros_like(weights)
        for b, s in enumerate(chunk):
            lo, hi = strata[s.sequence_id]
            low[b, :len(lo)] = lo
            high[b, :len(hi)] = hi
        logits = model.forward_batch(inputs)
        for k, w in enumerate((weights, weights * low, weights * high)):
            s_, w_ = _weighted_ce(logits, targets, w)
            sums[k] += s_
            wts[k] += w_
    with np.errstate(invalid="ignore"):
        out = np.where(wts > 0, sums / np.maximum(wts, 1e-300), 0.0)
    return float(out[0]), float(out[1]), float(out[2])


def exact_match_probe(model: TinyDecoder, probe_seqs: list[TokenSequence],
                      max_new: int = 24) -> float:
    """Greedy-decode held-out derivations from their problem prefix.

    A hit means the decoded continuation's final answer (text after the last
    '=' before ';') equals the reference answer. Decoding stops at ';'.
    """
    if not probe_seqs:
        return 0.0
    stop_id = int(encode(";")[0])
    prefixes = [encode(problem_prefix(s.text)) for s in probe_seqs]
    answers = [final_answer(s.text) for s in probe_seqs]
    grown: list[list[int]] = [list(p) for p in prefixes]
    done = np.zeros(len(probe_seqs), dtype=bool)
    cap = model.cfg.max_seq_len
    for _ in range(max_new):
        if done.all():
            break
        t_max = min(cap, max(len(g) for g in grown) + 1)
        inputs = np.full((len(grown), t_max), BOS_ID, dtype=np.int64)
        for b, g in enumerate(grown):
            n = min(len(g), t_max - 1)
            inputs[b, 1:n + 1] = g[:n]
        logits = model.forward_batch(inputs).data
        for b, g in enumerate(grown):
            if done[b] or len(g) + 1 >= cap:
                done[b] = True
                continue
            nxt = int(np.argmax(logits[b, len(g)]))
            g.append(nxt)
            if nxt == stop_id:
                done[b] = True
    hits = 0
    for g, ans in zip(grown, answers):
        text = decode(np.array(g, dtype=np.int64))
        if text.endswith(";") and "=" in text and final_answer(text) == ans:
            hits += 1
    return hits / len(probe_seqs)


# ----------------------------------------------------------- policy plumbing


def _train_override(model: TinyDecoder, cfg: TrainConfig, batch: list[TokenSequence],
                    inputs: np.ndarray, step: int, gamma: float | None,
                    gates: dict[int, EntropyProfile] | None,
                    mask_vec: np.ndarray, trace: list | None):
    """Input-embedding override for the policies that perturb embeddings.

    Masks address sequence tokens x_t; the input row at position p carries
    x_{p-1}, so the keep matrix is shifted right by one (BOS always kept).
    Only target rows are perturbed; a group without them needs no override.
    """
    kind = cfg.policy.kind
    if kind in ("none", "hidden_dropout", "weight_decay"):
        return None
    if not any(s.domain_tag == "target" for s in batch):
        return None
    bsz, t = inputs.shape
    d = model.cfg.d_model
    rows = T.embedding_lookup(model.params["tok_emb"], inputs)

    if kind == "embedding_noise":
        noise = np.zeros((bsz, t, d))
        for b, s in enumerate(batch):
            if s.domain_tag != "target":
                continue
            n = len(s.ids)
            amp = embedding_noise_amplitude(cfg.policy.noise_alpha, n, d)
            rng = stream(cfg.seed, _TAG_NOISE, step, s.sequence_id)
            noise[b, 1:n] = rng.uniform(-1.0, 1.0, size=(n - 1, d)) * amp
        return T.add(rows, T.Tensor(noise))

    keep = np.ones((bsz, t))
    for b, s in enumerate(batch):
        if s.domain_tag != "target":
            continue
        prof = gates[s.sequence_id] if kind == "entrodrop" else full_gate_profile(s)
        plan = sample_mask(prof, gamma, stream(cfg.seed, _TAG_MASK, step, s.sequence_id),
                           rng_stream_id=(step, s.sequence_id))
        n = len(s.ids)
        keep[b, 1:n] = plan.m[:n - 1]
        if trace is not None:
            trace.append({"step": step, "sequence_id": int(s.sequence_id),
                          "gamma_j": gamma, "dropped_count": int((plan.m == 0).sum()),
                          "T": n})
    kc = keep[:, :, None]
    return T.add(T.mul(rows, T.Tensor(kc)), T.Tensor(mask_vec * (1.0 - kc)))


def _hidden_masks(model: TinyDecoder, cfg: TrainConfig, batch: list[TokenSequence],
                  t: int, step: int, group_idx: int = 0):
    if cfg.policy.kind != "hidden_dropout" or cfg.policy.hidden_dropout_rate == 0.0:
        return None
    target_rows = np.array([s.domain_tag == "target" for s in batch])
    if not target_rows.any():
        return None
    return hidden_dropout_masks(cfg.policy.hidden_dropout_rate, model.cfg.n_layers,
                                len(batch), t, model.cfg.d_model, target_rows,
                                stream(cfg.seed, _TAG_HIDDEN, step, group_idx))


# -------------------------------------------------------------- base warmup


def train_base(cfg: TrainConfig, out_path: str | None = None,
               log=None) -> TinyDecoder:
    """General-domain-only warmup producing the frozen base model.

    The base supplies entropy profiles, the confidence strata, and the mask
    substitution vector; continual pretraining then starts from its weights.
    """
    model = TinyDecoder(cfg.model)
    if cfg.base_token_budget <= 0:
        if out_path:
            save_checkpoint(model, out_path, step=0)
        return model
    general = generate_general_corpus(cfg.corpus)
    opt = AdamW(model.params)
    probe = generate_general_corpus(cfg.corpus)
    avg_g = float(np.mean([len(next(probe).ids) for _ in range(200)]))
    total_steps = max(1, int(round(cfg.base_token_budget / (cfg.batch_size * avg_g))))
    consumed, step = 0, 0
    while consumed < cfg.base_token_budget:
        batch = [next(general) for _ in range(cfg.batch_size)]
        arrays = [_batch_arrays(g) for g in _compute_groups(batch)]
        wtot = float(sum(w.sum() for _, _, w in arrays))
        with T.Tape() as tape:
            loss = None
            for inputs, targets, weights in arrays:
                logits = model.forward_batch(inputs)
                part = T.mul(T.softmax_cross_entropy(logits, targets,
                                                     position_weights=weights),
                             float(weights.sum()) / wtot)
                loss = part if loss is None else T.add(loss, part)
            tape.backward(loss)
        if not np.isfinite(loss.data):
            raise FloatingPointError(f"base warmup diverged at step {step}")
        opt.step(cosine_lr(step, total_steps, cfg.peak_lr, cfg.lr_warmup_steps))
        model.zero_grad()
        consumed += int(wtot)
        step += 1
        if log and step % 200 == 0:
            print(f"[base] step {step} loss {float(loss.data):.4f}", file=log)
    if out_path:
        save_checkpoint(model, out_path, step=step)
    return model


def _clone_from(base: TinyDecoder) -> TinyDecoder:
    model = TinyDecoder(base.cfg)
    for name, p in base.params.items():
        model.params[name].data = p.data.copy()
    return model


# ------------------------------------------------------------------ training


def _resolve_strata_and_gates(cfg: TrainConfig, base: TinyDecoder,
                              train_seqs, val_seqs, cache: EntropyCache | None):
    """Confidence strata for validation plus gate profiles for entrodrop.

    With a warm cache covering the corpus this performs zero base-model
    forward passes; entrodrop refuses to run without a cache.
    """
    need = [s for s in train_seqs if s.domain_tag == "target"]
    if cfg.policy.kind == "entrodrop":
        if cache is None:
            raise MissingCacheError(
                "policy entrodrop needs an entropy cache; run profile-entropy first")
        missing = [s.sequence_id for s in need if s.sequence_id not in cache]
        if missing:
            raise MissingCacheError(
                f"entropy cache missing {len(missing)} training sequences "
                f"(e.g. id {missing[0]}); rerun profile-entropy")
        gates = {s.sequence_id: cache[s.sequence_id] for s in need}
    else:
        gates = None

    val_profiles = []
    for s in val_seqs:
        if cache is not None and s.sequence_id in cache:
            val_profiles.append(cache[s.sequence_id])
        else:
            h, surp = score_sequence(base, s)
            thr, g = gate(h, 0.5)
            val_profiles.append(EntropyProfile(s.sequence_id, h, 0.5, thr, g, surp))
    return stratify_validation(val_profiles), gates


def train(cfg: TrainConfig, out_dir: str, cache: EntropyCache | None = None,
          base: TinyDecoder | None = None, log=None) -> RunSummary:
    """Run one continual-pretraining experiment into out_dir.

    Artifacts: config.json, metrics.csv (METRICS_HEADER columns), summary.json,
    best/last checkpoints, optional mask_trace.jsonl. Deterministic given cfg.
    """
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.json"), "w") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2, sort_keys=True)

    target = generate_target_corpus(cfg.corpus)
    train_seqs, val_seqs = split_validation(target, cfg.corpus.generation_seed,
                                            cfg.val_fraction)
    if base is None:
        if cfg.base_checkpoint:
            base, _ = load_checkpoint(cfg.base_checkpoint)
        else:
            base = train_base(cfg, os.path.join(out_dir, BASE_CHECKPOINT), log=log)
    strata, gates = _resolve_strata_and_gates(cfg, base, train_seqs, val_seqs, cache)

    model = _clone_from(base)
    mask_vec = (model.mean_embedding().copy() if cfg.policy.mask_vector == "mean"
                else np.zeros(cfg.model.d_model))
    wd = cfg.policy.weight_decay if cfg.policy.kind == "weight_decay" else 0.0
    opt = AdamW(model.params, weight_decay=wd)

    target_train_tokens = sum(len(s.ids) for s in train_seqs)
    total_steps = max(1, int(round(cfg.total_token_budget
                                   / _estimate_tokens_per_batch(train_seqs, cfg))))
    general = generate_general_corpus(cfg.corpus)
    batches = mixed_batches(train_seqs, general, cfg.corpus.mix_ratio,
                            cfg.batch_size, cfg.seed)
    probe_seqs = val_seqs[:cfg.probe_cap]

    metrics_path = os.path.join(out_dir, "metrics.csv")
    trace: list | None = [] if cfg.mask_trace else None
    consumed = target_consumed = step = 0
    gammas: list[float] = []
    loss_sum = loss_n = 0.0
    best_val = math.inf
    diverged_step = -1

    with open(metrics_path, "w") as mf:
        mf.write(METRICS_HEADER + "\n")
        while consumed < cfg.total_token_budget:
            batch = next(batches)
            epoch_now = target_consumed / target_train_tokens
            j = float(step) if cfg.schedule.step_unit == "optimizer_step" else epoch_now
            gamma = None
            if cfg.policy.kind in ("entrodrop", "vanilla_token_dropout"):
                gamma = sample_ratio(j, cfg.schedule, stream(cfg.seed, _TAG_GAMMA, step))
            groups = _compute_groups(batch)
            arrays = [_batch_arrays(g) for g in groups]
            wtot = float(sum(w.sum() for _, _, w in arrays))
            with T.Tape() as tape:
                loss = None
                for gi, (grp, (inputs, targets, weights)) in enumerate(zip(groups, arrays)):
                    hmasks = _hidden_masks(model, cfg, grp, inputs.shape[1], step, gi)
                    # override ops must be recorded so gradients reach tok_emb
                    override = _train_override(model, cfg, grp, inputs, step, gamma,
                                               gates, mask_vec, trace)
                    logits = model.forward_batch(inputs, input_embeddings_override=override,
                                                 hidden_dropout_masks=hmasks)
                    part = T.mul(T.softmax_cross_entropy(logits, targets,
                                                         position_weights=weights),
                                 float(weights.sum()) / wtot)
                    loss = part if loss is None else T.add(loss, part)
                tape.backward(loss)
            if not np.isfinite(loss.data):
                diverged_step = step
                break
            opt.step(cosine_lr(step, total_steps, cfg.peak_lr, cfg.lr_warmup_steps))
            model.zero_grad()

            consumed += int(wtot)
            target_consumed += sum(len(s.ids) for s in batch if s.domain_tag == "target")
            step += 1
            loss_sum += float(loss.data)
            loss_n += 1
            if gamma is not None:
                gammas.append(gamma)

            if step % cfg.eval_every == 0 or consumed >= cfg.total_token_budget:
                epoch = target_consumed / target_train_tokens
                j_now = float(step) if cfg.schedule.step_unit == "optimizer_step" else epoch
                v_all, v_low, v_high = evaluate(model, val_seqs, strata)
                em = exact_match_probe(model, probe_seqs, cfg.probe_max_new)
                cap = (curriculum_cap(j_now, cfg.schedule)
                       if cfg.policy.kind in ("entrodrop", "vanilla_token_dropout") else 0.0)
                mg = float(np.mean(gammas)) if gammas else 0.0
                mf.write(f"{step},{epoch:.6f},{loss_sum / max(loss_n, 1):.6f},"
                         f"{v_all:.6f},{v_low:.6f},{v_high:.6f},{em:.6f},"
                         f"{cap:.6f},{mg:.6f}\n")
                mf.flush()
                gammas.clear()
                loss_sum = loss_n = 0.0
                save_checkpoint(model, os.path.join(out_dir, LAST_CHECKPOINT), step=step)
                if v_all < best_val:
                    best_val = v_all
                    save_checkpoint(model, os.path.join(out_dir, BEST_CHECKPOINT), step=step)
                if log:
                    print(f"[train] step {step} epoch {epoch:.2f} val {v_all:.4f} "
                          f"low {v_low:.4f} high {v_high:.4f} em {em:.3f}", file=log)

    if trace is not None:
        with open(os.path.join(out_dir, "mask_trace.jsonl"), "w") as fh:
            for rec in trace:
                fh.write(json.dumps(rec) + "\n")

    try:
        summary = summarize(metrics_path, policy=cfg.policy.descriptor())
    except ValueError:
        # diverged before the first eval point: no rows to summarize
        summary = RunSummary(cfg.policy.descriptor(), math.nan, math.nan,
                             math.nan, math.nan, steps=step)
    if diverged_step >= 0:
        summary.diverged = True
        summary.diverged_step = diverged_step
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(dataclasses.asdict(summary), fh, indent=2, sort_keys=True)
    return summary


# ------------------------------------------------------------------ RQ1 sweep


def rq1_budget_sweep(cfg: TrainConfig, epochs_list: list[int], out_root: str,
                     cache: EntropyCache | None = None,
                     base: TinyDecoder | None = None, log=None) -> list[dict]:
    """Fixed total budget; each cell passes the target corpus ~N times.

    The target/general mixing ratio per cell is N*target_tokens : remainder,
    so every cell consumes the same budget. Returns the aggregate table rows.
    """
    target = generate_target_corpus(cfg.corpus)
    train_seqs, _ = split_validation(target, cfg.corpus.generation_seed, cfg.val_fraction)
    target_tokens = sum(len(s.ids) for s in train_seqs)
    rows = []
    for n in epochs_list:
        want = n * target_tokens
        n_t = target_per_batch(cfg.batch_size,
                               (want, max(cfg.total_token_budget - want, 0)))
        if want > cfg.total_token_budget or n_t < 1 or n_t > cfg.batch_size:
            rows.append({"requested_epochs": n, "status": "infeasible",
                         "note": f"N*target={want} vs budget={cfg.total_token_budget}"})
            continue
        cell_cfg = dataclasses.replace(
            cfg, corpus=dataclasses.replace(
                cfg.corpus, mix_ratio=(want, cfg.total_token_budget - want)))
        cell_dir = os.path.join(out_root, f"epochs_{n}")
        summary = train(cell_cfg, cell_dir, cache=cache, base=base, log=log)
        achieved = _last_epoch(os.path.join(cell_dir, "metrics.csv"))
        rows.append({"requested_epochs": n, "status": "ok",
                     "achieved_epochs": achieved,
                     "best_downstream": summary.best_downstream,
                     "min_val_loss": summary.min_val_loss,
                     "best_epoch": summary.best_epoch})
    path = os.path.join(out_root, "rq1_summary.csv")
    os.makedirs(out_root, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["requested_epochs", "status", "achieved_epochs",
                                           "best_downstream", "min_val_loss",
                                           "best_epoch", "note"])
        w.writeheader()
        for r in rows:
            w.writerow(r)
    return rows


def _last_epoch(metrics_path: str) -> float:
    rows = read_metrics(metrics_path)
    return float(rows["target_epoch"][-1])


# ----------------------------------------------------------------- summaries


def read_metrics(path: str) -> dict[str, np.ndarray]:
    """Parse a metrics CSV into column arrays; malformed rows name their line."""
    cols = METRICS_HEADER.split(",")
    out: dict[str, list] = {c: [] for c in cols}
    with open(path) as fh:
        header = fh.readline().rstrip("\n")
        if header != METRICS_HEADER:
            raise ValueError(f"line 1: bad metrics header {header!r}")
        for i, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split(",")
            if len(parts) != len(cols):
                raise ValueError(f"line {i}: expected {len(cols)} fields, got {len(parts)}")
            try:
                for c, p in zip(cols, parts):
                    out[c].append(float(p))
            except ValueError:
                raise ValueError(f"line {i}: non-numeric field in {line.rstrip()!r}")
    return {c: np.array(v) for c, v in out.items()}


def _median5(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    for i in range(len(x)):
        out[i] = np.median(x[max(0, i - 2):i + 3])
    return out


def summarize(metrics_path: str, policy: str = "") -> RunSummary:
    """Recompute the run diagnostics from the metrics file alone.

    best_epoch is the argmin of the 5-point-median-smoothed val_loss_all;
    ties in the smoothed basin break by raw value, then earliest row.
    min_val_loss and best_downstream are raw extrema.
    """
    rows = read_metrics(metrics_path)
    if len(rows["step"]) == 0:
        raise ValueError("line 2: no metrics rows")
    val = rows["val_loss_all"]
    smoothed = _median5(val)
    cand = np.flatnonzero(smoothed == smoothed.min())
    pick = int(cand[int(np.argmin(val[cand]))])
    return RunSummary(
        policy=policy,
        best_epoch=float(rows["target_epoch"][pick]),
        best_epoch_raw=float(rows["target_epoch"][int(np.argmin(val))]),
        min_val_loss=float(val.min()),
        best_downstream=float(rows["exact_match"].max()),
        steps=int(rows["step"][-1]),
    )
