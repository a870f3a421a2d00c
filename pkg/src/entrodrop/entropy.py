"""Per-token entropy profiling under a frozen base model, with a persistent cache.

A profile stores, for every token position t of a sequence, the base model's
predictive-distribution entropy H_t (shannon mode) or realized-token surprisal
(surprisal mode), plus the nearest-rank percentile gate g. Profiles are
persisted as JSON lines so entropy is computed once per sequence and reused
across epochs; the cache header carries a content hash of the scoring model's
parameters and is invalidated when it changes.

Position 0 is scored from the BOS-conditioned (empty prefix) distribution.
Records also carry the surprisal array regardless of mode: the stratification
contract needs base-model likelihoods to split validation tokens into
confidence groups, and keeping them in the same cache means a warm training
start performs zero scoring forwards.
"""

from __future__ import annotations

import json
import math
import os
import warnings
from dataclasses import dataclass

import numpy as np

from .corpus import BOS_ID, TokenSequence
from .model import TinyDecoder

MODES = ("shannon", "surprisal")
SCOPES = ("per_sequence", "corpus_global")


@dataclass(eq=False)
class EntropyProfile:
    sequence_id: int
    H: np.ndarray
    percentile_k: float
    threshold: float
    g: np.ndarray  # uint8 gate bits, 1 = eligible for dropout
    surprisal: np.ndarray


class EntropyCache:
    """Map sequence_id -> EntropyProfile plus the provenance header."""

    def __init__(self, fingerprint: str, mode: str, k: float, scope: str):
        self.fingerprint = fingerprint
        self.mode = mode
        self.k = k
        self.scope = scope
        self.profiles: dict[int, EntropyProfile] = {}

    def __contains__(self, sequence_id: int) -> bool:
        return sequence_id in self.profiles

    def __getitem__(self, sequence_id: int) -> EntropyProfile:
        return self.profiles[sequence_id]

    def __len__(self) -> int:
        return len(self.profiles)


# ------------------------------------------------------------------ scoring


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def entropy_from_logits(logits: np.ndarray) -> np.ndarray:
    """Shannon entropy (nats) of softmax(logits) rows; 0*log(0) counts as 0."""
    logp = _log_softmax(logits)
    p = np.exp(logp)
    return -np.where(p > 0.0, p * logp, 0.0).sum(axis=-1)


def _model_inputs(ids: np.ndarray) -> np.ndarray:
    return np.concatenate(([BOS_ID], ids[:-1]))


def score_sequence(model: TinyDecoder, seq: TokenSequence) -> tuple[np.ndarray, np.ndarray]:
    """(shannon H, surprisal) for every position of seq, one forward pass."""
    ids = np.asarray(seq.ids, dtype=np.int64)
    logits = model.forward(_model_inputs(ids)).data
    logp = _log_softmax(logits)
    h = entropy_from_logits(logits)
    surprisal = -logp[np.arange(len(ids)), ids]
    return h, surprisal


def score_tokens(model: TinyDecoder, seq: TokenSequence, mode: str) -> np.ndarray:
    """Per-token H sequence under the requested scoring mode."""
    if mode not in MODES:
        raise ValueError(f"unknown scoring mode {mode!r}")
    h, surprisal = score_sequence(model, seq)
    return h if mode == "shannon" else surprisal


# ------------------------------------------------------------------- gating


def nearest_rank_threshold(values: np.ndarray, k: float) -> float:
    """Value at rank ceil(k*n) of the sorted sample (1-indexed)."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    n = len(v)
    if n == 0:
        raise ValueError("empty sample")
    rank = max(1, math.ceil(k * n - 1e-9))
    return float(v[rank - 1])


def gate(H, k: float, scope: str = "per_sequence",
         pool=None) -> tuple[float, np.ndarray]:
    """Percentile gate: g_t = 1 iff H_t <= threshold, ties included.

    per_sequence draws the threshold from H itself; corpus_global requires the
    pooled corpus values in `pool`.
    """
    if not (0.0 < k <= 1.0):
        raise ValueError(f"percentile k must be in (0, 1], got {k}")
    if scope not in SCOPES:
        raise ValueError(f"unknown scope {scope!r}")
    H = np.asarray(H, dtype=np.float64)
    if H.size == 0:
        raise ValueError("empty entropy sequence")
    if scope == "per_sequence":
        source = H
    else:
        if pool is None:
            raise ValueError("corpus_global gating needs the pooled H values")
        source = np.asarray(pool, dtype=np.float64)
    threshold = nearest_rank_threshold(source, k)
    return threshold, (H <= threshold).astype(np.uint8)


# -------------------------------------------------------------------- cache


def _cache_read(path: str) -> tuple[dict, dict[int, dict]] | None:
    if not os.path.exists(path):
        return None
    with open(path) as f:
        lines = [ln for ln in f if ln.strip()]
    if not lines:
        return None
    header = json.loads(lines[0])
    records = {}
    for ln in lines[1:]:
        rec = json.loads(ln)
        records[int(rec["sequence_id"])] = rec
    return header, records


def _cache_write(path: str, header: dict, profiles: dict[int, EntropyProfile]) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as f:
        f.write(json.dumps(header) + "\n")
        for sid in sorted(profiles):
            p = profiles[sid]
            f.write(json.dumps({
                "sequence_id": p.sequence_id, "mode": header["mode"], "k": p.percentile_k,
                "threshold": p.threshold, "H": p.H.tolist(), "g": p.g.tolist(),
                "surprisal": p.surprisal.tolist()}) + "\n")
    os.replace(tmp, path)


def profile_corpus(model: TinyDecoder, corpus: list[TokenSequence], k: float, mode: str,
                   cache_path: str, scope: str = "per_sequence") -> EntropyCache:
    """Profile every target-domain sequence, reusing cached entries when valid."""
    if mode not in MODES:
        raise ValueError(f"unknown scoring mode {mode!r}")
    if scope not in SCOPES:
        raise ValueError(f"unknown scope {scope!r}")
    fingerprint = model.fingerprint()
    header = {"fingerprint": fingerprint, "mode": mode, "k": k, "scope": scope}

    cached_records: dict[int, dict] = {}
    on_disk = _cache_read(cache_path)
    if on_disk is not None:
        old_header, records = on_disk
        if old_header == header:
            cached_records = records
        else:
            warnings.warn(
                f"entropy cache {cache_path} header mismatch "
                f"(have {old_header}, want {header}); rebuilding")

    targets = [s for s in corpus if s.domain_tag == "target"]
    scored: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    cache = EntropyCache(fingerprint, mode, k, scope)
    for seq in targets:
        rec = cached_records.get(seq.sequence_id)
        if rec is not None:
            scored[seq.sequence_id] = (np.array(rec["H"], dtype=np.float64),
                                       np.array(rec["surprisal"], dtype=np.float64))
            continue
        h, surprisal = score_sequence(model, seq)
        scored[seq.sequence_id] = (h if mode == "shannon" else surprisal, surprisal)

    if scope == "corpus_global":
        pool = np.concatenate([scored[s.sequence_id][0] for s in targets])
    for seq in targets:
        h_mode, surprisal = scored[seq.sequence_id]
        if scope == "per_sequence":
            threshold, g = gate(h_mode, k, scope)
        else:
            threshold, g = gate(h_mode, k, scope, pool=pool)
        cache.profiles[seq.sequence_id] = EntropyProfile(
            seq.sequence_id, h_mode, k, threshold, g, surprisal)

    _cache_write(cache_path, header, cache.profiles)
    return cache


def load_cache(cache_path: str) -> EntropyCache | None:
    """Read a cache file without any model in hand; None when absent or empty."""
    on_disk = _cache_read(cache_path)
    if on_disk is None:
        return None
    header, records = on_disk
    cache = EntropyCache(header["fingerprint"], header["mode"], header["k"], header["scope"])
    for sid, rec in records.items():
        cache.profiles[sid] = EntropyProfile(
            sid, np.array(rec["H"], dtype=np.float64), float(rec["k"]),
            float(rec["threshold"]), np.array(rec["g"], dtype=np.uint8),
            np.array(rec["surprisal"], dtype=np.float64))
    return cache


# ----------------------------------------------------------- stratification


def stratify_validation(profiles: list[EntropyProfile],
                        low_frac: float = 0.5,
                        high_frac: float = 0.25) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    """Fixed confidence groups for RQ3-style loss tracking.

    Confidence is the base model's likelihood of the realized token, so low
    surprisal = high confidence. The low-entropy group is the top `low_frac`
    of tokens by confidence (surprisal <= its nearest-rank cutoff); the
    high-entropy group is the bottom `high_frac` (surprisal above the
    (1-high_frac) cutoff). Returns sequence_id -> (low_mask, high_mask).
    """
    pool = np.concatenate([p.surprisal for p in profiles])
    low_cut = nearest_rank_threshold(pool, low_frac)
    high_cut = nearest_rank_threshold(pool, 1.0 - high_frac)
    out = {}
    for p in profiles:
        low = (p.surprisal <= low_cut).astype(np.float64)
        high = (p.surprisal > high_cut).astype(np.float64)
        out[p.sequence_id] = (low, high)
    return out
