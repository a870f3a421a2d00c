"""Entropy-guided token dropout and the baseline perturbations.

The mechanism, in evaluation order per training step j:
    cap        gamma_max^(j) = gamma_max / (1 + exp(-s*(j - j0)))
    ratio      gamma_j ~ U(0, cap)
    mask       P(m_t = 0) = gamma_j * g_t, independent per token
    substitute x~_t = m_t * x_t + (1 - m_t) * e_bar
Loss targets are never altered: only input embeddings change. General-domain
sequences always receive the identity perturbation, for every policy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .corpus import TokenSequence
from .entropy import EntropyProfile
from .model import EmbeddingTable

POLICY_KINDS = ("none", "entrodrop", "vanilla_token_dropout", "hidden_dropout",
                "weight_decay", "embedding_noise")


@dataclass(frozen=True)
class CurriculumSchedule:
    gamma_max: float
    s: float  # the schedule sharpness (the percentile k keeps its own name)
    j0: float
    step_unit: str = "optimizer_step"

    def __post_init__(self):
        if not (0.0 <= self.gamma_max < 1.0):
            raise ValueError("gamma_max must be in [0, 1)")
        if self.s <= 0.0:
            raise ValueError("sharpness s must be positive")
        if self.step_unit not in ("optimizer_step", "target_epoch"):
            raise ValueError(f"unknown step_unit {self.step_unit!r}")


@dataclass(eq=False)
class MaskPlan:
    sequence_id: int
    gamma_j: float
    m: np.ndarray  # uint8 bits, 0 = dropped
    rng_stream_id: tuple


@dataclass(frozen=True)
class PerturbationPolicy:
    kind: str = "none"
    hidden_dropout_rate: float = 0.1
    weight_decay: float = 0.1
    noise_alpha: float = 5.0
    mask_vector: str = "mean"  # "zero" exposed for the ablation harness

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if not (0.0 <= self.hidden_dropout_rate < 1.0):
            raise ValueError("hidden_dropout_rate must be in [0, 1)")
        if self.weight_decay < 0.0:
            raise ValueError("weight_decay must be nonnegative")
        if self.mask_vector not in ("mean", "zero"):
            raise ValueError(f"unknown mask_vector {self.mask_vector!r}")

    def descriptor(self) -> str:
        if self.kind == "hidden_dropout":
            return f"hidden_dropout(p={self.hidden_dropout_rate})"
        if self.kind == "weight_decay":
            return f"weight_decay(lambda={self.weight_decay})"
        if self.kind == "embedding_noise":
            return f"embedding_noise(alpha={self.noise_alpha})"
        return self.kind


# ---------------------------------------------------------------- schedule


def _sigmoid(x: float) -> float:
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def curriculum_cap(j: float, sched: CurriculumSchedule) -> float:
    """The time-dependent upper bound of the dropout ratio."""
    return sched.gamma_max * _sigmoid(sched.s * (j - sched.j0))


def sample_ratio(j: float, sched: CurriculumSchedule, rng: np.random.Generator) -> float:
    """gamma_j ~ U(0, cap(j))."""
    cap = curriculum_cap(j, sched)
    return float(rng.uniform(0.0, cap)) if cap > 0.0 else 0.0


# ----------------------------------------------------------------- masking


def sample_mask(profile: EntropyProfile, gamma_j: float, rng: np.random.Generator,
                rng_stream_id: tuple = ()) -> MaskPlan:
    """Independent per-token Bernoulli mask; ungated tokens are always kept."""
    if not (0.0 <= gamma_j < 1.0):
        raise ValueError("gamma_j must be in [0, 1)")
    g = np.asarray(profile.g, dtype=bool)
    u = rng.random(len(g))  # one draw per position, gated or not
    m = np.ones(len(g), dtype=np.uint8)
    m[g & (u < gamma_j)] = 0
    return MaskPlan(profile.sequence_id, gamma_j, m, rng_stream_id)


def apply_mask(seq: TokenSequence, plan: MaskPlan, table: EmbeddingTable,
               mask_vector: np.ndarray | None = None) -> T.Tensor:
    """Perturbed embedding rows for seq: kept rows from E, dropped rows = e_bar.

    mask_vector overrides the substitution vector (the trainer passes the
    e_bar snapshot frozen at training start, or zeros in the ablation mode).
    Differentiable into E at kept positions only.
    """
    if len(plan.m) != len(seq.ids):
        raise T.ShapeError(
            f"mask length {len(plan.m)} != sequence length {len(seq.ids)}")
    vec = table.e_bar if mask_vector is None else np.asarray(mask_vector, dtype=np.float64)
    rows = T.embedding_lookup(table.E, seq.ids)
    keep = plan.m.astype(np.float64)[:, None]
    return T.add(T.mul(rows, keep), T.Tensor(vec * (1.0 - keep)))


def full_gate_profile(seq: TokenSequence) -> EntropyProfile:
    """g = 1 everywhere: the vanilla token-dropout gate."""
    t = len(seq.ids)
    return EntropyProfile(seq.sequence_id, np.zeros(t), 1.0, 0.0,
                          np.ones(t, dtype=np.uint8), np.zeros(t))


# --------------------------------------------------------------- baselines


def embedding_noise_amplitude(alpha: float, t: int, d: int) -> float:
    """NEFTune-style scale alpha/sqrt(T*d) for one sequence."""
    return alpha / math.sqrt(t * d)


def apply_embedding_noise(seq: TokenSequence, table: EmbeddingTable, alpha: float,
                          rng: np.random.Generator) -> T.Tensor:
    """Token embeddings plus uniform noise in [-1, 1] scaled by alpha/sqrt(T*d)."""
    rows = T.embedding_lookup(table.E, seq.ids)
    t, d = len(seq.ids), table.E.data.shape[1]
    amp = embedding_noise_amplitude(alpha, t, d)
    noise = rng.uniform(-1.0, 1.0, size=(t, d)) * amp
    return T.add(rows, T.Tensor(noise))


def hidden_dropout_masks(rate: float, n_layers: int, batch: int, t: int, d: int,
                         target_rows: np.ndarray,
                         rng: np.random.Generator) -> list[tuple[np.ndarray, np.ndarray]]:
    """Inverted-dropout masks for the residual branches, target rows only.

    Returns one (attn_mask, mlp_mask) pair of [batch, t, d] arrays per layer;
    general-domain rows stay at exactly 1.0 so they see the identity forward.
    """
    keep = 1.0 - rate
    rows = np.asarray(target_rows, dtype=bool)
    out = []
    for _ in range(n_layers):
        pair = []
        for _ in range(2):
            mask = np.ones((batch, t, d))
            if rate > 0.0 and rows.any():
                draws = rng.random((int(rows.sum()), t, d))
                mask[rows] = (draws < keep) / keep
            pair.append(mask)
        out.append((pair[0], pair[1]))
    return out
