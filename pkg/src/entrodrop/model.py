"""Tiny decoder-only transformer with embedding-level perturbation hooks.

Learned positional embeddings, pre-norm blocks, no weight tying. forward()
takes an optional input_embeddings_override that replaces the token-embedding
lookup (positions are still added), which is how perturbed inputs enter the
model without touching the loss targets.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import asdict, dataclass

import numpy as np

from . import tensor as T

CHECKPOINT_MAGIC = b"EDCK0001"


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    d_model: int
    n_layers: int
    n_heads: int
    max_seq_len: int = 128
    seed: int = 0

    def __post_init__(self):
        if self.vocab_size < 2:
            raise ValueError("vocab_size must be >= 2")
        if self.d_model % self.n_heads != 0:
            raise ValueError("d_model must be divisible by n_heads")


def param_count(cfg: ModelConfig) -> int:
    """Exact parameter count as a pure function of the config."""
    d, v, ff = cfg.d_model, cfg.vocab_size, 4 * cfg.d_model
    per_layer = 4 * d + 4 * (d * d + d) + (d * ff + ff) + (ff * d + d)
    return v * d + cfg.max_seq_len * d + cfg.n_layers * per_layer + 2 * d + d * v


class EmbeddingTable:
    """The token-embedding matrix E plus its row mean, the mask vector e_bar."""

    def __init__(self, E: T.Tensor):
        self.E = E

    @property
    def e_bar(self) -> np.ndarray:
        return mean_rows(self.E.data)

    def mean_embedding(self) -> np.ndarray:
        return self.e_bar


def mean_rows(E: np.ndarray) -> np.ndarray:
    return E.mean(axis=0)


class TinyDecoder:
    """Causal next-token model: logits[t] predicts the token at position t+1."""

    def __init__(self, cfg: ModelConfig):
        self.cfg = cfg
        self.params: dict[str, T.Tensor] = {}
        self.forward_count = 0
        rng = np.random.default_rng(cfg.seed)
        d, ff = cfg.d_model, 4 * cfg.d_model

        def p(name: str, shape, init: str = "normal"):
            if init == "normal":
                data = rng.normal(0.0, 0.02, size=shape)
            elif init == "zeros":
                data = np.zeros(shape)
            else:
                data = np.ones(shape)
            self.params[name] = T.Tensor(data, requires_grad=True)

        p("tok_emb", (cfg.vocab_size, d))
        p("pos_emb", (cfg.max_seq_len, d))
        for i in range(cfg.n_layers):
            p(f"l{i}.ln1.g", (d,), "ones")
            p(f"l{i}.ln1.b", (d,), "zeros")
            for w in ("wq", "wk", "wv", "wo"):
                p(f"l{i}.attn.{w}", (d, d))
            for b in ("bq", "bk", "bv", "bo"):
                p(f"l{i}.attn.{b}", (d,), "zeros")
            p(f"l{i}.ln2.g", (d,), "ones")
            p(f"l{i}.ln2.b", (d,), "zeros")
            p(f"l{i}.mlp.w1", (d, ff))
            p(f"l{i}.mlp.b1", (ff,), "zeros")
            p(f"l{i}.mlp.w2", (ff, d))
            p(f"l{i}.mlp.b2", (d,), "zeros")
        p("ln_f.g", (d,), "ones")
        p("ln_f.b", (d,), "zeros")
        p("head.w", (d, cfg.vocab_size))
        self.embedding_table = EmbeddingTable(self.params["tok_emb"])

    # ---------------------------------------------------------------- params

    def param_names(self) -> list[str]:
        return list(self.params.keys())

    def num_params(self) -> int:
        n = sum(t.data.size for t in self.params.values())
        assert n == param_count(self.cfg)
        return n

    def zero_grad(self) -> None:
        for t in self.params.values():
            t.grad = None

    def fingerprint(self) -> str:
        """Content hash of all parameters, in canonical name order."""
        h = hashlib.sha256()
        for name in self.params:
            h.update(name.encode())
            h.update(np.ascontiguousarray(self.params[name].data).tobytes())
        return h.hexdigest()

    def mean_embedding(self) -> np.ndarray:
        return self.embedding_table.e_bar

    # --------------------------------------------------------------- forward

    def forward(self, ids, input_embeddings_override: T.Tensor | None = None) -> T.Tensor:
        """Logits [T, vocab] for one sequence of input ids (length T)."""
        idx = np.asarray(ids, dtype=np.int64)
        if idx.ndim != 1:
            raise T.ShapeError(f"forward expects a 1-d id sequence, got shape {idx.shape}")
        override = None
        if input_embeddings_override is not None:
            ov = input_embeddings_override
            if ov.data.shape != (idx.shape[0], self.cfg.d_model):
                raise T.ShapeError(
                    f"override shape {ov.data.shape} != ({idx.shape[0]}, {self.cfg.d_model})")
            override = T.reshape(ov, (1,) + ov.data.shape)
        logits = self.forward_batch(idx[None, :], input_embeddings_override=override)
        return T.reshape(logits, logits.data.shape[1:])

    def forward_batch(self, ids, input_embeddings_override: T.Tensor | None = None,
                      hidden_dropout_masks=None) -> T.Tensor:
        """Logits [B, T, vocab] for a [B, T] id batch.

        hidden_dropout_masks, when given, is a list over layers of
        (attn_mask, mlp_mask) arrays broadcastable to [B, T, d_model]; they are
        multiplied onto the residual-branch outputs (inverted-dropout scaling
        baked in by the caller).
        """
        idx = np.asarray(ids, dtype=np.int64)
        bsz, t = idx.shape
        cfg = self.cfg
        if t > cfg.max_seq_len:
            raise T.ShapeError(f"sequence length {t} exceeds max_seq_len {cfg.max_seq_len}")
        self.forward_count += 1
        P = self.params

        if input_embeddings_override is not None:
            tok = input_embeddings_override
            if tok.data.shape != (bsz, t, cfg.d_model):
                raise T.ShapeError(
                    f"override shape {tok.data.shape} != {(bsz, t, cfg.d_model)}")
        else:
            tok = T.embedding_lookup(P["tok_emb"], idx)
        x = T.add(tok, T.embedding_lookup(P["pos_emb"], np.arange(t)))

        nh, dh = cfg.n_heads, cfg.d_model // cfg.n_heads
        for i in range(cfg.n_layers):
            h = T.layer_norm(x, P[f"l{i}.ln1.g"], P[f"l{i}.ln1.b"])
            q = T.linear(h, P[f"l{i}.attn.wq"], P[f"l{i}.attn.bq"])
            k = T.linear(h, P[f"l{i}.attn.wk"], P[f"l{i}.attn.bk"])
            v = T.linear(h, P[f"l{i}.attn.wv"], P[f"l{i}.attn.bv"])

            def heads(z):
                return T.transpose(T.reshape(z, (bsz, t, nh, dh)), (0, 2, 1, 3))

            att = T.attention(heads(q), heads(k), heads(v), causal=True)
            att = T.reshape(T.transpose(att, (0, 2, 1, 3)), (bsz, t, cfg.d_model))
            att = T.linear(att, P[f"l{i}.attn.wo"], P[f"l{i}.attn.bo"])
            if hidden_dropout_masks is not None:
                att = T.mul(att, T.Tensor(hidden_dropout_masks[i][0]))
            x = T.add(x, att)

            h = T.layer_norm(x, P[f"l{i}.ln2.g"], P[f"l{i}.ln2.b"])
            m = T.linear(h, P[f"l{i}.mlp.w1"], P[f"l{i}.mlp.b1"])
            m = T.linear(T.relu(m), P[f"l{i}.mlp.w2"], P[f"l{i}.mlp.b2"])
            if hidden_dropout_masks is not None:
                m = T.mul(m, T.Tensor(hidden_dropout_masks[i][1]))
            x = T.add(x, m)

        x = T.layer_norm(x, P["ln_f.g"], P["ln_f.b"])
        return T.matmul(x, P["head.w"])


# ------------------------------------------------------------------ storage


def save_checkpoint(model: TinyDecoder, path: str, step: int = 0) -> None:
    """Binary layout: magic, uint32 header length, JSON header, raw f64 LE arrays."""
    header = {
        "config": asdict(model.cfg),
        "step": int(step),
        "params": [
            {"name": n, "shape": list(t.data.shape)} for n, t in model.params.items()
        ],
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        for t in model.params.values():
            f.write(np.ascontiguousarray(t.data, dtype="<f8").tobytes())
    with open(path + ".json", "w") as f:
        json.dump({**header, "fingerprint": model.fingerprint()}, f, indent=2, sort_keys=True)


def load_checkpoint(path: str) -> tuple[TinyDecoder, int]:
    with open(path, "rb") as f:
        magic = f.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"not a checkpoint file: bad magic {magic!r}")
        (hlen,) = struct.unpack("<I", f.read(4))
        header = json.loads(f.read(hlen))
        model = TinyDecoder(ModelConfig(**header["config"]))
        for spec in header["params"]:
            shape = tuple(spec["shape"])
            raw = f.read(8 * int(np.prod(shape)))
            model.params[spec["name"]].data = np.frombuffer(
                raw, dtype="<f8").reshape(shape).copy()
    return model, int(header["step"])
