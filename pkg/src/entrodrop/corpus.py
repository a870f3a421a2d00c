"""Synthetic corpora: scarce arithmetic target domain, abundant general text.

Character-level tokenization over BOS plus the 95 printable ASCII characters.
Target sequences are 26-char two-digit arithmetic derivations, wrapping mod
100, reduced one operation at a time ("cal[abb]84.43.12=41.12=29;"); the
tag selects the operator pair, which is never printed ('.' is a fixed
separator), so the tag is the only place a line states its rule. Every
derivation ends with ';' so greedy decoding has a stop symbol. General
sequences come from a fixed stochastic grammar of English-like words, digits,
punctuation, and a rare symbol burst that keeps the whole vocabulary in
circulation.

All generation is a pure function of the spec seed. Target ids count up from
0; general ids start at 2**32, so the namespaces never collide.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .rng import stream

BOS_ID = 0
_PRINTABLE = [chr(c) for c in range(32, 127)]
VOCAB = ["<bos>"] + _PRINTABLE
VOCAB_SIZE = len(VOCAB)  # 96
_CHAR_TO_ID = {c: i + 1 for i, c in enumerate(_PRINTABLE)}

GENERAL_ID_BASE = 1 << 32

# rng stream tags, so every consumer of the corpus seed draws independently
_TAG_TARGET, _TAG_GENERAL, _TAG_SPLIT, _TAG_BATCH = 1, 2, 3, 4


def encode(text: str) -> np.ndarray:
    try:
        return np.array([_CHAR_TO_ID[c] for c in text], dtype=np.int64)
    except KeyError as e:
        raise ValueError(f"character {e.args[0]!r} not in vocabulary") from None


def decode(ids) -> str:
    out = []
    for i in ids:
        if i == BOS_ID:
            continue
        out.append(_PRINTABLE[int(i) - 1])
    return "".join(out)


@dataclass(eq=False)
class TokenSequence:
    ids: np.ndarray
    domain_tag: str  # "target" or "general"
    sequence_id: int

    @property
    def text(self) -> str:
        return decode(self.ids)

    def __len__(self) -> int:
        return len(self.ids)


@dataclass(frozen=True)
class CorpusSpec:
    target_unique_tokens: int = 50_000
    general_unique_tokens: int = 1_000_000  # materialized shard size, >= 20x target
    mix_ratio: tuple[int, int] = (6, 4)
    generation_seed: int = 0
    max_seq_len: int = 128

    def __post_init__(self):
        if self.mix_ratio[0] <= 0 or self.mix_ratio[1] < 0:
            raise ValueError("mix ratio components must be positive (general may be 0)")


# ----------------------------------------------------------- target domain

# Fixed per-line template: boilerplate whose predictions generalize from the
# training items to validation, unlike the random digits of the problems.
# The three-char tag cycles through {a,b}^3 deterministically, so each char is
# exactly uniform given its (line-identical) context: an irreducible-loss token
# that memorizing training items cannot sharpen, since its context carries no
# item identity. The template is sized so determined chars plus the tag are
# exactly half of each 26-char line: a pooled 50%-confidence cut then lands on
# the costliest tag and selects precisely boilerplate-plus-tags, no digits, so
# that group's loss has an irreducible, creep-free floor of 3*ln2 per line.
TEMPLATE_PRE = "cal["
TEMPLATE_POST = "]"
ANCHOR_CHARS = "ab"

# The operator pair is a fixed function of the tag, '*' only ever first, and
# is never printed: derivations show a fixed '.' where the operator acts, so
# the tag chars are the only tokens that carry a line's rule. They are also
# the cheapest tokens to predict beyond the constant template, which makes
# them exactly the tokens an entropy gate selects: hiding one from the input
# genuinely removes rule information instead of redundant boilerplate.
OPS_BY_TAG = (("+", "+"), ("-", "-"), ("+", "-"), ("-", "+"),
              ("*", "+"), ("*", "-"), ("+", "+"), ("-", "-"))


def _anchor_tag(i: int) -> str:
    return "".join(ANCHOR_CHARS[(i >> b) & 1] for b in range(3))


def line_ops(tag: str) -> tuple[str, str]:
    return OPS_BY_TAG[sum((tag[b] == ANCHOR_CHARS[1]) << b for b in range(3))]


def _apply(a: int, op: str, b: int) -> int:
    v = a * b if op == "*" else (a + b if op == "+" else a - b)
    return v % 100


def _derivation(rng: np.random.Generator, ops: tuple[str, str], hi: int = 99) -> str:
    """Two-step derivation over two-digit values, arithmetic wrapping mod 100.

    Operands are independent uniform draws printed at width two, and the mod
    keeps every stage value width two as well, so each '.', '=', and ';' sits
    at the exact same position in every line regardless of the digits.
    Independence matters: no operand digit is ever predictable from the line
    prefix, so none of them can sit below the pooled surprisal median.
    """
    a, b, c = (int(v) for v in rng.integers(0, hi + 1, size=3))
    x = _apply(a, ops[0], b)
    f = _apply(x, ops[1], c)
    return f"{a:02d}.{b:02d}.{c:02d}={x:02d}.{c:02d}={f:02d};"


def target_line(i: int, rng: np.random.Generator, hi: int = 99) -> str:
    tag = _anchor_tag(i)
    return TEMPLATE_PRE + tag + TEMPLATE_POST + _derivation(rng, line_ops(tag), hi)


def generate_target_corpus(spec: CorpusSpec) -> list[TokenSequence]:
    """Arithmetic derivations totalling target_unique_tokens, +- one sequence."""
    rng = stream(spec.generation_seed, _TAG_TARGET)
    out: list[TokenSequence] = []
    total = 0
    while total < spec.target_unique_tokens:
        text = target_line(len(out), rng)
        if len(text) > spec.max_seq_len:
            # lines are fixed width, so a retry could never fit either
            raise ValueError(f"max_seq_len {spec.max_seq_len} cannot hold a "
                             f"{len(text)}-char target line")
        out.append(TokenSequence(encode(text), "target", len(out)))
        total += len(text)
    return out


def problem_prefix(text: str) -> str:
    """The expression up to and including the first '=' (the decode prompt)."""
    return text[: text.index("=") + 1]


def final_answer(text: str) -> str:
    """The value between the last '=' and the terminator, if well formed."""
    body = text.split(";")[0]
    return body.rsplit("=", 1)[-1]


# ----------------------------------------------------------- general domain

_WORDS = np.array((
    "the of and to in is was for on that with as his they at be this from have "
    "or by one had not but what all were when we there can an your which their "
    "said if do will each about how up out them then she many some so these "
    "would other into has more her two like him see time could no make than "
    "first been its who now people my made over did down only way find use may "
    "water long little very after words called just where most know get through "
    "back much before go good new write our used me man too any day same right "
    "look think also around another came come work three word must because does "
    "part even place well such here take why things help put years different "
    "away again off went old number great tell men say small every found still "
    "between name should home big give air line set own under read last never "
    "us left end along while might next sound below saw something thought both "
    "few those always looked show large often together asked house world going "
    "quite quick question quiet square zero size zone dozen puzzle lazy quartz").split())

_SENT_END = np.array([".", ".", ".", ".", "!", "?"])
_MID_PUNCT = np.array([",", ",", ",", ";", ":", " -"])
_SYMBOLS = np.array(list("#$%&*+/<=>@[\\]^_`{|}~"))


def _inline_equation(rng: np.random.Generator) -> str:
    # same derivation grammar with small operands, embedded in prose: keeps the
    # '='/';' format rules consistent while wide-operand arithmetic stays unseen
    return _derivation(rng, OPS_BY_TAG[int(rng.integers(0, 8))], hi=49)


def _general_sentence(rng: np.random.Generator, lo: int, hi: int) -> str:
    """A sentence whose length lands in [lo, hi] characters."""
    want = int(rng.integers(lo, hi + 1))
    parts: list[str] = []
    length = 0
    first = True
    while length < want - 8:
        r = rng.random()
        if r < 0.02:
            # rare symbol burst keeps every printable character in circulation
            w = "".join(rng.choice(_SYMBOLS) for _ in range(int(rng.integers(2, 6))))
        elif r < 0.08:
            w = _inline_equation(rng)
        elif r < 0.14:
            w = str(int(rng.integers(0, 10000)))
        elif r < 0.16:
            w = "'" + rng.choice(_WORDS) + "'"
        elif r < 0.18:
            w = '"' + rng.choice(_WORDS) + '"'
        elif r < 0.20:
            w = "(" + rng.choice(_WORDS) + ")"
        else:
            w = rng.choice(_WORDS)
            if r > 0.97:
                w = w.upper()
        if first:
            w = w[0].upper() + w[1:] if w[0].isalpha() else w
            first = False
        elif rng.random() < 0.12 and parts:
            glued = rng.choice(_MID_PUNCT) + " " + w
            parts[-1] = parts[-1] + glued
            length += len(glued)
            continue
        parts.append(w)
        length += len(w) + 1
    return " ".join(parts) + rng.choice(_SENT_END)


def generate_general_corpus(spec: CorpusSpec,
                            length_range: tuple[int, int] = (34, 44)) -> Iterator[TokenSequence]:
    """Endless deterministic stream of general-domain sequences.

    Mostly prose; a small share are standalone template equation lines, so a
    model trained here treats the target domain's boilerplate as predictable
    while its multi-digit arithmetic stays unseen.
    """
    rng = stream(spec.generation_seed, _TAG_GENERAL)
    lo, hi = length_range
    hi = min(hi, spec.max_seq_len)
    k = 0
    n_eval = 0
    while True:
        if rng.random() < 0.15:
            # small operands: the line format, the tag statistics, and the
            # step-copying skill transfer; the wide-operand arithmetic does not
            text = target_line(n_eval, rng, hi=49)
            n_eval += 1
        else:
            text = _general_sentence(rng, lo, hi)[: spec.max_seq_len]
        yield TokenSequence(encode(text), "general", GENERAL_ID_BASE + k)
        k += 1


# ------------------------------------------------------------- split, batches


def split_validation(target: list[TokenSequence], seed: int,
                     fraction: float = 0.05) -> tuple[list[TokenSequence], list[TokenSequence]]:
    """Reserve a deterministic fraction of target sequences as held-out validation."""
    n_val = max(1, int(round(len(target) * fraction)))
    perm = stream(seed, _TAG_SPLIT).permutation(len(target))
    val_idx = set(int(i) for i in perm[:n_val])
    train = [s for i, s in enumerate(target) if i not in val_idx]
    val = [s for i, s in enumerate(target) if i in val_idx]
    return train, val


def target_per_batch(batch_size: int, ratio: tuple[int, int]) -> int:
    r = ratio[0] / (ratio[0] + ratio[1])
    return int(round(batch_size * r))


def mixed_batches(target: list[TokenSequence], general: Iterator[TokenSequence],
                  ratio: tuple[int, int], batch_size: int,
                  seed: int) -> Iterator[list[TokenSequence]]:
    """Deterministic endless batch iterator.

    Each batch holds round(batch_size * ratio) target sequences and the rest
    general. Target sequences cycle in epoch order: a full permutation pass
    completes before any sequence repeats.
    """
    if not target:
        raise ValueError("empty target corpus")
    n_t = target_per_batch(batch_size, ratio)
    n_g = batch_size - n_t

    def target_cursor() -> Iterator[TokenSequence]:
        epoch = 0
        while True:
            for i in stream(seed, _TAG_BATCH, epoch).permutation(len(target)):
                yield target[int(i)]
            epoch += 1

    tcur = target_cursor()
    while True:
        batch = [next(tcur) for _ in range(n_t)]
        batch.extend(next(general) for _ in range(n_g))
        yield batch


# ---------------------------------------------------------------- shard file


def write_shard(path: str, sequences: Iterable[TokenSequence]) -> None:
    with open(path, "w") as f:
        for s in sequences:
            f.write(json.dumps({"sequence_id": s.sequence_id, "domain_tag": s.domain_tag,
                                "text": s.text}) + "\n")


def read_shard(path: str) -> list[TokenSequence]:
    out = []
    with open(path) as f:
        for line in f:
            if not line.strip():
                continue
            rec = json.loads(line)
            out.append(TokenSequence(encode(rec["text"]), rec["domain_tag"],
                                     int(rec["sequence_id"])))
    return out
