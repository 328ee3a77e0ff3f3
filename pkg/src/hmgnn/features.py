"""Tokens, vocabulary, word vectors and aspect-relative position features."""
from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .numerics import DTYPE, DomainError, make_rng

LABELS = ("negative", "neutral", "positive")
PAD, UNK = 0, 1
WORD_DIM = 300
POS_DIM = 100
MAX_DISTANCE = 99

_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)


class EmbeddingFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Example:
    """One aspect occurrence: tokens, half-open aspect span ``[start, end)`` and label index."""

    tokens: tuple[str, ...]
    span: tuple[int, int]
    label: int
    heads: tuple[int, ...] | None = None
    id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "span", tuple(int(s) for s in self.span))
        s, e = self.span
        if not 0 <= s < e <= len(self.tokens):
            raise DomainError(f"aspect span {self.span} invalid for {len(self.tokens)} tokens")
        if self.label not in (0, 1, 2):
            raise DomainError(f"label must be 0, 1 or 2, got {self.label!r}")
        if self.heads is not None:
            object.__setattr__(self, "heads", tuple(int(h) for h in self.heads))
            if len(self.heads) != len(self.tokens):
                raise DomainError("head count differs from token count")

    @property
    def aspect(self) -> tuple[str, ...]:
        return self.tokens[self.span[0]:self.span[1]]


def tokenize_with_offsets(text: str) -> list[tuple[str, int, int]]:
    """Lowercased word and punctuation tokens with their character offsets."""
    return [(m.group().lower(), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]


def tokenize(text: str) -> list[str]:
    return [tok for tok, _, _ in tokenize_with_offsets(text)]


class Vocab:
    """Word/id bijection with id 0 reserved for padding and id 1 for unknown words."""

    def __init__(self, words=()):
        self.itos: list[str] = ["<pad>", "<unk>"]
        self.stoi: dict[str, int] = {"<pad>": PAD, "<unk>": UNK}
        for w in words:
            self.add(w)

    def add(self, word: str) -> int:
        if word not in self.stoi:
            self.stoi[word] = len(self.itos)
            self.itos.append(word)
        return self.stoi[word]

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, word) -> bool:
        return word in self.stoi

    def __getitem__(self, word: str) -> int:
        return self.stoi.get(word, UNK)

    def encode(self, tokens) -> np.ndarray:
        return np.array([self[t] for t in tokens], dtype=np.int64)

    def words(self) -> list[str]:
        """Non-reserved entries in id order."""
        return self.itos[2:]

    def digest(self) -> str:
        return hashlib.sha256("\n".join(self.itos).encode("utf-8")).hexdigest()[:16]


def build_vocab(corpus) -> Vocab:
    corpus = list(corpus)
    if not corpus:
        raise DomainError("cannot build a vocabulary from an empty corpus")
    vocab = Vocab()
    for ex in corpus:
        for tok in ex.tokens:
            vocab.add(tok)
    return vocab


@dataclass
class EmbeddingTable:
    vectors: np.ndarray
    found: int = 0
    coverage: float = 0.0
    missing: list[str] = field(default_factory=list)


def random_embeddings(vocab: Vocab, dim: int = WORD_DIM, seed: int = 0) -> EmbeddingTable:
    """Table with every non-padding row drawn from U(-0.25, 0.25)."""
    rng = make_rng(seed, "embed.word.oov")
    vectors = rng.uniform(-0.25, 0.25, size=(len(vocab), dim))
    vectors[PAD] = 0.0
    return EmbeddingTable(vectors, 0, 0.0, vocab.words())


def load_embeddings(path, vocab: Vocab, dim: int = WORD_DIM, seed: int = 0) -> EmbeddingTable:
    """Load ``word v1 ... v_dim`` lines for the words in ``vocab``.

    Words absent from the file keep their U(-0.25, 0.25) initialisation; the
    padding row is zero. The whole file is validated, not only vocabulary lines.
    """
    table = random_embeddings(vocab, dim, seed)
    seen = set()
    nonempty = False
    with open(Path(path), encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            nonempty = True
            if len(parts) != dim + 1:
                raise EmbeddingFormatError(
                    f"{path}:{lineno}: expected {dim + 1} fields, got {len(parts)}")
            try:
                vec = np.array([float(x) for x in parts[1:]], dtype=DTYPE)
            except ValueError:
                raise EmbeddingFormatError(f"{path}:{lineno}: unparseable float") from None
            if not np.all(np.isfinite(vec)):
                raise EmbeddingFormatError(f"{path}:{lineno}: non-finite value")
            word = parts[0]
            idx = vocab.stoi.get(word)
            if idx is not None and idx >= 2 and idx not in seen:
                table.vectors[idx] = vec
                seen.add(idx)
    if not nonempty:
        raise EmbeddingFormatError(f"{path}: empty embedding file")
    n_words = len(vocab) - 2
    table.found = len(seen)
    table.coverage = len(seen) / n_words if n_words else 0.0
    table.missing = [w for i, w in enumerate(vocab.itos) if i >= 2 and i not in seen]
    return table


def relative_distance(example: Example, max_distance: int = MAX_DISTANCE) -> np.ndarray:
    """Unsigned distance of each token to the nearest aspect endpoint, clipped to ``max_distance``."""
    s, e = example.span
    idx = np.arange(len(example.tokens))
    dist = np.minimum(np.abs(idx - s), np.abs(idx - (e - 1)))
    dist[s:e] = 0
    return np.minimum(dist, max_distance)


def compose_input(example: Example, vocab: Vocab, word_vectors: np.ndarray,
                  position_table: np.ndarray) -> np.ndarray:
    """Row i = word vector of token i followed by the position vector of its distance."""
    ids = vocab.encode(example.tokens)
    dist = relative_distance(example, position_table.shape[0] - 1)
    return np.concatenate([word_vectors[ids], position_table[dist]], axis=1)
