"""Corpus loaders (SemEval-2014 task 4 XML, 3-line Twitter files), metrics, and a
synthetic proximity corpus for learnability checks."""
from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .features import LABELS, Example, tokenize, tokenize_with_offsets
from .numerics import DomainError, make_rng

POLARITY = {name: i for i, name in enumerate(LABELS)}
TWITTER_LABELS = {"-1": 0, "0": 1, "1": 2}


class CorpusFormatError(ValueError):
    pass


class AlignmentError(ValueError):
    pass


@dataclass
class Dataset:
    name: str
    train: list[Example]
    test: list[Example]
    val: list[Example] | None = None


@dataclass
class SemEvalCorpus:
    examples: list[Example]
    dropped_conflict: int = 0
    skipped_misaligned: list[str] = field(default_factory=list)

    @property
    def total_terms(self) -> int:
        return len(self.examples) + self.dropped_conflict + len(self.skipped_misaligned)


def align_span(offsets, start: int, end: int) -> tuple[int, int] | None:
    """Smallest token range covering characters ``[start, end)``, or None if no token overlaps."""
    hits = [i for i, (_, s, e) in enumerate(offsets) if s < end and e > start]
    if start >= end or not hits:
        return None
    return hits[0], hits[-1] + 1


def load_semeval(path, skip_misaligned: bool = False) -> SemEvalCorpus:
    """One Example per (sentence, aspect term); ``conflict`` polarities are dropped and counted."""
    try:
        root = ET.parse(Path(path)).getroot()
    except ET.ParseError as err:
        raise CorpusFormatError(f"{path}: malformed markup at line {err.position[0]}, "
                                f"column {err.position[1]}") from None
    corpus = SemEvalCorpus([])
    for sent in root.iter("sentence"):
        sid = sent.get("id", "?")
        text_el = sent.find("text")
        if text_el is None or text_el.text is None:
            raise CorpusFormatError(f"{path}: sentence {sid} has no text")
        offsets = tokenize_with_offsets(text_el.text)
        tokens = tuple(tok for tok, _, _ in offsets)
        for k, term in enumerate(sent.iter("aspectTerm")):
            polarity = term.get("polarity")
            if polarity == "conflict":
                corpus.dropped_conflict += 1
                continue
            if polarity not in POLARITY:
                raise CorpusFormatError(f"{path}: sentence {sid}: unknown polarity {polarity!r}")
            try:
                start, end = int(term.get("from")), int(term.get("to"))
            except (TypeError, ValueError):
                raise CorpusFormatError(f"{path}: sentence {sid}: bad from/to offsets") from None
            span = align_span(offsets, start, end)
            if span is None:
                if skip_misaligned:
                    corpus.skipped_misaligned.append(sid)
                    continue
                raise AlignmentError(f"{path}: sentence {sid}: offsets [{start}, {end}) "
                                     f"match no token")
            corpus.examples.append(Example(tokens, span, POLARITY[polarity], id=f"{sid}#{k}"))
    return corpus


def load_twitter(path) -> list[Example]:
    """Records of three lines: sentence with ``$T$``, aspect text, label in {-1, 0, 1}."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if len(lines) % 3:
        raise CorpusFormatError(f"{path}: {len(lines)} lines is not a multiple of 3")
    examples = []
    for rec in range(len(lines) // 3):
        lineno = 3 * rec + 1
        sentence, aspect, label = lines[3 * rec:3 * rec + 3]
        if "$T$" not in sentence:
            raise CorpusFormatError(f"{path}:{lineno}: sentence lacks the $T$ placeholder")
        aspect_toks = tokenize(aspect)
        if not aspect_toks:
            raise CorpusFormatError(f"{path}:{lineno + 1}: empty aspect")
        if label.strip() not in TWITTER_LABELS:
            raise CorpusFormatError(f"{path}:{lineno + 2}: label {label.strip()!r} not in -1/0/1")
        left, right = sentence.split("$T$", 1)
        left_toks = tokenize(left)
        tokens = left_toks + aspect_toks + tokenize(right.replace("$T$", " ".join(aspect_toks)))
        span = (len(left_toks), len(left_toks) + len(aspect_toks))
        examples.append(Example(tokens, span, TWITTER_LABELS[label.strip()], id=str(rec)))
    return examples


def attach_parses(examples, trees) -> list[Example]:
    """Pair examples with parse sidecar trees by position."""
    examples = list(examples)
    trees = list(trees)
    if len(trees) != len(examples):
        raise CorpusFormatError(f"{len(trees)} parses for {len(examples)} examples")
    out = []
    for ex, tree in zip(examples, trees):
        heads = tree.heads if hasattr(tree, "heads") else tuple(tree)
        if len(heads) != len(ex.tokens):
            raise CorpusFormatError(f"example {ex.id!r}: parse has {len(heads)} heads "
                                    f"for {len(ex.tokens)} tokens")
        out.append(Example(ex.tokens, ex.span, ex.label, heads, ex.id))
    return out


def split_validation(examples, fraction: float = 0.1, seed: int = 0):
    """Seeded (train, val) split holding out ``round(fraction * n)`` examples."""
    examples = list(examples)
    n_val = int(round(fraction * len(examples)))
    if n_val == 0:
        return examples, []
    order = make_rng(seed, "val-split").permutation(len(examples))
    held = set(order[:n_val].tolist())
    return ([ex for i, ex in enumerate(examples) if i not in held],
            [ex for i, ex in enumerate(examples) if i in held])


# ------------------------------------------------------------------- metrics

def _check_pair(preds, golds):
    if len(preds) != len(golds):
        raise DomainError(f"{len(preds)} predictions for {len(golds)} gold labels")
    if not len(golds):
        raise DomainError("no examples to score")


def confusion_matrix(preds, golds, n_classes: int = 3) -> np.ndarray:
    """Counts with rows = gold class, columns = predicted class."""
    _check_pair(preds, golds)
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    for p, g in zip(preds, golds):
        cm[g, p] += 1
    return cm


def accuracy(preds, golds) -> float:
    _check_pair(preds, golds)
    return sum(int(p == g) for p, g in zip(preds, golds)) / len(golds)


def per_class_f1(preds, golds, n_classes: int = 3) -> list[float]:
    cm = confusion_matrix(preds, golds, n_classes)
    scores = []
    for c in range(n_classes):
        tp = cm[c, c]
        fp = cm[:, c].sum() - tp
        fn = cm[c, :].sum() - tp
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        scores.append(2 * precision * recall / (precision + recall) if precision + recall else 0.0)
    return scores


def macro_f1(preds, golds, n_classes: int = 3) -> float:
    """Unweighted mean F1 over all classes; classes never seen score 0."""
    return float(sum(per_class_f1(preds, golds, n_classes)) / n_classes)


# --------------------------------------------------------- synthetic corpus

SENTIMENT_WORDS = (
    ("awful", "terrible", "bad", "horrible"),
    ("okay", "average", "ordinary", "standard"),
    ("great", "excellent", "lovely", "superb"),
)
ASPECTS = ("food", "service", "screen", "battery", "staff", "price", "keyboard", "menu")
FILLERS = ("the", "a", "was", "and", "we", "it", "then", "really", "there", "of", "in", "our")


def synthetic_proximity_corpus(n: int = 60, seed: int = 0, min_gap: int = 4) -> list[Example]:
    """Examples labelled by the sentiment word right after the aspect.

    Each sentence also holds a distractor sentiment word of a different class at
    least ``min_gap`` tokens from the aspect, so only proximity identifies the
    label. Heads form a tree rooted at the aspect, each token attached to its
    neighbour on the aspect side.
    """
    rng = make_rng(seed, "synthetic")
    examples = []
    for k in range(n):
        label = k % 3
        other = (label + 1 + int(rng.integers(2))) % 3
        word = SENTIMENT_WORDS[label][int(rng.integers(4))]
        distractor = SENTIMENT_WORDS[other][int(rng.integers(4))]
        aspect = ASPECTS[int(rng.integers(len(ASPECTS)))]

        def fill(m):
            return [FILLERS[int(i)] for i in rng.integers(len(FILLERS), size=m)]

        left = fill(int(rng.integers(0, 3)))
        gap = fill(min_gap - 1 + int(rng.integers(0, 3)))
        tail = fill(int(rng.integers(0, 3)))
        if rng.random() < 0.5:
            tokens = left + [aspect, word] + gap + [distractor] + tail
        else:
            tokens = left + [distractor] + gap + [aspect, word] + tail
        pos = tokens.index(aspect)
        heads = [i + 1 if i < pos else i - 1 for i in range(len(tokens))]
        heads[pos] = -1
        examples.append(Example(tokens, (pos, pos + 1), label, tuple(heads), id=f"syn{k}"))
    return examples
