"""Dependency trees as head arrays and their adjacency matrices.

Parses are never produced here. They are read from sidecar files, either a
plain one-line-per-sentence list of head indices or CoNLL-U.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .numerics import DTYPE, DomainError


class ParseFormatError(ValueError):
    pass


@dataclass(frozen=True)
class ParseTree:
    """A validated dependency tree; ``heads[i]`` is the head of token ``i``, -1 for the root."""

    heads: tuple[int, ...]

    @property
    def n(self) -> int:
        return len(self.heads)

    @property
    def root(self) -> int:
        return self.heads.index(-1)


def parse_tree_from_heads(heads) -> ParseTree:
    heads = tuple(int(h) for h in heads)
    n = len(heads)
    if n == 0:
        raise ParseFormatError("empty head list")
    roots = [i for i, h in enumerate(heads) if h == -1]
    if len(roots) != 1:
        raise ParseFormatError(f"expected exactly one root, found {len(roots)}")
    for i, h in enumerate(heads):
        if not -1 <= h < n:
            raise ParseFormatError(f"head {h} of token {i} out of range for {n} tokens")
        if h == i:
            raise ParseFormatError(f"token {i} is its own head")

    # 0 = unvisited, 1 = on current path, 2 = known to reach the root
    state = [0] * n
    state[roots[0]] = 2
    for start in range(n):
        path = []
        node = start
        while state[node] == 0:
            state[node] = 1
            path.append(node)
            node = heads[node]
        if state[node] == 1:
            raise ParseFormatError(f"cycle through token {node}")
        for p in path:
            state[p] = 2
    return ParseTree(heads)


def build_adjacency(tree: ParseTree, directed: bool = False) -> np.ndarray:
    """0/1 adjacency with self-loops; undirected unless ``directed`` (head -> dependent row)."""
    n = tree.n
    adj = np.eye(n, dtype=DTYPE)
    for dep, head in enumerate(tree.heads):
        if head < 0:
            continue
        adj[head, dep] = 1.0
        if not directed:
            adj[dep, head] = 1.0
    return adj


def linear_chain_fallback(n: int) -> np.ndarray:
    if n < 1:
        raise DomainError("a chain needs at least one node")
    return build_adjacency(ParseTree(tuple(range(-1, n - 1))))


def normalize_rows(adj: np.ndarray) -> np.ndarray:
    """Divide each row by its degree (mean aggregation)."""
    return adj / adj.sum(axis=1, keepdims=True)


def is_connected(adj: np.ndarray) -> bool:
    n = adj.shape[0]
    seen = {0}
    frontier = [0]
    while frontier:
        i = frontier.pop()
        for j in np.flatnonzero(adj[i]):
            if j not in seen:
                seen.add(int(j))
                frontier.append(int(j))
    return len(seen) == n


def _parse_conllu(lines: list[str], source: str) -> list[ParseTree]:
    trees = []
    heads: list[int] = []
    start = None
    for lineno, raw in enumerate(lines + [""], start=1):
        line = raw.rstrip("\n")
        if not line.strip():
            if heads:
                try:
                    trees.append(parse_tree_from_heads(heads))
                except ParseFormatError as err:
                    raise ParseFormatError(f"{source}:{start}: {err}") from None
            heads = []
            continue
        if line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise ParseFormatError(f"{source}:{lineno}: expected 10 columns, got {len(cols)}")
        if "-" in cols[0] or "." in cols[0]:
            continue  # multiword ranges and empty nodes carry no head
        try:
            idx, head = int(cols[0]), int(cols[6])
        except ValueError:
            raise ParseFormatError(f"{source}:{lineno}: non-integer index or head") from None
        if idx != len(heads) + 1:
            raise ParseFormatError(f"{source}:{lineno}: token index {idx} out of sequence")
        if not heads:
            start = lineno
        heads.append(head - 1)
    return trees


def read_parses(path) -> list[ParseTree]:
    """Read a parse sidecar: head-index lines (``-1`` = root) or 10-column CoNLL-U."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    body = [ln for ln in lines if ln.strip() and not ln.startswith("#")]
    if body and "\t" in body[0] and len(body[0].split("\t")) == 10:
        return _parse_conllu(lines, str(path))
    trees = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip() or line.startswith("#"):
            continue
        try:
            trees.append(parse_tree_from_heads(int(tok) for tok in line.split()))
        except ValueError as err:
            raise ParseFormatError(f"{path}:{lineno}: {err}") from None
    return trees


def write_parses(path, trees) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for tree in trees:
            fh.write(" ".join(str(h) for h in tree.heads) + "\n")
