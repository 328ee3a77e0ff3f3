"""The full pipeline: position-augmented inputs -> BiLSTM -> GAT -> GCN stack ->
aspect mask -> retrieval attention -> softmax classifier."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import checkpoint
from .features import MAX_DISTANCE, POS_DIM, WORD_DIM, Example, Vocab, compose_input, relative_distance
from .graph import ParseTree, build_adjacency, linear_chain_fallback, normalize_rows, parse_tree_from_heads
from .layers import (
    AspectMask,
    BiLSTM,
    Classifier,
    CrossEntropy,
    GraphAttention,
    GraphConvolution,
    RetrievalAttention,
    UsageError,
)
from .numerics import DEFAULT_LEAKY_SLOPE, DomainError


class InputError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    hidden: int = 300           # per-direction LSTM width H
    gat_dim: int | None = None  # d'; must equal 2H, defaults to it
    gcn_layers: int = 2
    max_distance: int = MAX_DISTANCE
    word_dim: int = WORD_DIM
    pos_dim: int = POS_DIM
    leaky_slope: float = DEFAULT_LEAKY_SLOPE
    normalize_adjacency: bool = False

    def __post_init__(self):
        if self.gat_dim is None:
            object.__setattr__(self, "gat_dim", 2 * self.hidden)
        if self.hidden < 1:
            raise DomainError("hidden must be positive")
        if self.gat_dim != 2 * self.hidden:
            raise DomainError(f"gat_dim must equal 2*hidden={2 * self.hidden}, got {self.gat_dim}")
        if not 1 <= self.gcn_layers <= 4:
            raise DomainError("gcn_layers must be between 1 and 4")
        if self.max_distance < 0 or self.word_dim < 1 or self.pos_dim < 1:
            raise DomainError("table sizes must be positive")
        if not 0.0 < self.leaky_slope < 1.0:
            raise DomainError("leaky_slope must lie in (0, 1)")

    @property
    def input_dim(self) -> int:
        return self.word_dim + self.pos_dim


def param_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Every trainable tensor, in registry order."""
    h, d, din = config.hidden, config.gat_dim, config.input_dim
    shapes = {"position": (config.max_distance + 1, config.pos_dim)}
    for side in ("fwd", "bwd"):
        shapes[f"lstm.{side}.W"] = (4 * h, din)
        shapes[f"lstm.{side}.U"] = (4 * h, h)
        shapes[f"lstm.{side}.b"] = (4 * h,)
    shapes["gat.W"] = (d, 2 * h)
    shapes["gat.a"] = (2 * d,)
    for layer in range(config.gcn_layers):
        shapes[f"gcn{layer}.W"] = (d, d)
        shapes[f"gcn{layer}.b"] = (d,)
    shapes["cls.W"] = (3, d)
    shapes["cls.b"] = (3,)
    return shapes


def is_bias(name: str) -> bool:
    return name.endswith(".b")


def adjacency_for(example: Example, tree=None, normalize: bool = False) -> np.ndarray:
    """Adjacency from ``tree`` (a ParseTree or head list), else ``example.heads``, else a chain."""
    n = len(example.tokens)
    if tree is None and example.heads is not None:
        tree = example.heads
    if tree is None:
        adj = linear_chain_fallback(n)
    else:
        if not isinstance(tree, ParseTree):
            tree = parse_tree_from_heads(tree)
        if tree.n != n:
            raise InputError(f"tree has {tree.n} nodes but example {example.id!r} has {n} tokens")
        adj = build_adjacency(tree)
    return normalize_rows(adj) if normalize else adj


class HybridGraphModel:
    """Aspect sentiment classifier over a dependency graph.

    ``params`` is the trainable registry (name -> array). The word table is
    frozen and kept apart from it.
    """

    def __init__(self, config: ModelConfig, vocab: Vocab, word_vectors: np.ndarray,
                 params: dict[str, np.ndarray]):
        shapes = param_shapes(config)
        if list(params) != list(shapes):
            raise DomainError(f"parameter registry mismatch: {sorted(set(params) ^ set(shapes))}")
        for name, shape in shapes.items():
            if params[name].shape != shape:
                raise DomainError(f"{name}: expected shape {shape}, got {params[name].shape}")
        if word_vectors.shape != (len(vocab), config.word_dim):
            raise DomainError(f"word table shape {word_vectors.shape} does not match vocab/config")
        self.config = config
        self.vocab = vocab
        self.word_vectors = word_vectors
        self.params = params
        self._lstm = BiLSTM()
        self._gat = GraphAttention(config.leaky_slope)
        self._gcn = [GraphConvolution() for _ in range(config.gcn_layers)]
        self._mask = AspectMask()
        self._attn = RetrievalAttention()
        self._cls = Classifier()
        self._loss = CrossEntropy()
        self._last = None

    def forward(self, example: Example, tree=None) -> np.ndarray:
        p = self.params
        adj = adjacency_for(example, tree, self.config.normalize_adjacency)
        x = compose_input(example, self.vocab, self.word_vectors, p["position"])
        h_lstm = self._lstm.forward(x, {k[5:]: v for k, v in p.items() if k.startswith("lstm.")})
        g = self._gat.forward(h_lstm, adj, p["gat.W"], p["gat.a"])
        for layer, gcn in enumerate(self._gcn):
            g = gcn.forward(g, adj, p[f"gcn{layer}.W"], p[f"gcn{layer}.b"])
        g = self._mask.forward(g, example.span)
        r = self._attn.forward(h_lstm, g, example.span)
        probs = self._cls.forward(r, p["cls.W"], p["cls.b"])
        self._last = example
        return probs

    def backward(self, dprobs) -> dict[str, np.ndarray]:
        """Gradients of the registry for the most recent ``forward``."""
        if self._last is None:
            raise UsageError("backward called before forward")
        grads = {}
        dr, g = self._cls.backward(dprobs)
        grads["cls.W"], grads["cls.b"] = g["W"], g["b"]
        (dh_lstm, dg), _ = self._attn.backward(dr)
        dg, _ = self._mask.backward(dg)
        for layer in reversed(range(len(self._gcn))):
            dg, g = self._gcn[layer].backward(dg)
            grads[f"gcn{layer}.W"], grads[f"gcn{layer}.b"] = g["W"], g["b"]
        dh_gat, g = self._gat.backward(dg)
        grads["gat.W"], grads["gat.a"] = g["W"], g["a"]
        dx, g = self._lstm.backward(dh_lstm + dh_gat)
        for k, v in g.items():
            grads[f"lstm.{k}"] = v
        dpos = np.zeros_like(self.params["position"])
        dist = relative_distance(self._last, self.config.max_distance)
        np.add.at(dpos, dist, dx[:, self.config.word_dim:])
        grads["position"] = dpos
        return {name: grads[name] for name in self.params}

    def loss_and_grads(self, example: Example, tree=None):
        """Cross-entropy loss, class probabilities and registry gradients for one example."""
        probs = self.forward(example, tree)
        loss = self._loss.forward(probs, example.label)
        dprobs, _ = self._loss.backward(1.0)
        return loss, probs, self.backward(dprobs)

    def loss(self, example: Example, tree=None) -> float:
        probs = self.forward(example, tree)
        return self._loss.forward(probs, example.label)

    def predict(self, example: Example, tree=None) -> int:
        return predict_label(self.forward(example, tree))

    # ------------------------------------------------------------ persistence

    def save(self, path) -> None:
        tensors = dict(self.params)
        tensors["embed.word"] = self.word_vectors
        checkpoint.write_checkpoint(
            path, tensors,
            config=asdict(self.config),
            vocab=self.vocab.itos,
            vocab_hash=self.vocab.digest(),
        )

    @classmethod
    def load(cls, path) -> "HybridGraphModel":
        header, tensors = checkpoint.read_checkpoint(path)
        try:
            config = ModelConfig(**header["config"])
            itos = header["vocab"]
            expected = header["vocab_hash"]
        except (KeyError, TypeError) as err:
            raise checkpoint.CheckpointError(f"{path}: missing or invalid model header ({err})") from None
        if itos[:2] != ["<pad>", "<unk>"]:
            raise checkpoint.CheckpointError(f"{path}: vocabulary lacks reserved entries")
        vocab = Vocab(itos[2:])
        if vocab.digest() != expected:
            raise checkpoint.CheckpointError(f"{path}: vocabulary hash mismatch")
        word_vectors = tensors.pop("embed.word")
        return cls(config, vocab, word_vectors, tensors)


def predict_label(probs) -> int:
    """Argmax with ties resolved towards the lowest class index."""
    return int(np.argmax(probs))
