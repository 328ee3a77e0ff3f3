"""Hybrid graph network for aspect-based sentiment classification, in NumPy."""
from .data_eval import (
    Dataset,
    accuracy,
    attach_parses,
    confusion_matrix,
    load_semeval,
    load_twitter,
    macro_f1,
    split_validation,
    synthetic_proximity_corpus,
)
from .features import LABELS, Example, Vocab, build_vocab, compose_input, load_embeddings, relative_distance
from .graph import ParseTree, build_adjacency, linear_chain_fallback, parse_tree_from_heads, read_parses
from .model import HybridGraphModel, ModelConfig, predict_label
from .numerics import finite_diff_grad, leaky_relu, make_rng, softmax_stable
from .training import TrainConfig, adam_step, build_model, evaluate, gradient_check, init_params, train

__version__ = "0.1.0"
