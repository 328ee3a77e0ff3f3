"""Compare hand-written backward passes with central finite differences.

Run: python3 demos/03_gradient_check.py
"""
from hmgnn.features import Example, Vocab, random_embeddings
from hmgnn.model import ModelConfig
from hmgnn.training import build_model, gradient_check

tokens = ("the", "food", "was", "great")
vocab = Vocab(tokens)
config = ModelConfig(hidden=3)  # d' = 6, two GCN layers
model = build_model(config, vocab, random_embeddings(vocab, config.word_dim, seed=1).vectors, seed=0)
example = Example(tokens, (1, 2), 2, heads=(1, 2, -1, 2))

report = gradient_check(model, example, tolerance=1e-4, max_coords=40)
for line in report.lines():
    print(line)
