"""Train on a synthetic corpus where only word proximity reveals the label.

Each sentence has the right sentiment word next to the aspect and a
conflicting one a few tokens away. A model that uses relative position and
the parse should fit it within a handful of epochs.

Run: python3 demos/04_synthetic_training.py
"""
from hmgnn.data_eval import split_validation, synthetic_proximity_corpus
from hmgnn.features import LABELS, build_vocab, random_embeddings
from hmgnn.model import ModelConfig
from hmgnn.training import TrainConfig, build_model, evaluate, train

corpus = synthetic_proximity_corpus(90, seed=0)
print("sample:", " ".join(corpus[0].tokens), "| aspect:", corpus[0].aspect, "|", LABELS[corpus[0].label])

train_set, val_set = split_validation(corpus, 0.2, seed=0)
vocab = build_vocab(corpus)
model = build_model(ModelConfig(hidden=8), vocab, random_embeddings(vocab, 300, seed=0).vectors, seed=0)

result = train(model, train_set, TrainConfig(epochs=12, seed=0), val_set,
               callback=lambda rec: print(rec.line()))
print(f"best epoch {result.best_epoch}; validation metrics:", evaluate(model, val_set))
