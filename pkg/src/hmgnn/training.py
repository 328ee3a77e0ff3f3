"""Initialisation, Adam with coupled L2, the per-example training loop and gradient checking."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .data_eval import accuracy, confusion_matrix, macro_f1
from .features import Vocab
from .model import HybridGraphModel, ModelConfig, is_bias, param_shapes, predict_label
from .numerics import DomainError, finite_diff_grad, make_rng, relative_error


class TrainingAbort(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    l2: float = 0.00001
    epochs: int = 30
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    clip_norm: float | None = None

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise DomainError("learning_rate must be positive")
        if self.l2 < 0:
            raise DomainError("l2 must be non-negative")
        if not 0 < self.beta1 < self.beta2 < 1:
            raise DomainError("need 0 < beta1 < beta2 < 1")
        if self.epsilon <= 0 or self.epochs < 0:
            raise DomainError("epsilon must be positive and epochs non-negative")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise DomainError("clip_norm must be positive when set")


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


def init_params(config: ModelConfig, seed: int = 0) -> dict[str, np.ndarray]:
    """Draw every tensor from its own named stream so the draw order is irrelevant.

    Classifier weights ~ N(0, 1), biases zero, position table ~ U(-0.01, 0.01),
    everything else ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    """
    return {name: init_tensor(name, shape, seed) for name, shape in param_shapes(config).items()}


def init_tensor(name: str, shape: tuple, seed: int = 0) -> np.ndarray:
    if is_bias(name):
        return np.zeros(shape)
    rng = make_rng(seed, "init", name)
    if name == "cls.W":
        return rng.normal(0.0, 1.0, size=shape)
    if name == "position":
        return rng.uniform(-0.01, 0.01, size=shape)
    bound = 1.0 / math.sqrt(shape[-1])
    return rng.uniform(-bound, bound, size=shape)


def build_model(config: ModelConfig, vocab: Vocab, word_vectors: np.ndarray,
                seed: int = 0) -> HybridGraphModel:
    return HybridGraphModel(config, vocab, word_vectors, init_params(config, seed))


def adam_step(params: dict, grads: dict, state: AdamState, config: TrainConfig,
              decay=lambda name: not is_bias(name)) -> AdamState:
    """One bias-corrected Adam update, in place, with ``2 * l2 * theta`` added to decayed tensors."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise TrainingAbort(f"non-finite gradient in tensor {name!r}")
    if config.clip_norm is not None:
        norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
        scale = min(1.0, config.clip_norm / norm) if norm > 0 else 1.0
    else:
        scale = 1.0
    state.t += 1
    c1 = 1.0 - config.beta1 ** state.t
    c2 = 1.0 - config.beta2 ** state.t
    for name, g in grads.items():
        theta = params[name]
        g = g * scale
        if config.l2 and decay(name):
            g = g + 2.0 * config.l2 * theta
        if name not in state.m:
            state.m[name] = np.zeros_like(theta)
            state.v[name] = np.zeros_like(theta)
        m = state.m[name] = config.beta1 * state.m[name] + (1.0 - config.beta1) * g
        v = state.v[name] = config.beta2 * state.v[name] + (1.0 - config.beta2) * g * g
        theta -= config.learning_rate * (m / c1) / (np.sqrt(v / c2) + config.epsilon)
    return state


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    mean_loss: float
    train_acc: float
    val_acc: float | None = None

    def line(self) -> str:
        val = "NA" if self.val_acc is None else f"{self.val_acc:.6f}"
        return f"{self.epoch}\t{self.mean_loss:.10f}\t{self.train_acc:.6f}\t{val}"


@dataclass
class TrainResult:
    model: HybridGraphModel
    log: list[EpochRecord]
    best_epoch: int
    steps: int = 0

    def log_text(self) -> str:
        header = "epoch\tmean_loss\ttrain_acc\tval_acc\n"
        return header + "".join(rec.line() + "\n" for rec in self.log)

    def summary(self) -> dict:
        return {"best_epoch": self.best_epoch, "steps": self.steps,
                "epochs": [asdict(rec) for rec in self.log]}

    def write(self, log_path, summary_path) -> None:
        with open(log_path, "w", encoding="utf-8") as fh:
            fh.write(self.log_text())
        with open(summary_path, "w", encoding="utf-8") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def predict_all(model: HybridGraphModel, examples) -> list[int]:
    return [model.predict(ex) for ex in examples]


def train(model: HybridGraphModel, examples, config: TrainConfig, val_examples=None,
          callback=None) -> TrainResult:
    """Per-example Adam training over shuffled epochs.

    With ``val_examples`` the parameters of the best-validation epoch (first on
    ties) are restored at the end; otherwise the last epoch's are kept.
    ``callback(record)`` is called after each epoch.
    """
    examples = list(examples)
    if not examples:
        raise DomainError("cannot train on an empty dataset")
    val_examples = list(val_examples) if val_examples else None
    rng = make_rng(config.seed, "shuffle")
    state = AdamState()
    log = []
    best = (-1.0, 0, None)
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(examples))
        total_loss = 0.0
        correct = 0
        for idx in order:
            ex = examples[idx]
            loss, probs, grads = model.loss_and_grads(ex)
            if not math.isfinite(loss):
                raise TrainingAbort(f"non-finite loss on example {ex.id or idx!r}")
            total_loss += loss
            correct += predict_label(probs) == ex.label
            adam_step(model.params, grads, state, config)
        val_acc = None
        if val_examples:
            preds = predict_all(model, val_examples)
            val_acc = sum(p == ex.label for p, ex in zip(preds, val_examples)) / len(val_examples)
            if val_acc > best[0]:
                best = (val_acc, epoch, {k: v.copy() for k, v in model.params.items()})
        rec = EpochRecord(epoch, total_loss / len(examples), correct / len(examples), val_acc)
        log.append(rec)
        if callback is not None:
            callback(rec)
    best_epoch = len(log)
    if best[2] is not None:
        best_epoch = best[1]
        for name, arr in best[2].items():
            model.params[name][...] = arr
    return TrainResult(model, log, best_epoch, state.t)


@dataclass
class GradCheckReport:
    errors: dict[str, float]
    tolerance: float
    checked: dict[str, int] = field(default_factory=dict)

    @property
    def failures(self) -> list[str]:
        return [name for name, err in self.errors.items() if not err < self.tolerance]

    @property
    def passed(self) -> bool:
        return not self.failures

    def lines(self) -> list[str]:
        out = []
        for name, err in self.errors.items():
            status = "PASS" if err < self.tolerance else "FAIL"
            out.append(f"{status}\t{name}\t{err:.3e}\t{self.checked.get(name, 0)}")
        return out


def gradient_check(model: HybridGraphModel, example, tolerance: float = 1e-4, h: float = 1e-5,
                   names=None, max_coords: int | None = None, seed: int = 0) -> GradCheckReport:
    """Compare the model's analytic gradients with central differences, tensor by tensor.

    ``max_coords`` samples that many coordinates per tensor (seeded) instead of
    probing all of them.
    """
    names = list(model.params) if names is None else list(names)
    _, _, analytic = model.loss_and_grads(example)
    errors, checked = {}, {}
    for name in names:
        arr = model.params[name]
        flat_idx = np.arange(arr.size)
        if max_coords is not None and arr.size > max_coords:
            flat_idx = np.sort(make_rng(seed, "gradcheck", name).choice(arr.size, max_coords, replace=False))
        coords = np.unravel_index(flat_idx, arr.shape)
        saved = arr[coords].copy()

        def f(values, arr=arr, coords=coords):
            arr[coords] = values
            return model.loss(example)

        try:
            numeric = finite_diff_grad(f, saved, h)
        finally:
            arr[coords] = saved
        errors[name] = relative_error(analytic[name][coords], numeric)
        checked[name] = len(flat_idx)
    return GradCheckReport(errors, tolerance, checked)


def evaluate(model: HybridGraphModel, examples) -> dict:
    examples = list(examples)
    preds = predict_all(model, examples)
    golds = [ex.label for ex in examples]
    return {
        "acc": accuracy(preds, golds),
        "macro_f1": macro_f1(preds, golds),
        "confusion": confusion_matrix(preds, golds).tolist(),
        "n": len(examples),
    }
