import json
import math

import numpy as np
import pytest

from hmgnn.data_eval import split_validation, synthetic_proximity_corpus
from hmgnn.features import build_vocab, random_embeddings
from hmgnn.model import ModelConfig
from hmgnn.numerics import DomainError
from hmgnn.training import (
    AdamState,
    TrainConfig,
    TrainingAbort,
    adam_step,
    build_model,
    evaluate,
    gradient_check,
    init_params,
    init_tensor,
    train,
)

from _helpers import small_example, small_model


def hand_adam(grads, theta=0.0, lr=0.001, l2=0.0, b1=0.9, b2=0.999, eps=1e-8):
    m = v = 0.0
    trajectory = []
    for t, g in enumerate(grads, start=1):
        g = g + 2 * l2 * theta
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        theta = theta - lr * (m / (1 - b1 ** t)) / (math.sqrt(v / (1 - b2 ** t)) + eps)
        trajectory.append((m, v, theta))
    return trajectory


def test_init_is_deterministic_and_biases_zero():
    cfg = ModelConfig(hidden=3)
    a, b = init_params(cfg, 9), init_params(cfg, 9)
    assert list(a) == list(b)
    assert all(a[k].tobytes() == b[k].tobytes() for k in a)
    assert all(not a[k].any() for k in a if k.endswith(".b"))
    assert not np.array_equal(init_params(cfg, 10)["gat.W"], a["gat.W"])
    assert np.all(np.abs(a["position"]) <= 0.01)
    assert np.all(np.abs(a["lstm.fwd.W"]) <= 1 / math.sqrt(400))


def test_classifier_init_moments():
    w = init_tensor("cls.W", (3, 3334), seed=0)
    assert abs(w.mean()) < 0.05 and abs(w.std() - 1.0) < 0.05


def test_adam_first_step():
    params = {"w": np.zeros(1)}
    adam_step(params, {"w": np.array([0.5])}, AdamState(), TrainConfig(l2=0.0))
    assert params["w"][0] == pytest.approx(-0.001, abs=1e-10)


def test_adam_fixpoint():
    params = {"w": np.array([0.3, -2.0])}
    state = AdamState()
    for _ in range(5):
        adam_step(params, {"w": np.zeros(2)}, state, TrainConfig(l2=0.0))
    assert params["w"].tolist() == [0.3, -2.0] and state.t == 5


@pytest.mark.parametrize("l2", [0.0, 1e-5])
def test_adam_two_step_trajectory(l2):
    params = {"w": np.zeros(1)}
    state = AdamState()
    cfg = TrainConfig(l2=l2)
    for g, (m, v, theta) in zip((0.5, 0.25), hand_adam([0.5, 0.25], l2=l2)):
        adam_step(params, {"w": np.array([g])}, state, cfg)
        assert abs(state.m["w"][0] - m) < 1e-12
        assert abs(state.v["w"][0] - v) < 1e-12
        assert abs(params["w"][0] - theta) < 1e-12


def test_adam_bias_is_not_decayed():
    params = {"x.b": np.ones(2), "x.W": np.ones(2)}
    adam_step(params, {"x.b": np.zeros(2), "x.W": np.zeros(2)}, AdamState(), TrainConfig(l2=0.1))
    assert params["x.b"].tolist() == [1.0, 1.0]
    assert np.all(params["x.W"] < 1.0)


def test_pure_l2_shrinks_norm(rng):
    params = {"w": rng.normal(size=6)}
    state = AdamState()
    norm = np.linalg.norm(params["w"])
    for _ in range(100):
        adam_step(params, {"w": np.zeros(6)}, state, TrainConfig())
        new = np.linalg.norm(params["w"])
        assert new < norm
        norm = new


def test_adam_rejects_non_finite_gradient():
    with pytest.raises(TrainingAbort, match="'bad'"):
        adam_step({"bad": np.zeros(1)}, {"bad": np.array([np.nan])}, AdamState(), TrainConfig())


def test_train_config_validation():
    for kwargs in ({"learning_rate": 0}, {"l2": -1}, {"beta1": 0.999, "beta2": 0.9}):
        with pytest.raises(DomainError):
            TrainConfig(**kwargs)


def test_one_epoch_one_example_is_one_step():
    model = small_model()
    result = train(model, [small_example(0)], TrainConfig(epochs=1))
    assert result.steps == 1 and len(result.log) == 1


def test_empty_dataset_rejected():
    with pytest.raises(DomainError):
        train(small_model(), [], TrainConfig())


def test_loss_on_repeated_example_is_non_increasing():
    model = small_model(seed=4)
    result = train(model, [small_example(4)], TrainConfig(epochs=50))
    losses = [rec.mean_loss for rec in result.log]
    assert all(b <= a + 1e-6 for a, b in zip(losses, losses[1:]))
    assert losses[-1] < losses[0]


def _synthetic_model(seed=0, hidden=4):
    corpus = synthetic_proximity_corpus(30, seed=seed)
    vocab = build_vocab(corpus)
    model = build_model(ModelConfig(hidden=hidden, word_dim=20, pos_dim=8, max_distance=20), vocab,
                        random_embeddings(vocab, 20, seed).vectors, seed)
    return model, corpus


def test_training_is_deterministic():
    logs = []
    for _ in range(2):
        model, corpus = _synthetic_model()
        logs.append(train(model, corpus, TrainConfig(epochs=3, seed=7)).log_text())
    assert logs[0] == logs[1]


def test_best_validation_epoch_is_restored():
    model, corpus = _synthetic_model(seed=1)
    tr, val = split_validation(corpus, 0.3, seed=1)
    result = train(model, tr, TrainConfig(epochs=6, seed=1), val)
    best = max(rec.val_acc for rec in result.log)
    assert result.log[result.best_epoch - 1].val_acc == best
    assert evaluate(model, val)["acc"] == best


def test_train_log_files(tmp_path):
    model, corpus = _synthetic_model()
    result = train(model, corpus, TrainConfig(epochs=2))
    result.write(tmp_path / "log.tsv", tmp_path / "summary.json")
    lines = (tmp_path / "log.tsv").read_text().splitlines()
    assert lines[0] == "epoch\tmean_loss\ttrain_acc\tval_acc"
    assert len(lines) == 3 and lines[1].split("\t")[0] == "1" and lines[1].endswith("\tNA")
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["best_epoch"] == 2 and len(summary["epochs"]) == 2


def test_gradient_check_default_small_model_passes():
    report = gradient_check(small_model(), small_example(0), 1e-4, max_coords=40)
    assert report.passed and set(report.errors) == set(small_model().params)


def test_gradient_check_vacuous_when_nothing_checked():
    report = gradient_check(small_model(), small_example(0), names=[])
    assert report.passed and report.errors == {}


def test_gradient_check_names_corrupted_tensor(monkeypatch):
    model = small_model()
    original = model.backward

    def corrupted(dprobs):
        grads = original(dprobs)
        grads["cls.b"] = -grads["cls.b"]
        return grads

    monkeypatch.setattr(model, "backward", corrupted)
    report = gradient_check(model, small_example(0), 1e-4, max_coords=20)
    assert report.failures == ["cls.b"]
    assert any(line.startswith("FAIL\tcls.b") for line in report.lines())
