import logging

import numpy as np
import pytest

from binscan.dataset import LabeledSample, ingest
from binscan.errors import EmptyDataset, LabelMismatch, NonFiniteLoss
from binscan.nn import Network, ModelSpec, dumps_model
from binscan.trainer import (
    ConfusionMatrix,
    TrainConfig,
    benchmark_inference,
    class_order,
    evaluate,
    fit,
    format_latency_table,
)


def scripted_samples(model_cls, rows):
    """rows[true][pred] = count -> LabeledSamples whose scripted prediction is pred."""
    names = ["benign", "gafgyt", "mirai"][: len(rows)] if len(rows) == 3 else ["benign", "malicious"]
    out = []
    for t, row in enumerate(rows):
        for p, n in enumerate(row):
            for i in range(n):
                out.append(LabeledSample.from_bytes(f"{t}/{p}/{i}", model_cls.payload(p), names[t]))
    return out, names


def test_two_class_counts(scripted_model):
    model = scripted_model(2)
    samples, names = scripted_samples(scripted_model, [[14, 1], [1, 14]])
    cm = evaluate(model, samples, names)
    assert cm.counts.tolist() == [[14, 1], [1, 14]]
    assert np.allclose(cm.rates(), [[93.33333, 6.66667], [6.66667, 93.33333]], atol=1e-4)
    assert cm.accuracy() == pytest.approx(28 / 30)
    assert cm.total == 30


def test_perfect_and_constant_classifiers(scripted_model):
    model = scripted_model(3)
    samples, names = scripted_samples(scripted_model, [[5, 0, 0], [0, 5, 0], [0, 0, 5]])
    cm = evaluate(model, samples, names)
    assert cm.counts.tolist() == (5 * np.eye(3, dtype=int)).tolist()
    assert cm.accuracy() == 1.0
    samples, _ = scripted_samples(scripted_model, [[5, 0, 0], [5, 0, 0], [5, 0, 0]])
    cm = evaluate(model, samples, names)
    assert cm.counts[:, 0].tolist() == [5, 5, 5]
    assert cm.accuracy() == pytest.approx(1 / 3)


def test_rates_rows_sum_to_100():
    cm = ConfusionMatrix(["a", "b", "c"], np.array([[3, 1, 0], [0, 0, 0], [2, 2, 7]]))
    rates = cm.rates()
    assert rates[0].sum() == pytest.approx(100.0, abs=0.01)
    assert rates[2].sum() == pytest.approx(100.0, abs=0.01)
    assert rates[1].tolist() == [0, 0, 0]


def test_format_orientation():
    cm = ConfusionMatrix(["benign", "malicious"], np.array([[71, 4], [5, 70]]))
    text = cm.format().splitlines()
    assert text[1].split() == ["benign", "94.67%", "5.33%"]
    assert text[2].split() == ["malicious", "6.67%", "93.33%"]


def test_label_mismatch(scripted_model):
    samples = [LabeledSample.from_bytes("x", b"abc", "other")]
    with pytest.raises(LabelMismatch):
        evaluate(scripted_model(2), samples, ["benign", "malicious"])
    with pytest.raises(LabelMismatch):
        evaluate(scripted_model(2), samples, ["a", "b", "c"])


def test_class_order():
    assert class_order({"mirai", "gafgyt", "benign"}) == ["benign", "gafgyt", "mirai"]
    assert class_order({"zz", "goodware"}, benign="goodware") == ["goodware", "zz"]
    with pytest.raises(LabelMismatch):
        class_order({"a", "b"})


def test_fit_empty():
    with pytest.raises(EmptyDataset):
        fit([], ["benign", "malicious"], TrainConfig(iterations=1))


def test_fit_nonfinite_loss_aborts():
    samples = [LabeledSample.from_bytes(f"{i}", bytes([i * 40]) * 500, lab) for i, lab in enumerate(["benign", "malicious"] * 2)]
    with pytest.raises(NonFiniteLoss) as info:
        fit(samples, ["benign", "malicious"], TrainConfig(iterations=50, batch_size=4, learning_rate=1e200))
    assert "param_norms" in info.value.snapshot
    assert info.value.snapshot["iteration"] >= 1


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(iterations=0)
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0)
    assert TrainConfig() == TrainConfig(iterations=5000, batch_size=32, learning_rate=1e-4)


def test_fit_deterministic_and_reported(small_corpus):
    samples = ingest(small_corpus)
    classes = ["benign", "gafgyt", "mirai"]
    config = TrainConfig(iterations=6, batch_size=8, seed=2, eval_every=3)
    net_a, rep_a = fit(samples[::2], classes, config, eval_set=samples[1::2])
    net_b, rep_b = fit(samples[::2], classes, config, eval_set=samples[1::2])
    assert dumps_model(net_a) == dumps_model(net_b)
    assert rep_a.to_text() == rep_b.to_text()
    assert rep_a.records() == rep_b.records()
    assert [p["iteration"] for p in rep_a.eval_points] == [3, 6]
    assert rep_a.confusion.total == len(samples[1::2])
    assert "model_sha256" in rep_a.to_text() and "timings" not in rep_a.to_text()
    assert set(rep_a.timings) == {"imagize", "train", "evaluate"}


def test_benchmark_omits_empty_class(small_corpus, caplog):
    net = Network.initialize(ModelSpec(3), seed=0)
    samples = [s for s in ingest(small_corpus) if s.label != "gafgyt"][:4]
    with caplog.at_level(logging.WARNING):
        result = benchmark_inference(net, samples, ["benign", "gafgyt", "mirai"])
    assert "gafgyt" not in result
    assert "gafgyt" in caplog.text
    assert all(np.isfinite(v) and v > 0 for v in result.values())
    table = format_latency_table(result)
    assert table.splitlines()[1].startswith("Time consumption in second")
