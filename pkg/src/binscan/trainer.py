"""Training loop, confusion-matrix evaluation and latency benchmark."""
from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyDataset, LabelMismatch, NonFiniteLoss
from .imagizer import bytes_to_image, imagize, resize_to_plane
from .nn import Adam, ModelSpec, Network, dumps_model, forward
from .rng import STREAM_BATCH, Rng

log = logging.getLogger(__name__)

SMOOTH_WINDOW = 50


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 5000
    batch_size: int = 32
    learning_rate: float = 1e-4
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    eval_every: int = 250

    def __post_init__(self):
        if self.iterations < 1 or self.batch_size < 1 or self.eval_every < 1:
            raise ValueError("iterations, batch_size and eval_every must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")

    def echo(self) -> str:
        return (
            f"iterations={self.iterations} batch_size={self.batch_size} "
            f"learning_rate={self.learning_rate!r} seed={self.seed} "
            f"optimizer=adam(beta1={self.beta1!r}, beta2={self.beta2!r}, eps={self.eps!r}) "
            f"eval_every={self.eval_every}"
        )


@dataclass
class ConfusionMatrix:
    """Rows are true classes, columns predicted classes."""

    classes: list[str]
    counts: np.ndarray

    @classmethod
    def empty(cls, classes) -> "ConfusionMatrix":
        return cls(list(classes), np.zeros((len(classes), len(classes)), dtype=np.int64))

    @classmethod
    def from_pairs(cls, classes, pairs) -> "ConfusionMatrix":
        cm = cls.empty(classes)
        for true, pred in pairs:
            cm.counts[true, pred] += 1
        return cm

    @classmethod
    def from_rates(cls, classes, rates_percent, per_row: int) -> "ConfusionMatrix":
        """Counts implied by percentage rows over ``per_row`` samples per class."""
        counts = np.rint(np.asarray(rates_percent, dtype=float) * per_row / 100.0).astype(np.int64)
        return cls(list(classes), counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def rates(self) -> np.ndarray:
        """Row-normalised percentages; empty rows stay zero."""
        rows = self.counts.sum(axis=1, keepdims=True)
        return np.divide(100.0 * self.counts, rows, out=np.zeros(self.counts.shape), where=rows > 0)

    def accuracy(self) -> float:
        return float(np.trace(self.counts)) / self.total if self.total else 0.0

    def mean_diagonal_rate(self) -> float:
        """Mean of the per-class recall percentages."""
        return float(np.mean(np.diag(self.rates())))

    def format(self) -> str:
        width = max(10, max(len(c) for c in self.classes) + 2)
        head = "true\\pred".ljust(width) + "".join(c.rjust(width) for c in self.classes)
        lines = [head]
        for name, row in zip(self.classes, self.rates()):
            lines.append(name.ljust(width) + "".join(f"{v:.2f}%".rjust(width) for v in row))
        return "\n".join(lines)


@dataclass
class TrainReport:
    config: TrainConfig
    classes: list[str]
    train_size: int
    test_size: int = 0
    eval_points: list[dict] = field(default_factory=list)
    losses: list[float] = field(default_factory=list, repr=False)
    confusion: ConfusionMatrix | None = None
    model_sha256: str = ""
    class_counts: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    @property
    def loss_first(self) -> float:
        return float(np.mean(self.losses[:SMOOTH_WINDOW]))

    @property
    def loss_last(self) -> float:
        return float(np.mean(self.losses[-SMOOTH_WINDOW:]))

    def to_text(self) -> str:
        """Deterministic report; wall-clock timings are kept out of it."""
        spec = ModelSpec(classes=len(self.classes))
        lines = [
            "binscan training report",
            f"config {self.config.echo()}",
            f"classes {','.join(self.classes)}",
        ]
        for label, (pre, post) in self.class_counts.items():
            lines.append(f"count {label} ingested={pre} balanced={post}")
        lines.append("architecture")
        lines += [f"  {row}" for row in spec.describe()]
        lines += [
            f"parameters {spec.param_count()}",
            f"train_samples {self.train_size}",
            f"test_samples {self.test_size}",
            "eval iteration loss train_acc test_acc",
        ]
        for p in self.eval_points:
            test_acc = "-" if p["test_acc"] is None else f"{p['test_acc']:.4f}"
            lines.append(f"  {p['iteration']} {p['loss']:.6f} {p['train_acc']:.4f} {test_acc}")
        lines.append(f"loss_smoothed first={self.loss_first:.6f} last={self.loss_last:.6f}")
        if self.confusion is not None:
            lines.append("confusion (rows=true, columns=predicted)")
            lines.append(self.confusion.format())
            lines.append(f"accuracy {100 * self.confusion.accuracy():.2f}%")
            lines.append(f"mean_diagonal {self.confusion.mean_diagonal_rate():.2f}%")
        lines.append(f"model_sha256 {self.model_sha256}")
        return "\n".join(lines) + "\n"

    def records(self) -> str:
        return "".join(json.dumps(p, sort_keys=True) + "\n" for p in self.eval_points)


def class_order(labels, benign: str = "benign") -> list[str]:
    """Benign class first, then the others sorted."""
    labels = set(labels)
    if benign not in labels:
        raise LabelMismatch(f"benign class {benign!r} not among labels {sorted(labels)}")
    return [benign] + sorted(labels - {benign})


def planes_for(samples) -> np.ndarray:
    return np.stack([imagize(s.data) for s in samples]) if samples else np.zeros((0, 64, 64))


def _label_indices(samples, classes) -> np.ndarray:
    index = {c: i for i, c in enumerate(classes)}
    try:
        return np.array([index[s.label] for s in samples], dtype=np.int64)
    except KeyError as exc:
        raise LabelMismatch(f"sample label {exc.args[0]!r} not in model classes {classes}") from exc


class _BatchStream:
    """Fixed-size batches over reshuffled epochs; a batch may straddle epochs."""

    def __init__(self, n: int, batch_size: int, seed: int):
        self.n = n
        self.batch_size = batch_size
        self.rng = Rng.derive(seed, STREAM_BATCH)
        self.order: list[int] = []
        self.pos = 0

    def next(self) -> np.ndarray:
        out = []
        while len(out) < self.batch_size:
            if self.pos == len(self.order):
                self.order = self.rng.shuffle(range(self.n))
                self.pos = 0
            take = min(self.batch_size - len(out), len(self.order) - self.pos)
            out.extend(self.order[self.pos:self.pos + take])
            self.pos += take
        return np.array(out, dtype=np.int64)


def _predict(model: Network, planes: np.ndarray, chunk: int = 64) -> np.ndarray:
    if len(planes) == 0:
        return np.zeros((0, model.spec.classes))
    return np.concatenate([model.predict_proba(planes[i:i + chunk]) for i in range(0, len(planes), chunk)])


def fit(train, classes, config: TrainConfig = TrainConfig(), eval_set=None):
    """Train a fresh network on ``train`` (LabeledSamples).

    Returns ``(network, report)``. ``eval_set`` samples, when given, are
    scored at every eval point and in the final confusion matrix.
    """
    if not train:
        raise EmptyDataset("training set is empty")
    classes = list(classes)
    t0 = time.perf_counter()
    x = planes_for(train)
    y = _label_indices(train, classes)
    x_eval = planes_for(eval_set) if eval_set else None
    y_eval = _label_indices(eval_set, classes) if eval_set else None
    t1 = time.perf_counter()

    net = Network.initialize(ModelSpec(classes=len(classes)), config.seed)
    opt = Adam(config.learning_rate, config.beta1, config.beta2, config.eps)
    batches = _BatchStream(len(train), config.batch_size, config.seed)
    report = TrainReport(config=config, classes=classes, train_size=len(train), test_size=len(eval_set or []))
    window_loss, window_correct, window_seen = 0.0, 0, 0
    for it in range(1, config.iterations + 1):
        idx = batches.next()
        loss, probs, grads = net.loss_and_grads(x[idx], y[idx])
        if not np.isfinite(loss):
            snapshot = {
                "iteration": it,
                "batch": [train[i].id for i in idx],
                "param_norms": {k: float(np.linalg.norm(v)) for k, v in net.params.items()},
            }
            raise NonFiniteLoss(f"loss became {loss} at iteration {it}", snapshot)
        opt.step(net.params, grads)
        report.losses.append(loss)
        window_loss += loss
        window_correct += int(np.sum(np.argmax(probs, axis=1) == y[idx]))
        window_seen += len(idx)
        if it % config.eval_every == 0 or it == config.iterations:
            steps = it - (report.eval_points[-1]["iteration"] if report.eval_points else 0)
            test_acc = None
            if x_eval is not None:
                test_acc = float(np.mean(np.argmax(_predict(net, x_eval), axis=1) == y_eval))
            report.eval_points.append({
                "iteration": it,
                "loss": window_loss / steps,
                "train_acc": window_correct / window_seen,
                "test_acc": test_acc,
            })
            log.info("iter %d loss %.5f train_acc %.3f test_acc %s", it, window_loss / steps,
                     window_correct / window_seen, test_acc)
            window_loss, window_correct, window_seen = 0.0, 0, 0
    t2 = time.perf_counter()
    if config.iterations >= 2 * SMOOTH_WINDOW and not report.loss_last < report.loss_first:
        log.warning("smoothed training loss did not decrease (%.5f -> %.5f)", report.loss_first, report.loss_last)

    if eval_set:
        report.confusion = evaluate(net, eval_set, classes)
    report.model_sha256 = hashlib.sha256(dumps_model(net)).hexdigest()
    report.timings = {"imagize": t1 - t0, "train": t2 - t1, "evaluate": time.perf_counter() - t2}
    return net, report


def evaluate(model: Network, samples, classes) -> ConfusionMatrix:
    classes = list(classes)
    if len(classes) != model.spec.classes:
        raise LabelMismatch(f"model has {model.spec.classes} classes, got labels {classes}")
    y = _label_indices(samples, classes)
    pred = np.argmax(_predict(model, planes_for(samples)), axis=1)
    return ConfusionMatrix.from_pairs(classes, zip(y.tolist(), pred.tolist()))


def classify_bytes(model: Network, data: bytes, benign_index: int = 0):
    """Imagize and classify one binary; returns (probs, score)."""
    plane = resize_to_plane(bytes_to_image(data))
    return forward(model, plane, benign_index)


def benchmark_inference(model: Network, samples, classes, repeats: int = 1) -> dict[str, float]:
    """Mean seconds per single-image classification (imagization included), per class."""
    classes = list(classes)
    per_class: dict[str, list[float]] = {c: [] for c in classes}
    for s in samples:
        if s.label not in per_class:
            raise LabelMismatch(f"sample label {s.label!r} not in {classes}")
        for _ in range(repeats):
            t = time.perf_counter()
            classify_bytes(model, s.data)
            per_class[s.label].append(time.perf_counter() - t)
    result = {}
    for c in classes:
        if not per_class[c]:
            log.warning("no samples for class %s; omitted from benchmark", c)
            continue
        result[c] = float(np.mean(per_class[c]))
    return result


def format_latency_table(result: dict[str, float]) -> str:
    names = list(result)
    width = max([12] + [len(n) + 2 for n in names])
    head = "Class".ljust(34) + "".join(n.rjust(width) for n in names)
    row = "Time consumption in second".ljust(34) + "".join(f"{result[n]:.4f}".rjust(width) for n in names)
    return head + "\n" + row
