"""Local filter: score files and escalate suspicious ones to a backend sink."""
from __future__ import annotations

import hashlib
import json
import logging
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import SinkWriteError, UnreadablePath
from .nn import Network, classify
from .trainer import classify_bytes

log = logging.getLogger(__name__)

ABSTRACT_BYTES = 4096
RECORD_KEYS = ("sha256", "size", "score", "class", "model", "ts")

DEFAULT_LABELS = {2: ["benign", "malicious"], 3: ["benign", "gafgyt", "mirai"]}


@dataclass(frozen=True)
class ScanPolicy:
    """Escalate every non-benign prediction, and benign ones with score >= tau_low."""

    tau_low: float = 0.5
    benign_index: int = 0
    include_abstract: bool = False


@dataclass(frozen=True)
class Verdict:
    sample_id: str
    predicted: str
    probs: tuple[float, ...]
    score: float
    escalate: bool
    sha256: str
    size: int
    abstract: bytes | None = None


def should_escalate(probs, policy: ScanPolicy) -> tuple[int, float, bool]:
    """(predicted index, score, escalate) for one probability vector."""
    probs = np.asarray(probs, dtype=np.float64)
    pred = classify(probs)
    score = min(1.0, max(0.0, 1.0 - float(probs[policy.benign_index])))
    escalate = pred != policy.benign_index or score >= policy.tau_low
    return pred, score, escalate


def scan_bytes(sample_id: str, data: bytes, model: Network, policy: ScanPolicy, labels) -> Verdict:
    probs, _ = classify_bytes(model, data, policy.benign_index)
    pred, score, escalate = should_escalate(probs, policy)
    return Verdict(
        sample_id=sample_id,
        predicted=labels[pred],
        probs=tuple(float(p) for p in probs),
        score=score,
        escalate=escalate,
        sha256=hashlib.sha256(data).hexdigest(),
        size=len(data),
        abstract=data[:ABSTRACT_BYTES] if policy.include_abstract else None,
    )


def _targets(path: Path) -> list[tuple[str, Path]]:
    if path.is_file():
        return [(path.name, path)]
    files = [p for p in path.rglob("*") if p.is_file()]
    return sorted(((p.relative_to(path).as_posix(), p) for p in files), key=lambda t: t[0])


def scan_path(path, model: Network, policy: ScanPolicy = ScanPolicy(), labels=None) -> list[Verdict]:
    """Classify every regular file under ``path`` in lexicographic order. Files are only read."""
    path = Path(path)
    if not path.exists():
        raise UnreadablePath(f"{path} does not exist")
    labels = list(labels or DEFAULT_LABELS[model.spec.classes])
    verdicts = []
    for sample_id, file in _targets(path):
        try:
            data = file.read_bytes()
        except OSError as exc:
            raise UnreadablePath(f"cannot read {file}: {exc}") from exc
        if not data:
            log.warning("skipping zero-byte file %s", file)
            continue
        verdicts.append(scan_bytes(sample_id, data, model, policy, labels))
    return verdicts


def escalation_record(verdict: Verdict, model_digest: str, ts: int | None = None) -> dict:
    record = {
        "sha256": verdict.sha256,
        "size": verdict.size,
        "score": verdict.score,
        "class": verdict.predicted,
        "model": model_digest,
        "ts": int(time.time()) if ts is None else ts,
    }
    if verdict.abstract is not None:
        record["abstract"] = verdict.abstract.hex()
    return record


def format_record(record: dict) -> str:
    return json.dumps(record, separators=(",", ":"))


def parse_record(line: str) -> dict:
    record = json.loads(line)
    keys = tuple(record)
    if keys[: len(RECORD_KEYS)] != RECORD_KEYS or len(keys) - len(RECORD_KEYS) > 1:
        raise ValueError(f"unexpected record keys {keys}")
    return record


_sink_lock = threading.Lock()


def emit_escalations(verdicts, sink, model_digest: str, ts: int | None = None) -> int:
    """Append one line per escalating verdict to ``sink``; the file is untouched if none escalate."""
    lines = [format_record(escalation_record(v, model_digest, ts)) + "\n" for v in verdicts if v.escalate]
    if not lines:
        return 0
    try:
        with _sink_lock, open(sink, "a", encoding="utf-8") as fh:
            fh.writelines(lines)
    except OSError as exc:
        raise SinkWriteError(f"cannot append to escalation sink {sink}: {exc}") from exc
    return len(lines)


def format_verdicts(verdicts) -> str:
    rows = ["id\tclass\tscore\tescalate\tprobs"]
    for v in verdicts:
        probs = ",".join(f"{p:.4f}" for p in v.probs)
        rows.append(f"{v.sample_id}\t{v.predicted}\t{v.score:.4f}\t{'yes' if v.escalate else 'no'}\t{probs}")
    return "\n".join(rows)
