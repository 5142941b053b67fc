"""Labeled sample ingestion, class balancing and train/test splitting."""
from __future__ import annotations

import hashlib
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .errors import EmptyClass, TooFewSamples, UnreadableFile
from .rng import STREAM_BALANCE, STREAM_SPLIT, Rng

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LabeledSample:
    id: str
    data: bytes = field(repr=False)
    label: str
    digest: str

    @classmethod
    def from_bytes(cls, id: str, data: bytes, label: str) -> "LabeledSample":
        if not data:
            raise ValueError(f"sample {id} is empty")
        return cls(id=id, data=data, label=label, digest=hashlib.sha256(data).hexdigest())


@dataclass(frozen=True)
class SplitPlan:
    """Per-class held-out selection.

    ``rotation`` picks the rotation-th block of ``test_per_class`` samples
    from one seeded per-class permutation, so test sets of different
    rotations never overlap.
    """

    seed: int = 0
    test_per_class: int = 15
    rotation: int = 0


def _iter_files(directory: Path):
    for path in sorted(directory.rglob("*"), key=lambda p: p.relative_to(directory).as_posix()):
        if path.is_file():
            yield path


def ingest(root) -> list[LabeledSample]:
    """One sample per file under ``root/<label>/``, ordered by relative path."""
    root = Path(root)
    if not root.is_dir():
        raise UnreadableFile(f"dataset root {root} is not a directory")
    samples = []
    for class_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        label = class_dir.name
        found = 0
        for path in _iter_files(class_dir):
            try:
                data = path.read_bytes()
            except OSError as exc:
                raise UnreadableFile(f"cannot read {path}: {exc}") from exc
            if not data:
                log.warning("skipping zero-byte file %s", path)
                continue
            samples.append(LabeledSample.from_bytes(path.relative_to(root).as_posix(), data, label))
            found += 1
        if not found:
            raise EmptyClass(label)
    return samples


def class_counts(samples) -> dict[str, int]:
    return dict(sorted(Counter(s.label for s in samples).items()))


def _by_class(samples) -> dict[str, list[int]]:
    groups: dict[str, list[int]] = {}
    for i, s in enumerate(samples):
        groups.setdefault(s.label, []).append(i)
    return dict(sorted(groups.items()))


def balance(samples, seed: int) -> list:
    """Downsample every class to the smallest class size.

    Removal is seeded and uniform; the surviving samples keep their original
    relative order.
    """
    groups = _by_class(samples)
    if not groups:
        return []
    target = min(len(idx) for idx in groups.values())
    rng = Rng.derive(seed, STREAM_BALANCE)
    keep = set()
    for idx in groups.values():
        if len(idx) == target:
            keep.update(idx)
        else:
            keep.update(idx[j] for j in rng.sample_prefix(len(idx), target))
    return [s for i, s in enumerate(samples) if i in keep]


def split(samples, plan: SplitPlan) -> tuple[list, list]:
    """Hold out ``plan.test_per_class`` samples of every class."""
    groups = _by_class(samples)
    k = plan.test_per_class
    lo, hi = plan.rotation * k, (plan.rotation + 1) * k
    rng = Rng.derive(plan.seed, STREAM_SPLIT)
    test_idx = set()
    for label, idx in groups.items():
        if len(idx) <= k or len(idx) < hi:
            raise TooFewSamples(
                f"class {label!r} has {len(idx)} samples; rotation {plan.rotation} "
                f"with {k} test samples per class needs at least {max(k + 1, hi)}"
            )
        # full permutation so the stream position never depends on the rotation
        order = rng.sample_prefix(len(idx), len(idx))
        test_idx.update(idx[j] for j in order[lo:hi])
    train = [s for i, s in enumerate(samples) if i not in test_idx]
    test = [s for i, s in enumerate(samples) if i in test_idx]
    return train, test


def relabel(samples, mapping: dict[str, str]) -> list:
    """Rename labels (e.g. fold malware families into one class)."""
    return [LabeledSample(s.id, s.data, mapping.get(s.label, s.label), s.digest) for s in samples]


def manifest_lines(train, test) -> list[str]:
    rows = [("train", s) for s in train] + [("test", s) for s in test]
    return [f"{part}\t{s.label}\t{s.id}\t{s.digest}" for part, s in rows]


def write_manifest(path, train, test) -> None:
    Path(path).write_text("".join(line + "\n" for line in manifest_lines(train, test)))
