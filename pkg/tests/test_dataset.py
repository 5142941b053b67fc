import hashlib

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from binscan.dataset import (
    LabeledSample,
    SplitPlan,
    balance,
    class_counts,
    ingest,
    manifest_lines,
    relabel,
    split,
)
from binscan.errors import EmptyClass, TooFewSamples


def make(counts: dict[str, int]):
    return [
        LabeledSample.from_bytes(f"{label}/{i:04d}", f"{label}-{i}".encode(), label)
        for label, n in counts.items()
        for i in range(n)
    ]


@pytest.fixture
def tree(tmp_path):
    (tmp_path / "benign").mkdir()
    (tmp_path / "mirai").mkdir()
    (tmp_path / "benign" / "b").write_bytes(b"bbb")
    (tmp_path / "benign" / "a").write_bytes(b"aa")
    (tmp_path / "mirai" / "c").write_bytes(b"c")
    return tmp_path


def test_ingest_layout(tree):
    samples = ingest(tree)
    assert [(s.id, s.label) for s in samples] == [("benign/a", "benign"), ("benign/b", "benign"), ("mirai/c", "mirai")]
    assert samples[0].digest == hashlib.sha256(b"aa").hexdigest()


def test_ingest_deterministic(tree):
    assert ingest(tree) == ingest(tree)


def test_empty_class(tree):
    (tree / "gafgyt").mkdir()
    with pytest.raises(EmptyClass, match="gafgyt"):
        ingest(tree)


def test_zero_byte_files_skipped(tree):
    (tree / "mirai" / "empty").write_bytes(b"")
    assert len(ingest(tree)) == 3


def test_balance_to_minimum():
    out = balance(make({"a": 200, "b": 122, "c": 150}), seed=1)
    assert class_counts(out) == {"a": 122, "b": 122, "c": 122}


def test_balance_identity_when_balanced():
    samples = make({"a": 5, "b": 5})
    assert balance(samples, seed=3) == samples


def test_balance_preserves_order_and_is_seeded():
    samples = make({"a": 50, "b": 10})
    one, two, other = balance(samples, 1), balance(samples, 1), balance(samples, 2)
    assert one == two
    assert one != other
    ids = [s.id for s in one]
    assert ids == sorted(ids)


@given(st.dictionaries(st.sampled_from("abcd"), st.integers(1, 30), min_size=1), st.integers(0, 2**40))
def test_balance_never_grows(counts, seed):
    out = class_counts(balance(make(counts), seed))
    assert set(out) == set(counts)
    assert len(set(out.values())) == 1
    assert all(out[k] <= counts[k] for k in counts)


def test_split_fifteen_per_class_regime():
    train, test = split(make({"benign": 122, "gafgyt": 122, "mirai": 122}), SplitPlan(seed=0, test_per_class=15))
    assert len(test) == 45 and len(train) == 321
    assert class_counts(test) == {"benign": 15, "gafgyt": 15, "mirai": 15}


def test_split_zero_test():
    samples = make({"a": 4, "b": 4})
    train, test = split(samples, SplitPlan(test_per_class=0))
    assert test == [] and train == samples


def test_split_too_few():
    with pytest.raises(TooFewSamples):
        split(make({"a": 15, "b": 20}), SplitPlan(test_per_class=15))


@settings(max_examples=100)
@given(st.integers(0, 2**63))
def test_split_disjoint(seed):
    samples = make({"a": 20, "b": 20, "c": 20})
    train, test = split(samples, SplitPlan(seed=seed, test_per_class=5))
    train_ids, test_ids = {s.id for s in train}, {s.id for s in test}
    assert not train_ids & test_ids
    assert train_ids | test_ids == {s.id for s in samples}


def test_rotations_have_disjoint_test_sets():
    samples = make({"a": 80, "b": 80, "c": 80})
    tests = [{s.id for s in split(samples, SplitPlan(seed=4, test_per_class=15, rotation=k))[1]} for k in range(5)]
    for i in range(5):
        assert len(tests[i]) == 45
        for j in range(i):
            assert not tests[i] & tests[j]


def test_rotation_beyond_class_size():
    with pytest.raises(TooFewSamples):
        split(make({"a": 40}), SplitPlan(test_per_class=15, rotation=2))


def test_manifest_format():
    samples = make({"benign": 2})
    lines = manifest_lines(samples[:1], samples[1:])
    assert lines[0] == f"train\tbenign\tbenign/0000\t{samples[0].digest}"
    assert lines[1].startswith("test\tbenign\tbenign/0001\t")
    assert all(len(line.split("\t")) == 4 for line in lines)


def test_relabel_folds_families():
    out = relabel(make({"benign": 1, "mirai": 1, "gafgyt": 1}), {"mirai": "malicious", "gafgyt": "malicious"})
    assert class_counts(out) == {"benign": 1, "malicious": 2}
