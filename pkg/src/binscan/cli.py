"""Command line entry point: ``binscan {imagize,gen,train,scan,bench}``."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import corpusgen, dataset
from .errors import BinscanError, UnreadablePath
from .imagizer import GrayImage, bytes_to_image, image_to_pgm, resize_box, PLANE_SIDE
from .nn import load_model, save_model
from .scanner import DEFAULT_LABELS, ScanPolicy, emit_escalations, format_verdicts, scan_path
from .trainer import (
    TrainConfig,
    benchmark_inference,
    class_order,
    fit,
    format_latency_table,
)

log = logging.getLogger("binscan")

MALICIOUS = "malicious"


def _seed(value):
    if value is not None:
        return value
    env = os.environ.get("BINSCAN_SEED")
    return int(env) if env else 0


def _echo(args):
    items = {k: v for k, v in vars(args).items() if k != "func"}
    log.info("config %s", " ".join(f"{k}={v}" for k, v in sorted(items.items())))


def _files(path: Path):
    if path.is_file():
        return [(path.name, path)]
    if not path.is_dir():
        raise UnreadablePath(f"{path} does not exist")
    return sorted(((p.relative_to(path).as_posix(), p) for p in path.rglob("*") if p.is_file()), key=lambda t: t[0])


def cmd_imagize(args) -> int:
    src = Path(args.input)
    out = Path(args.output) if args.output else None
    if (args.pgm or args.plane) and out is None:
        raise BinscanError("--pgm/--plane need an output directory (-o)")
    written = 0
    for name, path in _files(src):
        data = path.read_bytes()
        if not data:
            log.warning("skipping zero-byte file %s", path)
            continue
        img = bytes_to_image(data)
        print(f"{name}\t{len(data)}\t{img.width}\t{img.height}")
        stem = name.replace("/", "__")
        if args.pgm:
            out.mkdir(parents=True, exist_ok=True)
            (out / f"{stem}.pgm").write_bytes(image_to_pgm(img))
            written += 1
        if args.plane:
            out.mkdir(parents=True, exist_ok=True)
            plane = resize_box(img, PLANE_SIDE, PLANE_SIDE)
            (out / f"{stem}.{PLANE_SIDE}.pgm").write_bytes(image_to_pgm(plane))
    log.info("wrote %d PGM images", written)
    return 0


def cmd_gen(args) -> int:
    seed = _seed(args.seed)
    if args.profile:
        profiles = [corpusgen.load_profile(p) for p in args.profile]
    else:
        profiles = [corpusgen.shipped_profile(n) for n in corpusgen.SHIPPED_PROFILES]
    for k, profile in enumerate(profiles):
        paths = corpusgen.generate(profile, args.count, seed + k, args.root)
        print(f"{profile.class_name}\t{profile.name}\t{len(paths)}\tseed={seed + k}")
    return 0


def _load_labeled(root, classes: int, benign: str):
    samples = dataset.ingest(root)
    labels = sorted({s.label for s in samples})
    if benign not in labels:
        raise BinscanError(f"dataset has no {benign!r} class directory (found {labels})")
    if classes == 2:
        samples = dataset.relabel(samples, {lab: MALICIOUS for lab in labels if lab != benign})
    elif len(labels) != 3:
        raise BinscanError(f"3-class training needs exactly 3 class directories, found {labels}")
    return samples


def _write_run(out: Path, net, report, train, test):
    out.mkdir(parents=True, exist_ok=True)
    save_model(net, out / "model.bimg")
    dataset.write_manifest(out / "manifest.tsv", train, test)
    (out / "report.txt").write_text(report.to_text())
    (out / "records.jsonl").write_text(report.records())
    (out / "timings.txt").write_text("".join(f"{k} {v:.3f}\n" for k, v in report.timings.items()))


def cmd_train(args) -> int:
    seed = _seed(args.seed)
    samples = _load_labeled(args.root, args.classes, args.benign)
    pre = dataset.class_counts(samples)
    balanced = dataset.balance(samples, seed)
    post = dataset.class_counts(balanced)
    classes = class_order(post, args.benign)
    out = Path(args.out)
    accuracies, mean_diags = [], []
    for k in range(args.rotations):
        plan = dataset.SplitPlan(seed=seed, test_per_class=args.test_per_class, rotation=k)
        train, test = dataset.split(balanced, plan)
        config = TrainConfig(
            iterations=args.iterations,
            batch_size=args.batch,
            learning_rate=args.lr,
            seed=seed + k,
            eval_every=args.eval_every,
        )
        log.info("rotation %d: %d train / %d test, %s", k, len(train), len(test), config.echo())
        net, report = fit(train, classes, config, eval_set=test or None)
        report.class_counts = {c: (pre[c], post[c]) for c in classes}
        run_dir = out if args.rotations == 1 else out / f"rotation_{k}"
        _write_run(run_dir, net, report, train, test)
        print(report.to_text(), end="")
        if report.confusion is not None:
            accuracies.append(100 * report.confusion.accuracy())
            mean_diags.append(report.confusion.mean_diagonal_rate())
    if args.rotations > 1 and accuracies:
        lines = [f"rotation {k} accuracy {a:.2f}% mean_diagonal {d:.2f}%" for k, (a, d) in enumerate(zip(accuracies, mean_diags))]
        lines.append(
            f"accuracy mean {np.mean(accuracies):.2f}% range {min(accuracies):.2f}-{max(accuracies):.2f}%"
        )
        lines.append(f"mean_diagonal mean {np.mean(mean_diags):.2f}%")
        summary = "\n".join(lines) + "\n"
        (out / "summary.txt").write_text(summary)
        print(summary, end="")
    return 0


def _labels_for(model, override):
    if override:
        labels = override.split(",")
        if len(labels) != model.spec.classes:
            raise BinscanError(f"--labels gives {len(labels)} names for a {model.spec.classes}-class model")
        return labels
    return DEFAULT_LABELS[model.spec.classes]


def cmd_scan(args) -> int:
    model = load_model(args.model)
    labels = _labels_for(model, args.labels)
    policy = ScanPolicy(tau_low=args.tau, include_abstract=args.abstract)
    verdicts = scan_path(args.path, model, policy, labels)
    print(format_verdicts(verdicts))
    n = emit_escalations(verdicts, args.sink, model.digest) if args.sink else sum(v.escalate for v in verdicts)
    log.info("%d of %d files escalated", n, len(verdicts))
    return 0


def cmd_bench(args) -> int:
    model = load_model(args.model)
    labels = _labels_for(model, args.labels)
    samples = dataset.ingest(args.root)
    if model.spec.classes == 2:
        samples = dataset.relabel(samples, {s.label: labels[1] for s in samples if s.label != labels[0]})
    samples = [s for s in samples if s.label in labels]
    result = benchmark_inference(model, samples, labels, repeats=args.repeats)
    print(format_latency_table(result))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="binscan", description="Grayscale-image CNN triage of binaries.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("imagize", help="convert binaries to grayscale images")
    p.add_argument("input")
    p.add_argument("-o", "--output")
    p.add_argument("--pgm", action="store_true", help="write the full-size image as PGM")
    p.add_argument("--plane", action="store_true", help="write the 64x64 network input as PGM")
    p.set_defaults(func=cmd_imagize)

    p = sub.add_parser("gen", help="generate a synthetic corpus")
    p.add_argument("root")
    p.add_argument("--count", type=int, default=120)
    p.add_argument("--seed", type=int)
    p.add_argument("--profile", action="append", help="profile file (repeatable); default: shipped profiles")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="balance, split, train and evaluate")
    p.add_argument("root")
    p.add_argument("--out", required=True)
    p.add_argument("--classes", type=int, choices=(2, 3), default=3)
    p.add_argument("--iterations", type=int, default=5000)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--seed", type=int)
    p.add_argument("--test-per-class", type=int, default=15)
    p.add_argument("--rotations", type=int, default=1)
    p.add_argument("--eval-every", type=int, default=250)
    p.add_argument("--benign", default="benign", help="name of the benign class directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("scan", help="score files and emit escalation records")
    p.add_argument("path")
    p.add_argument("--model", required=True)
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--sink")
    p.add_argument("--labels", help="comma-separated class names in model order")
    p.add_argument("--abstract", action="store_true", help="attach the first 4096 bytes (hex) to records")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("bench", help="per-class single-image latency")
    p.add_argument("root")
    p.add_argument("--model", required=True)
    p.add_argument("--labels")
    p.add_argument("--repeats", type=int, default=3)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if getattr(args, "seed", "absent") is None:
        args.seed = _seed(None)
    _echo(args)
    try:
        return args.func(args)
    except (BinscanError, OSError) as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
