"""Synthetic byte corpora with per-family segment layouts.

Profile files are line oriented::

    # comment
    name miraish
    class mirai
    size 12288 20480
    segment 0.2 constant 0
    segment 0.6 uniform 0 255
    segment 0.2 mixture 0.7 0 0 255

``mixture <p> <v> <lo> <hi>`` emits the constant ``v`` with probability
``p`` and otherwise a uniform byte in [lo, hi]. ``class`` (the output
directory) defaults to the profile name.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import InvalidProfile
from .rng import STREAM_CORPUS, Rng

SHIPPED_PROFILES = ("goodish", "gafgytish", "miraish")


@dataclass(frozen=True)
class Uniform:
    lo: int
    hi: int


@dataclass(frozen=True)
class Constant:
    value: int


@dataclass(frozen=True)
class Mixture:
    p_constant: float
    constant: Constant
    uniform: Uniform


@dataclass(frozen=True)
class Segment:
    fraction: float
    source: Uniform | Constant | Mixture


@dataclass(frozen=True)
class FamilyProfile:
    name: str
    min_size: int
    max_size: int
    segments: tuple[Segment, ...]
    label: str | None = None

    def __post_init__(self):
        validate(self)

    @property
    def class_name(self) -> str:
        return self.label or self.name


def _check_byte(v: int, what: str):
    if not 0 <= v <= 255:
        raise InvalidProfile(f"{what} {v} outside 0..255")


def _check_source(src):
    if isinstance(src, Constant):
        _check_byte(src.value, "constant")
    elif isinstance(src, Uniform):
        _check_byte(src.lo, "uniform lo")
        _check_byte(src.hi, "uniform hi")
        if src.lo > src.hi:
            raise InvalidProfile(f"uniform range {src.lo}..{src.hi} is empty")
    elif isinstance(src, Mixture):
        if not 0.0 <= src.p_constant <= 1.0:
            raise InvalidProfile(f"mixture probability {src.p_constant} outside [0, 1]")
        _check_source(src.constant)
        _check_source(src.uniform)
    else:
        raise InvalidProfile(f"unknown byte source {src!r}")


def validate(profile: FamilyProfile) -> None:
    if profile.min_size < 64:
        raise InvalidProfile(f"minimum size {profile.min_size} is below 64 bytes")
    if profile.max_size < profile.min_size:
        raise InvalidProfile("maximum size is below minimum size")
    if not profile.segments:
        raise InvalidProfile("profile has no segments")
    total = math.fsum(s.fraction for s in profile.segments)
    if abs(total - 1.0) > 1e-9:
        raise InvalidProfile(f"segment fractions sum to {total}, not 1")
    for seg in profile.segments:
        if seg.fraction < 0:
            raise InvalidProfile("negative segment fraction")
        _check_source(seg.source)


def _parse_source(kind: str, args: list[str], lineno: int):
    try:
        if kind == "constant" and len(args) == 1:
            return Constant(int(args[0]))
        if kind == "uniform" and len(args) == 2:
            return Uniform(int(args[0]), int(args[1]))
        if kind == "mixture" and len(args) == 4:
            return Mixture(float(args[0]), Constant(int(args[1])), Uniform(int(args[2]), int(args[3])))
    except ValueError as exc:
        raise InvalidProfile(f"line {lineno}: {exc}") from exc
    raise InvalidProfile(f"line {lineno}: bad {kind!r} descriptor {' '.join(args)!r}")


def parse_profile(text: str, default_name: str = "profile") -> FamilyProfile:
    name, label, size, segments = default_name, None, None, []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, *args = line.split()
        if key == "name" and len(args) == 1:
            name = args[0]
        elif key == "class" and len(args) == 1:
            label = args[0]
        elif key == "size" and len(args) == 2:
            try:
                size = (int(args[0]), int(args[1]))
            except ValueError as exc:
                raise InvalidProfile(f"line {lineno}: {exc}") from exc
        elif key == "segment" and len(args) >= 2:
            try:
                fraction = float(args[0])
            except ValueError as exc:
                raise InvalidProfile(f"line {lineno}: {exc}") from exc
            segments.append(Segment(fraction, _parse_source(args[1], args[2:], lineno)))
        else:
            raise InvalidProfile(f"line {lineno}: cannot parse {raw.strip()!r}")
    if size is None:
        raise InvalidProfile("profile is missing a 'size <min> <max>' line")
    return FamilyProfile(name=name, min_size=size[0], max_size=size[1], segments=tuple(segments), label=label)


def format_profile(profile: FamilyProfile) -> str:
    lines = [f"name {profile.name}"]
    if profile.label:
        lines.append(f"class {profile.label}")
    lines.append(f"size {profile.min_size} {profile.max_size}")
    for seg in profile.segments:
        src = seg.source
        if isinstance(src, Constant):
            desc = f"constant {src.value}"
        elif isinstance(src, Uniform):
            desc = f"uniform {src.lo} {src.hi}"
        else:
            desc = f"mixture {src.p_constant!r} {src.constant.value} {src.uniform.lo} {src.uniform.hi}"
        lines.append(f"segment {seg.fraction!r} {desc}")
    return "\n".join(lines) + "\n"


def load_profile(path) -> FamilyProfile:
    path = Path(path)
    return parse_profile(path.read_text(), default_name=path.stem)


def shipped_profile(name: str) -> FamilyProfile:
    if name not in SHIPPED_PROFILES:
        raise InvalidProfile(f"no shipped profile named {name!r}")
    text = resources.files("binscan.profiles").joinpath(f"{name}.profile").read_text()
    return parse_profile(text, default_name=name)


def segment_lengths(profile: FamilyProfile, size: int) -> list[int]:
    """Split ``size`` bytes by cumulative fraction boundaries (floored)."""
    bounds, acc = [0], 0.0
    for seg in profile.segments[:-1]:
        acc += seg.fraction
        bounds.append(min(size, int(math.floor(acc * size))))
    bounds.append(size)
    return [b - a for a, b in zip(bounds, bounds[1:])]


def _draw(rng: Rng, src, n: int) -> np.ndarray:
    if n == 0:
        return np.zeros(0, dtype=np.uint8)
    if isinstance(src, Constant):
        return np.full(n, src.value, dtype=np.uint8)
    if isinstance(src, Uniform):
        return (src.lo + rng.below_array(n, src.hi - src.lo + 1)).astype(np.uint8)
    use_const = rng.random_array(n) < src.p_constant
    values = _draw(rng, src.uniform, n)
    values[use_const] = src.constant.value
    return values


def generate_bytes(profile: FamilyProfile, rng: Rng) -> bytes:
    size = profile.min_size + rng.below(profile.max_size - profile.min_size + 1)
    parts = [_draw(rng, seg.source, n) for seg, n in zip(profile.segments, segment_lengths(profile, size))]
    return np.concatenate(parts).tobytes()


def generate_samples(profile: FamilyProfile, count: int, seed: int) -> list[bytes]:
    validate(profile)
    rng = Rng.derive(seed, STREAM_CORPUS)
    return [generate_bytes(profile, rng) for _ in range(count)]


def generate(profile: FamilyProfile, count: int, seed: int, root) -> list[Path]:
    """Write ``count`` files to ``root/<class>/``; returns the paths written."""
    out_dir = Path(root) / profile.class_name
    out_dir.mkdir(parents=True, exist_ok=True)
    width = max(4, len(str(count - 1)))
    paths = []
    for i, blob in enumerate(generate_samples(profile, count, seed)):
        path = out_dir / f"{profile.name}_{i:0{width}d}.bin"
        path.write_bytes(blob)
        paths.append(path)
    return paths


def generate_default_corpus(root, count: int, seed: int) -> dict[str, list[Path]]:
    """All shipped profiles, each with its own derived seed."""
    return {
        name: generate(shipped_profile(name), count, seed + k, root)
        for k, name in enumerate(SHIPPED_PROFILES)
    }
