"""Synthetic square-pattern datasets, corruption transforms, and file I/O.

Samples are flattened side x side images built from per-class smooth random
templates.  Corruptions mirror common image perturbations at five severity
levels; severity 0 is always a bit-exact identity.

The dataset file format is, all little-endian:

    bytes 0..7    magic ``SOUPDATA``
    bytes 8..11   format version, u32 (currently 1)
    bytes 12..19  header length in bytes, u64
    header        UTF-8 JSON (n, input_dim, num_classes, has_labels,
                  corruption, split, source, seed)
    payload       float32 inputs row-major, then int32 labels if present
"""

from __future__ import annotations

import dataclasses
import json
import math
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import uniform_filter

from .errors import (
    BadMagic,
    EmptySplitWarning,
    HeaderMismatch,
    NotSquare,
    Unsupported,
    UnsupportedVersion,
)
from .seeding import make_rng

DATA_MAGIC = b"SOUPDATA"
DATA_FORMAT_VERSION = 1

SPLITS = ("train", "val", "test")

# Severity tables, severity 1..5.  Severity 0 is identity for every kind.
NOISE_SIGMA = (0.05, 0.1, 0.2, 0.35, 0.5)
BLUR_HALF_WIDTH = (1, 1, 2, 2, 3)  # kernel is (2s+1) x (2s+1)
CONTRAST_SCALE = (0.75, 0.5, 0.4, 0.3, 0.2)
PIXELATE_BLOCK = (2, 2, 4, 4, 8)

CORRUPTION_KINDS = ("gaussian_noise", "box_blur", "contrast", "pixelate")


def _coerce_inputs(inputs: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(inputs, dtype=np.float32)
    if arr.ndim != 2:
        raise Unsupported(f"inputs must be 2-D (n, input_dim), got shape {arr.shape}")
    return arr


@dataclass
class LabeledDataset:
    inputs: np.ndarray
    labels: np.ndarray
    num_classes: int
    corruption: str | None = None
    split: str = "train"
    source: str = ""
    seed: int = 0

    def __post_init__(self):
        self.inputs = _coerce_inputs(self.inputs)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int32)
        if self.labels.ndim != 1 or self.labels.shape[0] != self.inputs.shape[0]:
            raise Unsupported("labels must be 1-D and aligned with inputs")
        if self.num_classes < 2:
            raise Unsupported("need at least 2 classes")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise Unsupported("labels out of range")
        if self.split not in SPLITS:
            raise Unsupported(f"split must be one of {SPLITS}, got {self.split!r}")

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[1]

    def unlabeled(self) -> "UnlabeledDataset":
        return UnlabeledDataset(
            inputs=self.inputs,
            corruption=self.corruption,
            source=self.source,
            seed=self.seed,
        )


@dataclass
class UnlabeledDataset:
    inputs: np.ndarray
    corruption: str | None = None
    source: str = ""
    seed: int = 0

    def __post_init__(self):
        self.inputs = _coerce_inputs(self.inputs)

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[1]


def class_templates(num_classes: int, side: int, rng: np.random.Generator) -> np.ndarray:
    """Standardized per-class templates on the side x side torus.

    Class c is a single planar cosine wave at a frequency unique to that
    class, with a random phase.  Distinct integer frequencies stay exactly
    orthogonal under any circular shift, so shifted samples of one class
    never drift toward another class's template; lower class indices get
    lower frequencies and are therefore the most shift-tolerant.
    """
    reps: list[tuple[int, int]] = []
    r = 1
    while len(reps) < num_classes:
        reps = [
            (fx, fy)
            for fx in range(0, r + 1)
            for fy in range(-r, r + 1)
            if (fx, fy) != (0, 0) and (fx > 0 or fy > 0)
        ]
        reps.sort(key=lambda f: (f[0] ** 2 + f[1] ** 2, f[0], abs(f[1]), -f[1]))
        r += 1
    yy, xx = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
    out = np.empty((num_classes, side, side))
    for c in range(num_classes):
        fx, fy = reps[c]
        phase = rng.uniform(0.0, 2.0 * np.pi)
        t = np.cos(2.0 * np.pi * (fx * yy + fy * xx) / side + phase)
        out[c] = (t - t.mean()) / t.std()
    return out


def gen_patterns(
    num_classes: int,
    num_samples: int,
    side: int,
    seed: int,
    noise_sigma: float = 0.1,
    max_shift: int | None = None,
    split: str = "train",
    source: str = "gen_patterns",
) -> LabeledDataset:
    """Generate flattened side x side samples from fixed class templates.

    Sample i carries label i mod num_classes and is its class template
    circularly shifted by a random offset of at most ``max_shift`` pixels
    per axis (default side // 8) plus i.i.d. Gaussian pixel noise.

    With noise_sigma 0 and max_shift 0 every sample equals its class
    template exactly.
    """
    if num_classes < 2:
        raise Unsupported("need at least 2 classes")
    if side < 8:
        raise Unsupported("side must be at least 8")
    if num_samples < 1:
        raise Unsupported("need at least 1 sample")
    if noise_sigma < 0:
        raise Unsupported("noise_sigma must be nonnegative")
    if max_shift is None:
        max_shift = side // 8
    if max_shift < 0 or max_shift >= side:
        raise Unsupported("max_shift must lie in [0, side)")

    rng = make_rng(seed)
    templates = class_templates(num_classes, side, rng)

    labels = (np.arange(num_samples) % num_classes).astype(np.int32)
    shifts = rng.integers(-max_shift, max_shift + 1, size=(num_samples, 2))
    noise = rng.standard_normal((num_samples, side, side)) if noise_sigma > 0 else None

    out = np.empty((num_samples, side, side))
    for i in range(num_samples):
        img = np.roll(templates[labels[i]], (int(shifts[i, 0]), int(shifts[i, 1])), axis=(0, 1))
        out[i] = img + noise_sigma * noise[i] if noise is not None else img

    return LabeledDataset(
        inputs=out.reshape(num_samples, side * side),
        labels=labels,
        num_classes=num_classes,
        corruption=None,
        split=split,
        source=source,
        seed=seed,
    )


def _pixelate(imgs: np.ndarray, block: int) -> np.ndarray:
    """Average aligned block x block tiles; edge tiles may be smaller.

    Block size 1 is the identity.
    """
    if block == 1:
        return imgs.copy()
    side = imgs.shape[1]
    out = np.empty_like(imgs)
    for by in range(0, side, block):
        for bx in range(0, side, block):
            blk = imgs[:, by : by + block, bx : bx + block]
            out[:, by : by + block, bx : bx + block] = blk.mean(axis=(1, 2), keepdims=True)
    return out


def _require_square(input_dim: int) -> int:
    side = math.isqrt(input_dim)
    if side * side != input_dim:
        raise NotSquare(f"input_dim {input_dim} is not a perfect square")
    return side


def corrupt(ds, kind: str, severity: int, seed: int = 0):
    """Apply a corruption at the given severity; returns a new dataset.

    Severity 0 passes inputs through bit-exactly for every kind.  Arithmetic
    runs in 64-bit and is rounded once to float32 on output.  box_blur uses
    symmetric reflect padding (the edge pixel is duplicated across the
    border).  contrast scales around each sample's own mean.  pixelate
    averages over aligned blocks, with smaller ragged blocks at the edges
    when the block size does not divide the side.
    """
    if kind not in CORRUPTION_KINDS:
        raise Unsupported(f"unknown corruption {kind!r}, expected one of {CORRUPTION_KINDS}")
    try:
        sev_int = int(severity)
    except (TypeError, ValueError):
        raise Unsupported(f"severity must be an integer in [0, 5], got {severity!r}") from None
    if sev_int != severity or not 0 <= sev_int <= 5:
        raise Unsupported(f"severity must be an integer in [0, 5], got {severity!r}")
    severity = sev_int
    if severity == 0:
        return dataclasses.replace(ds)

    side = _require_square(ds.input_dim)
    imgs = ds.inputs.astype(np.float64).reshape(ds.n, side, side)

    if kind == "gaussian_noise":
        sigma = NOISE_SIGMA[severity - 1]
        out = imgs + sigma * make_rng(seed).standard_normal(imgs.shape)
    elif kind == "box_blur":
        s = BLUR_HALF_WIDTH[severity - 1]
        out = uniform_filter(imgs, size=(1, 2 * s + 1, 2 * s + 1), mode="reflect")
    elif kind == "contrast":
        c = CONTRAST_SCALE[severity - 1]
        mu = imgs.mean(axis=(1, 2), keepdims=True)
        out = (imgs - mu) * c + mu
    else:  # pixelate
        out = _pixelate(imgs, PIXELATE_BLOCK[severity - 1])

    tag = f"{kind}@{severity}"
    if ds.corruption:
        tag = f"{ds.corruption}+{tag}"
    return dataclasses.replace(
        ds, inputs=out.reshape(ds.n, side * side).astype(np.float32), corruption=tag
    )


def split_even_odd(ds):
    """Split by sample index parity: (indices 0,2,4,..., indices 1,3,5,...).

    Either side may come out empty (warned as EmptySplitWarning); downstream
    consumers must check sizes before relying on a side.
    """
    def take(sl: slice, suffix: str):
        changes = {"inputs": ds.inputs[sl], "source": f"{ds.source}/{suffix}"}
        if isinstance(ds, LabeledDataset):
            changes["labels"] = ds.labels[sl]
        return dataclasses.replace(ds, **changes)

    even = take(slice(0, None, 2), "even")
    odd = take(slice(1, None, 2), "odd")
    for name, part in (("even", even), ("odd", odd)):
        if part.n == 0:
            warnings.warn(f"{name} split of {ds.source or 'dataset'} is empty", EmptySplitWarning)
    return even, odd


def save_dataset(path: str | Path, ds) -> None:
    has_labels = isinstance(ds, LabeledDataset)
    header = json.dumps(
        {
            "n": int(ds.n),
            "input_dim": int(ds.input_dim),
            "num_classes": int(ds.num_classes) if has_labels else 0,
            "has_labels": has_labels,
            "corruption": ds.corruption,
            "split": ds.split if has_labels else "",
            "source": ds.source,
            "seed": int(ds.seed),
        },
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(DATA_MAGIC)
        fh.write(struct.pack("<I", DATA_FORMAT_VERSION))
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        fh.write(ds.inputs.astype("<f4", copy=False).tobytes())
        if has_labels:
            fh.write(ds.labels.astype("<i4", copy=False).tobytes())


def load_dataset(path: str | Path):
    blob = Path(path).read_bytes()
    if len(blob) < 8 or blob[:8] != DATA_MAGIC:
        raise BadMagic(f"{path}: not a dataset file")
    if len(blob) < 20:
        raise HeaderMismatch(f"{path}: truncated before header")
    (version,) = struct.unpack_from("<I", blob, 8)
    if version != DATA_FORMAT_VERSION:
        raise UnsupportedVersion(f"{path}: format version {version}")
    (header_len,) = struct.unpack_from("<Q", blob, 12)
    start = 20 + header_len
    if start > len(blob):
        raise HeaderMismatch(f"{path}: header length exceeds file size")
    try:
        h = json.loads(blob[20:start].decode("utf-8"))
        n, input_dim = int(h["n"]), int(h["input_dim"])
        has_labels = bool(h["has_labels"])
    except (ValueError, KeyError, UnicodeDecodeError) as exc:
        raise HeaderMismatch(f"{path}: unreadable header: {exc}") from exc
    want = n * input_dim * 4 + (n * 4 if has_labels else 0)
    if len(blob) - start != want:
        raise HeaderMismatch(f"{path}: payload is {len(blob) - start} bytes, header implies {want}")
    inputs = np.frombuffer(blob, dtype="<f4", count=n * input_dim, offset=start).reshape(
        n, input_dim
    )
    if has_labels:
        labels = np.frombuffer(blob, dtype="<i4", count=n, offset=start + n * input_dim * 4)
        return LabeledDataset(
            inputs=inputs,
            labels=labels,
            num_classes=int(h["num_classes"]),
            corruption=h.get("corruption"),
            split=h.get("split") or "train",
            source=h.get("source", ""),
            seed=int(h.get("seed", 0)),
        )
    return UnlabeledDataset(
        inputs=inputs,
        corruption=h.get("corruption"),
        source=h.get("source", ""),
        seed=int(h.get("seed", 0)),
    )
