"""Named float32 tensor collections and their on-disk checkpoint format.

A checkpoint file is laid out as, all little-endian:

    bytes 0..7    magic ``SOUPCKPT``
    bytes 8..11   format version, u32 (currently 1)
    bytes 12..19  header length in bytes, u64
    header        UTF-8 JSON: {"meta": {...}, "tensors": [...]}
    data          raw float32 tensor payloads, concatenated

The ``tensors`` list is sorted by name.  Each entry carries ``name``,
``dtype`` (always ``"f32"``), ``shape``, ``offset`` and ``nbytes``; offsets
are relative to the end of the header and the payloads are contiguous with
no padding, so ``offset`` of entry k+1 equals ``offset + nbytes`` of entry
k.  JSON is serialized with sorted keys and no whitespace, which makes the
bytes of a checkpoint a pure function of its contents.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping, Sequence

import numpy as np

from .errors import (
    BadMagic,
    HeaderMismatch,
    InvalidTensor,
    ShapeMismatch,
    UnsupportedVersion,
)

MAGIC = b"SOUPCKPT"
FORMAT_VERSION = 1

ROLES = frozenset({"stock", "inter_trained", "fine_tuned", "soup"})

_META_FIELDS = ("role", "lineage", "seed", "hyperparams", "format_version")


class TensorSet:
    """Immutable mapping from tensor names to float32 arrays.

    Names are kept in sorted order, values are C-contiguous float32 arrays
    marked read-only.  Equality is bit-exact: two sets are equal only if the
    name sets match and every array has identical bytes, so ``-0.0`` and
    ``0.0`` compare unequal on purpose.
    """

    def __init__(self, entries: Mapping[str, np.ndarray]):
        if not entries:
            raise InvalidTensor("a TensorSet needs at least one tensor")
        store: dict[str, np.ndarray] = {}
        for name in sorted(entries):
            if not isinstance(name, str) or not name or not name.isascii():
                raise InvalidTensor(f"bad tensor name: {name!r}")
            raw = np.asarray(entries[name])
            if raw.ndim < 1 or any(d < 1 for d in raw.shape):
                raise InvalidTensor(f"tensor {name!r} must have positive dimensions, got shape {raw.shape}")
            arr = np.ascontiguousarray(raw, dtype=np.float32).copy()
            arr.flags.writeable = False
            store[name] = arr
        self._store = store
        self._fingerprint: str | None = None

    @property
    def names(self) -> list[str]:
        return list(self._store)

    def __len__(self) -> int:
        return len(self._store)

    def __iter__(self) -> Iterator[str]:
        return iter(self._store)

    def __contains__(self, name: str) -> bool:
        return name in self._store

    def __getitem__(self, name: str) -> np.ndarray:
        return self._store[name]

    def items(self):
        return self._store.items()

    def validate(self) -> "TensorSet":
        """Check that every value is finite; raise InvalidTensor otherwise."""
        for name, arr in self._store.items():
            if not np.isfinite(arr).all():
                raise InvalidTensor(f"tensor {name!r} contains non-finite values")
        return self

    def subset(self, names: Sequence[str]) -> "TensorSet":
        missing = [n for n in names if n not in self._store]
        if missing:
            raise ShapeMismatch(f"tensors not present: {missing}")
        return TensorSet({n: self._store[n] for n in names})

    def merge(self, other: Mapping[str, np.ndarray]) -> "TensorSet":
        clash = [n for n in other if n in self._store]
        if clash:
            raise ShapeMismatch(f"tensors already present: {clash}")
        combined = dict(self._store)
        combined.update(other)
        return TensorSet(combined)

    def fingerprint(self) -> str:
        """Content digest over names, shapes and raw bytes; cached."""
        if self._fingerprint is None:
            h = hashlib.blake2b(digest_size=16)
            for name, arr in self._store.items():
                h.update(name.encode("utf-8"))
                h.update(str(arr.shape).encode("utf-8"))
                h.update(arr.tobytes())
            self._fingerprint = h.hexdigest()
        return self._fingerprint

    def bit_equal(self, other: "TensorSet") -> bool:
        if self.names != other.names:
            return False
        return all(
            a.shape == other[n].shape and a.tobytes() == other[n].tobytes()
            for n, a in self._store.items()
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TensorSet):
            return NotImplemented
        return self.bit_equal(other)

    def __repr__(self) -> str:
        return f"TensorSet({len(self._store)} tensors)"


@dataclass
class CheckpointMeta:
    """Provenance carried in a checkpoint header.

    ``extra`` holds any header keys this build does not know about; they
    survive a load/save round-trip untouched.
    """

    role: str
    lineage: list[str] = field(default_factory=list)
    seed: int = 0
    hyperparams: dict[str, str] = field(default_factory=dict)
    format_version: int = FORMAT_VERSION
    extra: dict = field(default_factory=dict)

    def validate(self) -> "CheckpointMeta":
        if self.role not in ROLES:
            raise HeaderMismatch(f"unknown role {self.role!r}, expected one of {sorted(ROLES)}")
        if self.format_version != FORMAT_VERSION:
            raise UnsupportedVersion(f"meta format_version {self.format_version}")
        if not all(isinstance(p, str) for p in self.lineage):
            raise HeaderMismatch("lineage must be a list of checkpoint ids")
        if not all(isinstance(k, str) and isinstance(v, str) for k, v in self.hyperparams.items()):
            raise HeaderMismatch("hyperparams must map str to str")
        return self

    def to_dict(self) -> dict:
        out = dict(self.extra)
        out.update(
            role=self.role,
            lineage=list(self.lineage),
            seed=int(self.seed),
            hyperparams=dict(self.hyperparams),
            format_version=int(self.format_version),
        )
        return out

    @classmethod
    def from_dict(cls, raw: Mapping) -> "CheckpointMeta":
        try:
            meta = cls(
                role=raw["role"],
                lineage=list(raw.get("lineage", [])),
                seed=int(raw.get("seed", 0)),
                hyperparams=dict(raw.get("hyperparams", {})),
                format_version=int(raw.get("format_version", FORMAT_VERSION)),
                extra={k: v for k, v in raw.items() if k not in _META_FIELDS},
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise HeaderMismatch(f"malformed meta block: {exc}") from exc
        return meta.validate()


def save_checkpoint(path: str | Path, params: TensorSet, meta: CheckpointMeta) -> None:
    """Write a checkpoint; the byte stream is canonical for its contents."""
    params.validate()
    meta.validate()
    entries = []
    offset = 0
    for name, arr in params.items():
        nbytes = arr.size * 4
        entries.append(
            {
                "name": name,
                "dtype": "f32",
                "shape": list(arr.shape),
                "offset": offset,
                "nbytes": nbytes,
            }
        )
        offset += nbytes
    header = json.dumps(
        {"meta": meta.to_dict(), "tensors": entries},
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for _, arr in params.items():
            fh.write(arr.astype("<f4", copy=False).tobytes())


def load_checkpoint(path: str | Path) -> tuple[TensorSet, CheckpointMeta]:
    """Read a checkpoint back; rejects corrupt or truncated files."""
    blob = Path(path).read_bytes()
    if len(blob) < 8 or blob[:8] != MAGIC:
        raise BadMagic(f"{path}: not a checkpoint file")
    if len(blob) < 20:
        raise HeaderMismatch(f"{path}: truncated before header")
    (version,) = struct.unpack_from("<I", blob, 8)
    if version != FORMAT_VERSION:
        raise UnsupportedVersion(f"{path}: format version {version}")
    (header_len,) = struct.unpack_from("<Q", blob, 12)
    data_start = 20 + header_len
    if data_start > len(blob):
        raise HeaderMismatch(f"{path}: header length {header_len} exceeds file size")
    try:
        header = json.loads(blob[20:data_start].decode("utf-8"))
        meta_raw = header["meta"]
        tensor_raw = header["tensors"]
    except (ValueError, KeyError, UnicodeDecodeError) as exc:
        raise HeaderMismatch(f"{path}: unreadable header: {exc}") from exc
    meta = CheckpointMeta.from_dict(meta_raw)

    names = [t.get("name") for t in tensor_raw]
    if names != sorted(names) or len(set(names)) != len(names):
        raise HeaderMismatch(f"{path}: tensor entries must be unique and sorted by name")
    entries = {}
    expected_offset = 0
    for t in tensor_raw:
        try:
            name, dtype, shape = t["name"], t["dtype"], tuple(int(d) for d in t["shape"])
            offset, nbytes = int(t["offset"]), int(t["nbytes"])
        except (KeyError, TypeError, ValueError) as exc:
            raise HeaderMismatch(f"{path}: malformed tensor entry: {exc}") from exc
        if dtype != "f32":
            raise HeaderMismatch(f"{path}: tensor {name!r} has unsupported dtype {dtype!r}")
        size = int(np.prod(shape)) if shape else 0
        if not shape or any(d < 1 for d in shape) or nbytes != size * 4:
            raise HeaderMismatch(f"{path}: tensor {name!r} declares nbytes {nbytes} for shape {shape}")
        if offset != expected_offset:
            raise HeaderMismatch(f"{path}: tensor {name!r} offset {offset}, expected {expected_offset}")
        expected_offset = offset + nbytes
        lo = data_start + offset
        if lo + nbytes > len(blob):
            raise HeaderMismatch(f"{path}: tensor {name!r} payload is truncated")
        arr = np.frombuffer(blob, dtype="<f4", count=size, offset=lo).reshape(shape)
        entries[name] = arr
    if data_start + expected_offset != len(blob):
        raise HeaderMismatch(f"{path}: {len(blob) - data_start - expected_offset} trailing bytes")
    params = TensorSet(entries)
    params.validate()
    return params, meta


def assert_compatible(sets: Sequence[TensorSet]) -> None:
    """Require identical name sets and per-name shapes across all sets."""
    if not sets:
        raise ShapeMismatch("no tensor sets given")
    first = sets[0]
    for i, other in enumerate(sets[1:], start=1):
        if first.names != other.names:
            missing = sorted(set(first.names) ^ set(other.names))
            raise ShapeMismatch(f"set 0 and set {i} differ in tensor names: {missing}")
        for name in first.names:
            if first[name].shape != other[name].shape:
                raise ShapeMismatch(
                    f"tensor {name!r}: set 0 has shape {first[name].shape}, "
                    f"set {i} has shape {other[name].shape}"
                )
