"""Binary and CSV dataset files, model checkpoints.

Embedding files: magic ``EMB1``, u32 version (=1), u32 d, u64 count, then
per record u32 identity, u32 sample, u8 masked, u8 split, f32*d vector.
Checkpoints: magic ``EUM1``, u32 version (=1), u32 d, f64 leaky slope,
f64 bn epsilon, f64 bn momentum, then per layer W (row-major), b, gamma,
beta, running_mean, running_var, all f32. Everything little-endian.

Vectors are float64 in memory and f32 on disk; a write/read round trip is
lossless at 32-bit precision.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .errors import (
    BadMagic,
    CorruptRecord,
    DimensionMismatch,
    IoError,
    VersionUnsupported,
)
from .model import NUM_LAYERS, EumParameters

EMB_MAGIC = b"EMB1"
CKPT_MAGIC = b"EUM1"
FORMAT_VERSION = 1

SPLIT_NAMES = ("train", "val", "eval_ref", "eval_probe")
SPLIT_CODES = {name: i for i, name in enumerate(SPLIT_NAMES)}

_EMB_HEADER = struct.Struct("<4sIIQ")
_CKPT_HEADER = struct.Struct("<4sIIddd")


def _record_dtype(d: int) -> np.dtype:
    return np.dtype(
        [
            ("identity", "<u4"),
            ("sample", "<u4"),
            ("masked", "u1"),
            ("split", "u1"),
            ("vector", "<f4", (d,)),
        ]
    )


@dataclass
class EmbeddingRecord:
    identity: int
    sample: int
    masked: bool
    split: str
    vector: np.ndarray


class Dataset:
    """Columnar collection of embedding records."""

    def __init__(self, identity, sample, masked, split, vectors):
        self.identity = np.asarray(identity, dtype=np.int64)
        self.sample = np.asarray(sample, dtype=np.int64)
        self.masked = np.asarray(masked, dtype=bool)
        self.split = np.asarray(split, dtype=np.uint8)
        self.vectors = np.asarray(vectors, dtype=np.float64)
        n = len(self.identity)
        if not (
            len(self.sample) == len(self.masked) == len(self.split) == n
            and self.vectors.shape[0] == n
        ):
            raise DimensionMismatch("dataset columns have inconsistent lengths")

    def __len__(self) -> int:
        return len(self.identity)

    @property
    def d(self) -> int:
        return int(self.vectors.shape[1])

    def subset(self, mask: np.ndarray, *, copy: bool = False) -> "Dataset":
        pick = lambda a: a[mask].copy() if copy else a[mask]  # noqa: E731
        return Dataset(
            pick(self.identity),
            pick(self.sample),
            pick(self.masked),
            pick(self.split),
            pick(self.vectors),
        )

    def for_split(self, name: str, masked: bool | None = None) -> "Dataset":
        mask = self.split == SPLIT_CODES[name]
        if masked is not None:
            mask &= self.masked == masked
        return self.subset(mask)

    def records(self) -> Iterator[EmbeddingRecord]:
        for i in range(len(self)):
            yield EmbeddingRecord(
                identity=int(self.identity[i]),
                sample=int(self.sample[i]),
                masked=bool(self.masked[i]),
                split=SPLIT_NAMES[self.split[i]],
                vector=self.vectors[i].copy(),
            )

    @classmethod
    def from_records(cls, records: Iterable[EmbeddingRecord]) -> "Dataset":
        records = list(records)
        return cls(
            identity=[r.identity for r in records],
            sample=[r.sample for r in records],
            masked=[r.masked for r in records],
            split=[SPLIT_CODES[r.split] for r in records],
            vectors=np.stack([np.asarray(r.vector, dtype=np.float64) for r in records]),
        )


def _as_dataset(records) -> Dataset:
    if isinstance(records, Dataset):
        return records
    return Dataset.from_records(records)


def write_embeddings(path, records) -> None:
    ds = _as_dataset(records)
    arr = np.empty(len(ds), dtype=_record_dtype(ds.d))
    arr["identity"] = ds.identity
    arr["sample"] = ds.sample
    arr["masked"] = ds.masked
    arr["split"] = ds.split
    arr["vector"] = ds.vectors.astype("<f4")
    try:
        with open(path, "wb") as fh:
            fh.write(_EMB_HEADER.pack(EMB_MAGIC, FORMAT_VERSION, ds.d, len(ds)))
            fh.write(arr.tobytes())
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_embeddings(path) -> Dataset:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc

    if len(raw) < _EMB_HEADER.size:
        raise BadMagic(f"{path}: file shorter than header")
    magic, version, d, count = _EMB_HEADER.unpack_from(raw, 0)
    if magic != EMB_MAGIC:
        raise BadMagic(f"{path}: magic {magic!r}, expected {EMB_MAGIC!r}")
    if version != FORMAT_VERSION:
        raise VersionUnsupported(f"{path}: version {version}, reader supports {FORMAT_VERSION}")

    dtype = _record_dtype(d)
    body = raw[_EMB_HEADER.size:]
    expected = count * dtype.itemsize
    if len(body) != expected:
        whole = min(len(body), expected) // dtype.itemsize
        offset = _EMB_HEADER.size + whole * dtype.itemsize
        raise CorruptRecord(
            f"{path}: body holds {len(body)} bytes, header promises {expected}",
            offset=offset,
        )
    arr = np.frombuffer(body, dtype=dtype)
    if np.any(arr["split"] > len(SPLIT_NAMES) - 1):
        bad = int(np.argmax(arr["split"] > len(SPLIT_NAMES) - 1))
        raise CorruptRecord(
            f"{path}: record {bad} has split code {arr['split'][bad]}",
            offset=_EMB_HEADER.size + bad * dtype.itemsize,
        )
    return Dataset(
        identity=arr["identity"].astype(np.int64),
        sample=arr["sample"].astype(np.int64),
        masked=arr["masked"].astype(bool),
        split=arr["split"].copy(),
        vectors=arr["vector"].astype(np.float64),
    )


def export_csv(path, records) -> None:
    """Header identity,sample,masked,split,e0..e{d-1}; masked as 0/1."""
    ds = _as_dataset(records)
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(
                ["identity", "sample", "masked", "split"]
                + [f"e{i}" for i in range(ds.d)]
            )
            for i in range(len(ds)):
                w.writerow(
                    [
                        int(ds.identity[i]),
                        int(ds.sample[i]),
                        int(ds.masked[i]),
                        SPLIT_NAMES[ds.split[i]],
                    ]
                    + [repr(float(v)) for v in ds.vectors[i]]
                )
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def import_csv(path) -> Dataset:
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or header[:4] != ["identity", "sample", "masked", "split"]:
                raise CorruptRecord(f"{path}: unrecognized CSV header {header!r}", offset=0)
            rows = list(reader)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc

    identity, sample, masked, split, vectors = [], [], [], [], []
    for lineno, row in enumerate(rows, start=2):
        try:
            identity.append(int(row[0]))
            sample.append(int(row[1]))
            masked.append(bool(int(row[2])))
            split.append(SPLIT_CODES[row[3]])
            vectors.append([float(v) for v in row[4:]])
        except (ValueError, KeyError, IndexError) as exc:
            raise CorruptRecord(f"{path}: line {lineno}: {exc}", offset=lineno) from exc
    return Dataset(identity, sample, masked, split, np.asarray(vectors))


def write_checkpoint(path, params: EumParameters) -> None:
    try:
        with open(path, "wb") as fh:
            fh.write(
                _CKPT_HEADER.pack(
                    CKPT_MAGIC,
                    FORMAT_VERSION,
                    params.d,
                    params.leaky_slope,
                    params.bn_epsilon,
                    params.bn_momentum,
                )
            )
            for i in range(NUM_LAYERS):
                for arr in (
                    params.weights[i],
                    params.biases[i],
                    params.bn_gamma[i],
                    params.bn_beta[i],
                    params.bn_running_mean[i],
                    params.bn_running_var[i],
                ):
                    fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_checkpoint(path) -> EumParameters:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc

    if len(raw) < _CKPT_HEADER.size:
        raise BadMagic(f"{path}: file shorter than header")
    magic, version, d, slope, epsilon, momentum = _CKPT_HEADER.unpack_from(raw, 0)
    if magic != CKPT_MAGIC:
        raise BadMagic(f"{path}: magic {magic!r}, expected {CKPT_MAGIC!r}")
    if version != FORMAT_VERSION:
        raise VersionUnsupported(f"{path}: version {version}, reader supports {FORMAT_VERSION}")

    per_layer = d * d + 5 * d
    expected = _CKPT_HEADER.size + NUM_LAYERS * per_layer * 4
    if len(raw) != expected:
        raise IoError(f"{path}: {len(raw)} bytes, expected {expected} for d={d}")

    flat = np.frombuffer(raw, dtype="<f4", offset=_CKPT_HEADER.size).astype(np.float64)
    params = EumParameters(
        d=d,
        leaky_slope=slope,
        bn_epsilon=epsilon,
        bn_momentum=momentum,
        weights=[],
        biases=[],
        bn_gamma=[],
        bn_beta=[],
        bn_running_mean=[],
        bn_running_var=[],
    )
    pos = 0

    def take(n: int) -> np.ndarray:
        nonlocal pos
        out = flat[pos:pos + n].copy()
        pos += n
        return out

    for _ in range(NUM_LAYERS):
        params.weights.append(take(d * d).reshape(d, d))
        params.biases.append(take(d))
        params.bn_gamma.append(take(d))
        params.bn_beta.append(take(d))
        params.bn_running_mean.append(take(d))
        params.bn_running_var.append(take(d))
    return params
