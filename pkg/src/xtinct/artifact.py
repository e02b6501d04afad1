"""On-disk dataset artifact: packed binary patterns plus a JSON sidecar.

Container layout (little endian):

    offset 0   magic  b"ULBD"
    offset 4   u16    format version (currently 1)
    offset 6   u64    n_samples
    offset 14  u32    n_points
    offset 18  f32    two_theta_min (degrees)
    offset 22  f32    two_theta_max (degrees)
    offset 26  records: per sample a u16 label followed by n_points f32

Metadata lives next to the container as ``<stem>.meta.json``; it carries
the full generating configuration so an artifact can be rebuilt bit for
bit.  Round-trips are lossless.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "MAGIC",
    "FORMAT_VERSION",
    "Dataset",
    "DatasetFormatError",
    "ArtifactWriter",
    "write_dataset",
    "read_dataset",
    "read_metadata",
    "meta_path_for",
    "export_csv",
]

MAGIC = b"ULBD"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHQIff")


class DatasetFormatError(ValueError):
    """Malformed container; carries the offending byte offset when known."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


@dataclass
class Dataset:
    """In-memory dataset: one u16 label and one f32 vector per sample."""

    labels: np.ndarray  # (n,) uint16
    data: np.ndarray  # (n, n_points) float32
    two_theta_min: float
    two_theta_max: float

    def __post_init__(self):
        self.labels = np.ascontiguousarray(self.labels, dtype=np.uint16)
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        if self.data.ndim != 2 or len(self.labels) != len(self.data):
            raise DatasetFormatError("labels and data shapes disagree")

    @property
    def n_samples(self) -> int:
        return len(self.labels)

    @property
    def n_points(self) -> int:
        return self.data.shape[1]


def meta_path_for(path: str | os.PathLike) -> Path:
    p = Path(path)
    return p.with_name(p.stem + ".meta.json")


class ArtifactWriter:
    """Streaming writer; sample count must be known up front."""

    def __init__(
        self,
        path: str | os.PathLike,
        n_samples: int,
        n_points: int,
        two_theta_min: float,
        two_theta_max: float,
    ):
        self.path = Path(path)
        self.n_samples = int(n_samples)
        self.n_points = int(n_points)
        self._written = 0
        self._fh = open(self.path, "wb")
        self._fh.write(
            _HEADER.pack(
                MAGIC,
                FORMAT_VERSION,
                self.n_samples,
                self.n_points,
                float(two_theta_min),
                float(two_theta_max),
            )
        )

    def add(self, label: int, samples: np.ndarray) -> None:
        vec = np.ascontiguousarray(samples, dtype="<f4")
        if vec.shape != (self.n_points,):
            raise DatasetFormatError(
                f"sample has {vec.shape} values, expected ({self.n_points},)"
            )
        if self._written >= self.n_samples:
            raise DatasetFormatError("more samples than declared in the header")
        self._fh.write(struct.pack("<H", int(label)))
        self._fh.write(vec.tobytes())
        self._written += 1

    def close(self) -> None:
        if self._fh is None:
            return
        if self._written != self.n_samples:
            self._fh.close()
            self._fh = None
            raise DatasetFormatError(
                f"wrote {self._written} samples, header declared {self.n_samples}"
            )
        self._fh.flush()
        os.fsync(self._fh.fileno())
        self._fh.close()
        self._fh = None

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            self.close()
        elif self._fh is not None:
            self._fh.close()
            self._fh = None


def write_metadata(metadata: dict, path: str | os.PathLike) -> Path:
    """Deterministic JSON sidecar (sorted keys, fixed separators, fsync)."""
    meta_path = meta_path_for(path)
    blob = json.dumps(metadata, sort_keys=True, separators=(",", ":")).encode()
    with open(meta_path, "wb") as fh:
        fh.write(blob)
        fh.flush()
        os.fsync(fh.fileno())
    return meta_path


def write_dataset(ds: Dataset, metadata: dict | None, path: str | os.PathLike) -> Path:
    """Write container (and sidecar when metadata given); fsync before return."""
    with ArtifactWriter(
        path, ds.n_samples, ds.n_points, ds.two_theta_min, ds.two_theta_max
    ) as writer:
        for label, row in zip(ds.labels, ds.data):
            writer.add(int(label), row)
    if metadata is not None:
        write_metadata(metadata, path)
    return Path(path)


def read_dataset(path: str | os.PathLike) -> Dataset:
    """Read and validate a container; exact stored values, no conversion."""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise DatasetFormatError(f"cannot read dataset {path}: {exc}") from exc
    if len(blob) < _HEADER.size:
        raise DatasetFormatError(
            f"{path}: truncated header, {len(blob)} bytes", offset=len(blob)
        )
    magic, version, n_samples, n_points, tmin, tmax = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise DatasetFormatError(f"{path}: bad magic {magic!r}", offset=0)
    if version != FORMAT_VERSION:
        raise DatasetFormatError(
            f"{path}: unsupported format version {version}", offset=4
        )
    record = 2 + 4 * n_points
    expected = _HEADER.size + n_samples * record
    if len(blob) != expected:
        raise DatasetFormatError(
            f"{path}: header declares {n_samples} samples of {n_points} points "
            f"({expected} bytes), file has {len(blob)} bytes",
            offset=min(len(blob), expected),
        )
    labels = np.empty(n_samples, dtype=np.uint16)
    data = np.empty((n_samples, n_points), dtype=np.float32)
    if n_samples:
        raw = np.frombuffer(blob, dtype=np.uint8, count=n_samples * record, offset=_HEADER.size)
        raw = raw.reshape(n_samples, record)
        labels[:] = raw[:, :2].copy().view("<u2").reshape(n_samples)
        data[:] = raw[:, 2:].copy().view("<f4").reshape(n_samples, n_points)
    return Dataset(labels=labels, data=data, two_theta_min=tmin, two_theta_max=tmax)


def read_metadata(path: str | os.PathLike) -> dict:
    """Load the sidecar for a container (or a sidecar path directly)."""
    p = Path(path)
    if p.suffix != ".json":
        p = meta_path_for(p)
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except OSError as exc:
        raise DatasetFormatError(f"cannot read metadata {p}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"metadata {p} is not valid JSON: {exc}") from exc


def export_csv(ds: Dataset, path: str | os.PathLike) -> Path:
    """Spot-check export: one row per sample, label then intensities."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for label, row in zip(ds.labels, ds.data):
            fh.write(str(int(label)))
            fh.write(",")
            fh.write(",".join(repr(float(v)) for v in row))
            fh.write("\n")
    return path
