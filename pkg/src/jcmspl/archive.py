"""Versioned binary model archives.

Layout (all little-endian): a 4-byte magic and u32 format version,
the hyperparameter snapshot, a dataset fingerprint (dimensions plus a
SHA-256 over the raw dataset bytes), then the A/B/C matrices as
presence flag, u64 row/column counts and row-major float64 payload.
Matrices survive a save/load round trip bit for bit.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import ZslDataset
from .errors import ArchiveError, MissingFileError
from .trainer import Hyperparams, JcmsplModel

MAGIC = b"JCMS"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class DatasetFingerprint:
    m: int
    d: int
    n_seen: int
    n_unseen: int
    c_seen: int
    c_unseen: int
    sha256: str

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "d": self.d,
            "n_seen": self.n_seen,
            "n_unseen": self.n_unseen,
            "c_seen": self.c_seen,
            "c_unseen": self.c_unseen,
            "sha256": self.sha256,
        }


@dataclass(frozen=True)
class ModelArchive:
    model: JcmsplModel
    fingerprint: DatasetFingerprint
    version: int


def fingerprint_dataset(dataset: ZslDataset) -> DatasetFingerprint:
    """Dimensions plus a SHA-256 digest over the dataset's raw bytes."""
    digest = hashlib.sha256()
    for arr in (
        dataset.visual_seen,
        dataset.labels_seen,
        dataset.visual_unseen,
        dataset.labels_unseen,
        dataset.prototypes,
        dataset.seen_classes,
        dataset.unseen_classes,
    ):
        kind = "<f8" if np.issubdtype(arr.dtype, np.floating) else "<i8"
        digest.update(np.ascontiguousarray(arr).astype(kind).tobytes())
    return DatasetFingerprint(
        m=dataset.m,
        d=dataset.d,
        n_seen=dataset.n_seen,
        n_unseen=dataset.n_unseen,
        c_seen=dataset.c_seen,
        c_unseen=dataset.c_unseen,
        sha256=digest.hexdigest(),
    )


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def _pack_matrix(M) -> bytes:
    if M is None:
        return struct.pack("<B", 0)
    M = np.ascontiguousarray(M, dtype=np.float64)
    header = struct.pack("<Bqq", 1, M.shape[0], M.shape[1])
    return header + M.astype("<f8").tobytes()


def save_model(path, model: JcmsplModel, fingerprint: DatasetFingerprint) -> Path:
    h = model.hyper
    parts = [
        MAGIC,
        struct.pack("<I", FORMAT_VERSION),
        _pack_str(model.variant),
        struct.pack(
            "<4dqqdqd",
            h.lambda1, h.lambda2, h.lambda3, h.lambda4,
            h.k, h.t_max, h.tol, h.seed, h.ridge_eps,
        ),
        _pack_str(h.variant),
        struct.pack(
            "<6q",
            fingerprint.m, fingerprint.d,
            fingerprint.n_seen, fingerprint.n_unseen,
            fingerprint.c_seen, fingerprint.c_unseen,
        ),
        _pack_str(fingerprint.sha256),
        _pack_matrix(model.A),
        _pack_matrix(model.B),
        _pack_matrix(model.C),
    ]
    path = Path(path)
    path.write_bytes(b"".join(parts))
    return path


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.data):
            raise ArchiveError("archive truncated")
        out = struct.unpack_from(fmt, self.data, self.pos)
        self.pos += size
        return out

    def take_str(self) -> str:
        (length,) = self.take("<I")
        if self.pos + length > len(self.data):
            raise ArchiveError("archive truncated")
        raw = self.data[self.pos : self.pos + length]
        self.pos += length
        return raw.decode("utf-8")

    def take_matrix(self):
        (flag,) = self.take("<B")
        if flag == 0:
            return None
        rows, cols = self.take("<qq")
        count = rows * cols
        size = 8 * count
        if self.pos + size > len(self.data):
            raise ArchiveError("archive truncated")
        M = np.frombuffer(self.data, dtype="<f8", count=count, offset=self.pos)
        self.pos += size
        return M.reshape(rows, cols).copy()


def load_model(path) -> ModelArchive:
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"model archive not found: {path}")
    reader = _Reader(path.read_bytes())
    (magic,) = reader.take("4s")
    if magic != MAGIC:
        raise ArchiveError(f"bad magic {magic!r}; not a model archive")
    (version,) = reader.take("<I")
    if version != FORMAT_VERSION:
        raise ArchiveError(
            f"unsupported archive version {version} (expected {FORMAT_VERSION})"
        )
    variant = reader.take_str()
    l1, l2, l3, l4, k, t_max, tol, seed, ridge_eps = reader.take("<4dqqdqd")
    hyper_variant = reader.take_str()
    hyper = Hyperparams(
        k=int(k), lambda1=l1, lambda2=l2, lambda3=l3, lambda4=l4,
        t_max=int(t_max), tol=tol, seed=int(seed),
        variant=hyper_variant, ridge_eps=ridge_eps,
    )
    dims = reader.take("<6q")
    sha = reader.take_str()
    fingerprint = DatasetFingerprint(*[int(v) for v in dims], sha256=sha)
    A = reader.take_matrix()
    B = reader.take_matrix()
    C = reader.take_matrix()
    if A is None:
        raise ArchiveError("archive has no A matrix")
    model = JcmsplModel(A=A, B=B, C=C, variant=variant, hyper=hyper)
    return ModelArchive(model=model, fingerprint=fingerprint, version=int(version))
