"""Dataset container, manifest I/O, and synthetic benchmark generation.

Datasets are column-major in the sample sense: visual feature matrices
hold one sample per column, prototype matrices one class embedding per
column, and class ids index prototype columns directly.

On disk a dataset is a JSON manifest pointing at headerless CSV files
(matrices row-major, comma separated; label files one integer per
line).  Paths in the manifest are resolved relative to the manifest's
directory.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DatasetError,
    InvalidSpecError,
    ManifestError,
    MissingFileError,
    OverlappingSplitsError,
    ShapeMismatchError,
    UnknownClassIdError,
)

MANIFEST_KEYS = (
    "visual_seen",
    "labels_seen",
    "visual_unseen",
    "labels_unseen",
    "prototypes",
    "seen_classes",
    "unseen_classes",
)

NORMALIZE_MODES = ("none", "l2_columns")


def read_matrix(path) -> np.ndarray:
    """Read a headerless comma-separated numeric matrix."""
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"matrix file not found: {path}")
    return np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)


def write_matrix(path, M) -> None:
    # %.17g round-trips float64 exactly
    np.savetxt(path, np.asarray(M, dtype=np.float64), delimiter=",", fmt="%.17g")


def read_labels(path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"label file not found: {path}")
    return np.loadtxt(path, dtype=np.int64, ndmin=1)


def write_labels(path, labels) -> None:
    np.savetxt(path, np.asarray(labels, dtype=np.int64), fmt="%d")


@dataclass(frozen=True)
class ZslDataset:
    """Zero-shot recognition dataset with disjoint seen/unseen class splits.

    Attributes
    ----------
    visual_seen : numpy.ndarray, shape (m, n_seen)
    labels_seen : numpy.ndarray, shape (n_seen,)
    visual_unseen : numpy.ndarray, shape (m, n_unseen)
    labels_unseen : numpy.ndarray, shape (n_unseen,)
    prototypes : numpy.ndarray, shape (d, total_classes)
        One semantic embedding per class id; class ids are column indices.
    seen_classes, unseen_classes : numpy.ndarray
        Ordered, disjoint class-id lists.
    """

    visual_seen: np.ndarray
    labels_seen: np.ndarray
    visual_unseen: np.ndarray
    labels_unseen: np.ndarray
    prototypes: np.ndarray
    seen_classes: np.ndarray
    unseen_classes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "visual_seen", _as_feature_matrix(self.visual_seen, "visual_seen"))
        object.__setattr__(self, "visual_unseen", _as_feature_matrix(self.visual_unseen, "visual_unseen"))
        object.__setattr__(self, "prototypes", _as_feature_matrix(self.prototypes, "prototypes"))
        object.__setattr__(self, "labels_seen", _as_label_vector(self.labels_seen, "labels_seen"))
        object.__setattr__(self, "labels_unseen", _as_label_vector(self.labels_unseen, "labels_unseen"))
        object.__setattr__(self, "seen_classes", _as_label_vector(self.seen_classes, "seen_classes"))
        object.__setattr__(self, "unseen_classes", _as_label_vector(self.unseen_classes, "unseen_classes"))
        self._validate()

    def _validate(self):
        if self.visual_seen.shape[0] != self.visual_unseen.shape[0]:
            raise ShapeMismatchError(
                "seen and unseen feature matrices disagree on dimension: "
                f"{self.visual_seen.shape[0]} vs {self.visual_unseen.shape[0]}"
            )
        if self.labels_seen.shape[0] != self.visual_seen.shape[1]:
            raise ShapeMismatchError(
                f"labels_seen has {self.labels_seen.shape[0]} entries for "
                f"{self.visual_seen.shape[1]} seen samples"
            )
        if self.labels_unseen.shape[0] != self.visual_unseen.shape[1]:
            raise ShapeMismatchError(
                f"labels_unseen has {self.labels_unseen.shape[0]} entries for "
                f"{self.visual_unseen.shape[1]} unseen samples"
            )
        for name in ("m", "d", "n_seen", "n_unseen", "c_seen", "c_unseen"):
            if getattr(self, name) < 1:
                raise ShapeMismatchError(f"dataset dimension {name} must be >= 1")
        for name in ("seen_classes", "unseen_classes"):
            ids = getattr(self, name)
            if len(np.unique(ids)) != len(ids):
                raise DatasetError(f"{name} contains duplicate class ids")
        seen = set(self.seen_classes.tolist())
        unseen = set(self.unseen_classes.tolist())
        common = seen & unseen
        if common:
            raise OverlappingSplitsError(
                f"class ids appear in both splits: {sorted(common)}"
            )
        total = self.prototypes.shape[1]
        for cid in sorted(seen | unseen):
            if cid < 0 or cid >= total:
                raise UnknownClassIdError(
                    f"class id {cid} has no prototype column (0..{total - 1})"
                )
        if not set(self.labels_seen.tolist()) <= seen:
            bad = sorted(set(self.labels_seen.tolist()) - seen)
            raise UnknownClassIdError(f"labels_seen contains non-seen ids {bad}")
        if not set(self.labels_unseen.tolist()) <= unseen:
            bad = sorted(set(self.labels_unseen.tolist()) - unseen)
            raise UnknownClassIdError(f"labels_unseen contains non-unseen ids {bad}")

    @property
    def m(self) -> int:
        return self.visual_seen.shape[0]

    @property
    def d(self) -> int:
        return self.prototypes.shape[0]

    @property
    def n_seen(self) -> int:
        return self.visual_seen.shape[1]

    @property
    def n_unseen(self) -> int:
        return self.visual_unseen.shape[1]

    @property
    def c_seen(self) -> int:
        return self.seen_classes.shape[0]

    @property
    def c_unseen(self) -> int:
        return self.unseen_classes.shape[0]


def _as_feature_matrix(a, name):
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeMismatchError(f"{name} must be 2-D, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise DatasetError(f"{name} contains non-finite entries")
    return arr


def _as_label_vector(a, name):
    arr = np.asarray(a)
    if arr.ndim != 1:
        raise ShapeMismatchError(f"{name} must be 1-D, got ndim={arr.ndim}")
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        rounded = np.rint(np.asarray(arr, dtype=np.float64))
        if not np.array_equal(rounded, np.asarray(arr, dtype=np.float64)):
            raise DatasetError(f"{name} must contain integers")
        arr = rounded
    return arr.astype(np.int64)


def load_manifest(path) -> ZslDataset:
    """Load a dataset from a JSON manifest.

    The manifest must provide the keys ``visual_seen``, ``labels_seen``,
    ``visual_unseen``, ``labels_unseen`` and ``prototypes`` (CSV paths,
    relative to the manifest) plus the ``seen_classes`` and
    ``unseen_classes`` id lists (inline arrays or paths to label files).
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"manifest not found: {path}")
    try:
        with open(path) as fh:
            spec = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest is not valid JSON: {exc}") from exc
    missing = [key for key in MANIFEST_KEYS if key not in spec]
    if missing:
        raise ManifestError(f"manifest missing keys: {missing}")
    base = path.parent

    def _ids(key):
        value = spec[key]
        if isinstance(value, str):
            return read_labels(base / value)
        return value

    return ZslDataset(
        visual_seen=read_matrix(base / spec["visual_seen"]),
        labels_seen=read_labels(base / spec["labels_seen"]),
        visual_unseen=read_matrix(base / spec["visual_unseen"]),
        labels_unseen=read_labels(base / spec["labels_unseen"]),
        prototypes=read_matrix(base / spec["prototypes"]),
        seen_classes=_ids("seen_classes"),
        unseen_classes=_ids("unseen_classes"),
    )


def save_manifest(dataset: ZslDataset, manifest_path) -> Path:
    """Write ``dataset`` as a manifest plus CSV files in one directory.

    File names are fixed (``visual_seen.csv`` etc.) and referenced
    relatively, so a saved directory can be relocated.  Returns the
    manifest path.
    """
    manifest_path = Path(manifest_path)
    out_dir = manifest_path.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    write_matrix(out_dir / "visual_seen.csv", dataset.visual_seen)
    write_labels(out_dir / "labels_seen.csv", dataset.labels_seen)
    write_matrix(out_dir / "visual_unseen.csv", dataset.visual_unseen)
    write_labels(out_dir / "labels_unseen.csv", dataset.labels_unseen)
    write_matrix(out_dir / "prototypes.csv", dataset.prototypes)
    spec = {
        "visual_seen": "visual_seen.csv",
        "labels_seen": "labels_seen.csv",
        "visual_unseen": "visual_unseen.csv",
        "labels_unseen": "labels_unseen.csv",
        "prototypes": "prototypes.csv",
        "seen_classes": dataset.seen_classes.tolist(),
        "unseen_classes": dataset.unseen_classes.tolist(),
    }
    with open(manifest_path, "w") as fh:
        json.dump(spec, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest_path


def expand_prototypes(prototypes, labels) -> np.ndarray:
    """Gather one prototype column per label: result column i is the
    prototype of ``labels[i]``."""
    prototypes = _as_feature_matrix(prototypes, "prototypes")
    labels = _as_label_vector(labels, "labels")
    total = prototypes.shape[1]
    if labels.size and (labels.min() < 0 or labels.max() >= total):
        raise UnknownClassIdError(
            f"labels reference prototype columns outside 0..{total - 1}"
        )
    return prototypes[:, labels]


def normalize(M, mode: str = "l2_columns") -> np.ndarray:
    """Column-normalize a matrix.

    ``l2_columns`` rescales every column to unit Euclidean norm;
    zero-norm columns are passed through unchanged with a warning.
    ``none`` returns a copy.
    """
    if mode not in NORMALIZE_MODES:
        raise ValueError(f"unknown normalize mode {mode!r}; use one of {NORMALIZE_MODES}")
    M = _as_feature_matrix(M, "M")
    if mode == "none":
        return M.copy()
    norms = np.linalg.norm(M, axis=0)
    zero = norms == 0.0
    if np.any(zero):
        warnings.warn(
            f"{int(zero.sum())} zero-norm column(s) left unnormalized",
            RuntimeWarning,
            stacklevel=2,
        )
    return M / np.where(zero, 1.0, norms)


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of the synthetic planted-model benchmark."""

    m: int = 50
    d: int = 20
    k: int = 40
    num_seen_classes: int = 10
    num_unseen_classes: int = 5
    samples_per_class: int = 50
    noise_sigma: float = 0.05
    seed: int = 1

    def __post_init__(self):
        for name in ("m", "d", "k", "num_seen_classes", "num_unseen_classes",
                     "samples_per_class"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise InvalidSpecError(f"{name} must be a positive integer, got {value!r}")
        if self.noise_sigma < 0 or not math.isfinite(self.noise_sigma):
            raise InvalidSpecError(f"noise_sigma must be >= 0, got {self.noise_sigma!r}")
        total = self.num_seen_classes + self.num_unseen_classes
        if self.k < total:
            raise InvalidSpecError(
                f"k ({self.k}) must be >= total class count ({total}) so every "
                "class owns at least one concept coordinate"
            )
        if self.m < self.k:
            raise InvalidSpecError(
                f"m ({self.m}) must be >= k ({self.k}); the planted visual map "
                "needs orthonormal rows for the noiseless recovery identity"
            )


@dataclass(frozen=True)
class PlantedModel:
    """Ground-truth maps behind a synthetic dataset.

    ``A_true`` (k x m, orthonormal rows) lifts visual features into the
    concept space, ``B_true`` (k x d) does the same for semantic
    embeddings, and ``concept_means`` (k x classes) holds one unit-norm
    concept column per class.
    """

    A_true: np.ndarray
    B_true: np.ndarray
    concept_means: np.ndarray
    noise_sigma: float


def block_partition(total_rows: int, num_blocks: int) -> list[tuple[int, int]]:
    """Split ``total_rows`` into ``num_blocks`` contiguous ranges.

    Base block size is ``total_rows // num_blocks``; the remainder rows
    go one each to the earliest blocks.
    """
    base, rem = divmod(total_rows, num_blocks)
    bounds = []
    start = 0
    for i in range(num_blocks):
        size = base + (1 if i < rem else 0)
        bounds.append((start, start + size))
        start += size
    return bounds


def _orthonormal_map(rng, rows, cols):
    # orthonormal rows when possible, otherwise orthonormal columns
    g = rng.standard_normal((rows, cols))
    if rows <= cols:
        q, _ = np.linalg.qr(g.T)
        return q.T
    q, _ = np.linalg.qr(g)
    return q


def synth_generate(spec: SynthSpec) -> tuple[ZslDataset, PlantedModel]:
    """Generate a planted-model benchmark dataset.

    Every class owns a contiguous block of concept coordinates; its
    concept mean is the unit-scaled indicator of that block.  Visual
    samples are ``A_true^T (mean + sigma * noise)`` and prototypes are
    ``B_true^T mean``, so with ``noise_sigma = 0`` the planted maps
    classify every sample exactly.

    Same spec (including seed) always yields bitwise-identical output.
    """
    total = spec.num_seen_classes + spec.num_unseen_classes
    rng = np.random.default_rng(spec.seed)
    A_true = _orthonormal_map(rng, spec.k, spec.m)
    B_true = _orthonormal_map(rng, spec.k, spec.d)

    concept_means = np.zeros((spec.k, total))
    for cid, (start, stop) in enumerate(block_partition(spec.k, total)):
        concept_means[start:stop, cid] = 1.0 / math.sqrt(stop - start)

    blocks = []
    labels = []
    for cid in range(total):
        noise = rng.standard_normal((spec.k, spec.samples_per_class))
        concept = concept_means[:, cid : cid + 1] + spec.noise_sigma * noise
        blocks.append(A_true.T @ concept)
        labels.append(np.full(spec.samples_per_class, cid, dtype=np.int64))

    n_seen = spec.num_seen_classes
    dataset = ZslDataset(
        visual_seen=np.hstack(blocks[:n_seen]),
        labels_seen=np.concatenate(labels[:n_seen]),
        visual_unseen=np.hstack(blocks[n_seen:]),
        labels_unseen=np.concatenate(labels[n_seen:]),
        prototypes=B_true.T @ concept_means,
        seen_classes=np.arange(n_seen, dtype=np.int64),
        unseen_classes=np.arange(n_seen, total, dtype=np.int64),
    )
    planted = PlantedModel(
        A_true=A_true,
        B_true=B_true,
        concept_means=concept_means,
        noise_sigma=spec.noise_sigma,
    )
    return dataset, planted
