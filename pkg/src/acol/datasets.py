"""Dataset ingestion and construction.

Covers the IDX container format used by MNIST-style digit files, the
mapping of fine labels onto coarse parent classes, a synthetic Gaussian
blob generator for desk-scale runs, and seeded train/validation splits.

IDX layout (all integers big-endian):
    images: i32 magic 0x00000803, i32 count, i32 rows, i32 cols, u8 pixels
    labels: i32 magic 0x00000801, i32 count, u8 labels
"""

import itertools
import struct
from dataclasses import dataclass, field, replace

import numpy as np

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


class IdxFormatError(ValueError):
    """Raised for malformed IDX files and mismatched image/label pairs."""


@dataclass
class RawDigits:
    """A parsed IDX image/label pair, kept byte-exact for re-serialization."""

    pixels: np.ndarray  # uint8, (m, rows, cols)
    labels: np.ndarray  # int64, (m,)


@dataclass
class LabeledDataset:
    """Features plus coarse parent labels, with optional hidden fine labels.

    ``t`` holds 1-based parent classes and is the only label ever seen by
    training. ``t_star``, when present, is the fine ground truth kept for
    evaluation only.
    """

    X: np.ndarray                 # float64, (m, d), values in [0, 1] for image data
    t: np.ndarray                 # int64, (m,)
    t_star: np.ndarray | None = None
    meta: str = ""

    def __len__(self) -> int:
        return self.X.shape[0]


@dataclass(frozen=True)
class ParentPartition:
    """Mapping from fine-label value to 1-based parent index.

    Fine labels in ``exclude`` are dropped entirely; every retained fine
    label must be mapped.
    """

    mapping: dict[int, int]
    exclude: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        retained = {f: p for f, p in self.mapping.items() if f not in self.exclude}
        if len(set(retained.values())) < 2:
            raise ValueError("partition must map retained fine labels onto at least 2 parents")

    @property
    def n_parents(self) -> int:
        return max(p for f, p in self.mapping.items() if f not in self.exclude)

    def describe(self) -> str:
        groups: dict[int, list[int]] = {}
        for fine, parent in sorted(self.mapping.items()):
            if fine not in self.exclude:
                groups.setdefault(parent, []).append(fine)
        return " vs ".join(
            "{" + ",".join(str(f) for f in groups[p]) + "}" for p in sorted(groups)
        )


def _read_be32(buf: bytes, offset: int, path: str) -> int:
    if len(buf) < offset + 4:
        raise IdxFormatError(f"{path}: truncated header")
    return struct.unpack_from(">i", buf, offset)[0]


def load_idx_images(path) -> np.ndarray:
    """Read an IDX image file into a uint8 (m, rows, cols) array."""
    path = str(path)
    with open(path, "rb") as f:
        buf = f.read()
    magic = _read_be32(buf, 0, path)
    if magic != IMAGES_MAGIC:
        raise IdxFormatError(f"{path}: bad magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}")
    count = _read_be32(buf, 4, path)
    rows = _read_be32(buf, 8, path)
    cols = _read_be32(buf, 12, path)
    payload = buf[16:]
    expected = count * rows * cols
    if len(payload) != expected:
        raise IdxFormatError(
            f"{path}: truncated payload, expected {expected} pixel bytes, got {len(payload)}"
        )
    return np.frombuffer(payload, dtype=np.uint8).reshape(count, rows, cols)


def load_idx_labels(path) -> np.ndarray:
    """Read an IDX label file into an int64 (m,) array."""
    path = str(path)
    with open(path, "rb") as f:
        buf = f.read()
    magic = _read_be32(buf, 0, path)
    if magic != LABELS_MAGIC:
        raise IdxFormatError(f"{path}: bad magic {magic:#010x}, expected {LABELS_MAGIC:#010x}")
    count = _read_be32(buf, 4, path)
    payload = buf[8:]
    if len(payload) != count:
        raise IdxFormatError(
            f"{path}: truncated payload, expected {count} label bytes, got {len(payload)}"
        )
    return np.frombuffer(payload, dtype=np.uint8).astype(np.int64)


def write_idx_images(pixels: np.ndarray, path) -> None:
    """Serialize a uint8 (m, rows, cols) array back to IDX bytes."""
    pixels = np.ascontiguousarray(pixels, dtype=np.uint8)
    m, rows, cols = pixels.shape
    with open(str(path), "wb") as f:
        f.write(struct.pack(">iiii", IMAGES_MAGIC, m, rows, cols))
        f.write(pixels.tobytes())


def write_idx_labels(labels: np.ndarray, path) -> None:
    """Serialize labels back to IDX bytes."""
    labels = np.asarray(labels)
    with open(str(path), "wb") as f:
        f.write(struct.pack(">ii", LABELS_MAGIC, labels.shape[0]))
        f.write(labels.astype(np.uint8).tobytes())


def load_idx(images_path, labels_path) -> RawDigits:
    """Load a matching IDX image/label pair."""
    pixels = load_idx_images(images_path)
    labels = load_idx_labels(labels_path)
    if pixels.shape[0] != labels.shape[0]:
        raise IdxFormatError(
            f"image/label count mismatch: {pixels.shape[0]} images vs {labels.shape[0]} labels"
        )
    return RawDigits(pixels=pixels, labels=labels)


def images_to_features(pixels: np.ndarray) -> np.ndarray:
    """Flatten images row-major and scale to [0, 1] by dividing by 255."""
    m = pixels.shape[0]
    return pixels.reshape(m, -1).astype(np.float64) / 255.0


def threshold_partition(threshold: int = 5) -> ParentPartition:
    """Two parents over digits 0-9: parent 1 below the threshold, parent 2 at or above."""
    return ParentPartition(mapping={d: (1 if d < threshold else 2) for d in range(10)})


def random_partition(seed: int, fine_labels=range(10), n_parents: int = 2) -> ParentPartition:
    """Seeded near-equal split of the fine labels into n_parents groups."""
    labels = list(fine_labels)
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(labels))
    mapping = {labels[int(j)]: (i % n_parents) + 1 for i, j in enumerate(order)}
    return ParentPartition(mapping=mapping)


def interparent_partition(dropped=()) -> ParentPartition:
    """Digits {0-4} as parent 1 vs {5-9} minus ``dropped`` as parent 2."""
    dropped = frozenset(int(d) for d in dropped)
    if not dropped <= set(range(5, 10)):
        raise ValueError(f"can only drop digits 5-9, got {sorted(dropped)}")
    return ParentPartition(
        mapping={d: (1 if d < 5 else 2) for d in range(10)},
        exclude=dropped,
    )


def apply_partition(raw: RawDigits, partition: ParentPartition) -> LabeledDataset:
    """Build a LabeledDataset from raw digits under a parent partition.

    Excluded fine labels are dropped; any other unmapped fine label is an
    error. The original fine labels are preserved as ``t_star`` for
    evaluation only.
    """
    keep = np.array([int(l) not in partition.exclude for l in raw.labels], dtype=bool)
    labels = raw.labels[keep]
    for value in np.unique(labels):
        if int(value) not in partition.mapping:
            raise ValueError(f"fine label {int(value)} has no parent in the partition")
    t = np.array([partition.mapping[int(l)] for l in labels], dtype=np.int64)
    return LabeledDataset(
        X=images_to_features(raw.pixels[keep]),
        t=t,
        t_star=labels.copy(),
        meta=f"idx digits, partition {partition.describe()}",
    )


def _simplex_centers(count: int, dim: int, separation: float) -> np.ndarray:
    """Regular-simplex vertices with edge length ``separation``, centroid 0.

    Built from a mean-centered identity block (needs dim >= count). Every
    pair of centers is exactly ``separation`` apart and no coordinate
    carries a common offset, so no cluster pairing is geometrically
    privileged over another.
    """
    eye = np.eye(count)
    eye -= eye.mean(axis=0)
    centers = np.zeros((count, dim))
    centers[:, :count] = eye * (separation / np.sqrt(2.0))
    return centers


def _lattice_centers(count: int, dim: int, separation: float) -> np.ndarray:
    """First ``count`` points of a lattice with spacing ``separation``.

    Fallback for dim < count. Distinct lattice points differ by at least
    one step in some coordinate, so all pairwise distances are >= separation.
    """
    side = 1
    while side**dim < count:
        side += 1
    points = itertools.islice(itertools.product(range(side), repeat=dim), count)
    return separation * np.array(list(points), dtype=np.float64)


def synthetic_blobs(
    n_parents: int,
    k: int,
    per_cluster: int,
    dim: int,
    separation: float,
    seed: int,
) -> LabeledDataset:
    """Isotropic unit-variance Gaussian clusters with known sub-class truth.

    Generates ``n_parents * k`` clusters whose centers sit at mutual
    distance >= separation: a centered regular simplex when the feature
    dimension allows (all pairs exactly ``separation`` apart), a lattice
    otherwise. Centers are fixed; only the noise depends on the seed.
    ``t_star`` is the 1-based cluster id; the parent label interleaves
    clusters over parents (cluster c -> parent ``(c-1) % n_parents + 1``),
    matching the head's node-to-parent rule.
    """
    if separation <= 0:
        raise ValueError("separation must be positive")
    count = n_parents * k
    if dim >= count:
        centers = _simplex_centers(count, dim, separation)
    else:
        centers = _lattice_centers(count, dim, separation)
    rng = np.random.default_rng(seed)
    xs, t, t_star = [], [], []
    for c in range(1, count + 1):
        xs.append(centers[c - 1] + rng.standard_normal((per_cluster, dim)))
        t_star.extend([c] * per_cluster)
        t.extend([(c - 1) % n_parents + 1] * per_cluster)
    return LabeledDataset(
        X=np.vstack(xs),
        t=np.array(t, dtype=np.int64),
        t_star=np.array(t_star, dtype=np.int64),
        meta=f"synthetic blobs {n_parents}x{k}, dim {dim}, separation {separation}, seed {seed}",
    )


def split_validation(data: LabeledDataset, size: int, seed: int):
    """Disjoint seeded (train, validation) split; the union is the input."""
    m = len(data)
    if size >= m:
        raise ValueError(f"validation size {size} must be smaller than the dataset ({m})")
    perm = np.random.default_rng(seed).permutation(m)
    val_idx, train_idx = perm[:size], perm[size:]

    def take(idx):
        return replace(
            data,
            X=data.X[idx],
            t=data.t[idx],
            t_star=None if data.t_star is None else data.t_star[idx],
        )

    return take(train_idx), take(val_idx)


def export_csv(data: LabeledDataset, path) -> None:
    """Dump a dataset to CSV for inspection: features, parent, fine label."""
    d = data.X.shape[1]
    with open(str(path), "w") as f:
        f.write(",".join([f"x{j}" for j in range(d)] + ["t", "t_star"]) + "\n")
        for i in range(len(data)):
            fine = "" if data.t_star is None else str(int(data.t_star[i]))
            values = [f"{v:.12g}" for v in data.X[i]]
            f.write(",".join(values + [str(int(data.t[i])), fine]) + "\n")
