"""Clustering metrics, the k-means baseline, and graph/embedding exports.

Unsupervised clustering accuracy is the best fraction of examples whose
assigned cluster maps onto their true label under a one-to-one mapping,
computed as a maximum-weight matching on the cluster/label contingency
table. When there are more clusters than labels, unmatched clusters
contribute nothing.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .head import Annotation
from .regularizers import check_activities


@dataclass
class ClusterMapping:
    """Optimal one-to-one cluster-to-label mapping and its accuracy."""

    mapping: dict[int, int]   # matched cluster id -> true label
    unmatched: list[int]      # cluster ids left without a label
    accuracy: float


def clustering_accuracy(assignments, truth) -> ClusterMapping:
    """Best one-to-one accuracy between cluster assignments and true labels.

    Works on arbitrary (hashable-as-int) label values and allows more
    clusters than labels. The matching maximizes the total count on the
    contingency table, which equals an exhaustive search over injective
    mappings.
    """
    assignments = np.asarray(assignments)
    truth = np.asarray(truth)
    if assignments.shape != truth.shape or assignments.ndim != 1:
        raise ValueError(
            f"assignments and truth must be equal-length vectors, got {assignments.shape} vs {truth.shape}"
        )
    m = assignments.shape[0]
    clusters, a_idx = np.unique(assignments, return_inverse=True)
    labels, t_idx = np.unique(truth, return_inverse=True)
    table = np.zeros((len(clusters), len(labels)), dtype=np.int64)
    np.add.at(table, (a_idx, t_idx), 1)
    rows, cols = linear_sum_assignment(table, maximize=True)
    mapping = {int(clusters[r]): int(labels[c]) for r, c in zip(rows, cols)}
    unmatched = [int(c) for c in clusters if int(c) not in mapping]
    accuracy = float(table[rows, cols].sum()) / m
    return ClusterMapping(mapping=mapping, unmatched=unmatched, accuracy=accuracy)


def parent_accuracy(parent_probs, t) -> float:
    """Fraction of rows whose argmax parent (ties to lowest index) equals t."""
    parent_probs = np.asarray(parent_probs, dtype=np.float64)
    t = np.asarray(t)
    if parent_probs.ndim != 2 or parent_probs.shape[0] != t.shape[0]:
        raise ValueError(
            f"probability rows {parent_probs.shape} do not match {t.shape[0]} labels"
        )
    predicted = np.argmax(parent_probs, axis=1) + 1
    return float(np.mean(predicted == t))


def _plus_plus_centers(x: np.ndarray, n_clusters: int, rng) -> np.ndarray:
    """k-means++ seeding: D^2-weighted draws after a uniform first center."""
    m = x.shape[0]
    centers = np.empty((n_clusters, x.shape[1]))
    centers[0] = x[rng.integers(m)]
    dist_sq = np.sum((x - centers[0]) ** 2, axis=1)
    for i in range(1, n_clusters):
        total = dist_sq.sum()
        if total == 0.0:
            centers[i] = x[rng.integers(m)]
            continue
        centers[i] = x[rng.choice(m, p=dist_sq / total)]
        dist_sq = np.minimum(dist_sq, np.sum((x - centers[i]) ** 2, axis=1))
    return centers


def kmeans(x, n_clusters: int, seed: int = 0, max_iter: int = 100, restarts: int = 10):
    """Lloyd's algorithm with k-means++ seeding; best of ``restarts`` by WSS.

    Deterministic for a fixed seed. Returns 1-based assignments.
    """
    x = np.asarray(x, dtype=np.float64)
    m = x.shape[0]
    if n_clusters > m:
        raise ValueError(f"cannot form {n_clusters} clusters from {m} points")
    rng = np.random.default_rng(seed)
    best_labels, best_wss = None, np.inf
    for _ in range(restarts):
        centers = _plus_plus_centers(x, n_clusters, rng)
        labels = None
        for _ in range(max_iter):
            dist_sq = (
                np.sum(x * x, axis=1)[:, None]
                - 2.0 * (x @ centers.T)
                + np.sum(centers * centers, axis=1)[None, :]
            )
            new_labels = np.argmin(dist_sq, axis=1)
            if labels is not None and np.array_equal(new_labels, labels):
                break
            labels = new_labels
            for j in range(n_clusters):
                mask = labels == j
                if mask.any():
                    centers[j] = x[mask].mean(axis=0)
                else:
                    # re-seed an empty cluster at the point farthest from its center
                    worst = np.argmax(np.min(dist_sq, axis=1))
                    centers[j] = x[worst]
        wss = float(np.sum((x - centers[labels]) ** 2))
        if wss < best_wss:
            best_wss, best_labels = wss, labels
    return best_labels + 1


def kmeans_within_cluster_ss(x, assignments) -> float:
    """Within-cluster sum of squares for given assignments."""
    x = np.asarray(x, dtype=np.float64)
    assignments = np.asarray(assignments)
    wss = 0.0
    for c in np.unique(assignments):
        pts = x[assignments == c]
        wss += float(np.sum((pts - pts.mean(axis=0)) ** 2))
    return wss


def kmeans_per_parent(x, t, k: int, seed: int = 0, **kwargs):
    """Baseline matching the comparison protocol: cluster within each parent.

    The data is pre-divided by the provided parent labels, each subset is
    clustered into k clusters, and the clusterings are combined with
    disjoint ids ``(parent-1)*k + local``.
    """
    x = np.asarray(x, dtype=np.float64)
    t = np.asarray(t)
    combined = np.zeros(len(t), dtype=np.int64)
    for i, parent in enumerate(np.unique(t)):
        idx = np.nonzero(t == parent)[0]
        local = kmeans(x[idx], k, seed=seed + i, **kwargs)
        combined[idx] = (int(parent) - 1) * k + local
    return combined


def export_graph(rows, threshold: float, path, truth=None) -> None:
    """Write the similarity graph of the given rows as an edge list.

    Edges are the upper-triangle entries of ``rows @ rows.T`` strictly above
    the threshold, one ``i j weight`` line each (1-based, 6 significant
    digits). When ``truth`` labels are given, ``# vertex i label`` comment
    lines precede the edges. Intended for small subsets; the matrix is
    quadratic in the number of rows.
    """
    rows = check_activities(rows)
    sim = rows @ rows.T
    m = sim.shape[0]
    with open(str(path), "w") as f:
        if truth is not None:
            truth = np.asarray(truth)
            if truth.shape[0] != m:
                raise ValueError(f"{truth.shape[0]} truth labels for {m} rows")
            for i in range(m):
                f.write(f"# vertex {i + 1} {int(truth[i])}\n")
        for i in range(m):
            for j in range(i + 1, m):
                if sim[i, j] > threshold:
                    f.write(f"{i + 1} {j + 1} {sim[i, j]:.6g}\n")


def export_embeddings(z, annotations: list[Annotation], truth, path) -> None:
    """Write one CSV row per example: n Z-values, node, parent, sub, truth.

    Values carry 12 significant digits so a round-trip parse reproduces
    them. ``truth`` may be None, in which case the column holds -1.
    """
    z = np.asarray(z, dtype=np.float64)
    m, n = z.shape
    if len(annotations) != m:
        raise ValueError(f"{len(annotations)} annotations for {m} rows")
    if truth is None:
        truth = np.full(m, -1, dtype=np.int64)
    else:
        truth = np.asarray(truth)
        if truth.shape[0] != m:
            raise ValueError(f"{truth.shape[0]} truth labels for {m} rows")
    with open(str(path), "w") as f:
        f.write(",".join([f"z{j}" for j in range(n)] + ["node", "parent", "sub", "truth"]) + "\n")
        for i, a in enumerate(annotations):
            values = [f"{v:.12g}" for v in z[i]]
            f.write(",".join(values + [str(a.node), str(a.parent), str(a.sub), str(int(truth[i]))]) + "\n")
