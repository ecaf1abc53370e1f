"""Clustering accuracy vs exhaustive search, k-means baseline, exports."""

import itertools

import numpy as np
import pytest

from acol.datasets import synthetic_blobs
from acol.evaluation import (
    clustering_accuracy,
    export_embeddings,
    export_graph,
    kmeans,
    kmeans_per_parent,
    kmeans_within_cluster_ss,
    parent_accuracy,
)
from acol.head import AcolHead, assign_annotations


def exhaustive_accuracy(assignments, truth):
    """Brute-force best injective cluster-to-label mapping accuracy."""
    assignments = np.asarray(assignments)
    truth = np.asarray(truth)
    clusters = sorted(set(int(v) for v in assignments))
    labels = sorted(set(int(v) for v in truth))
    counts = {
        (c, l): int(np.sum((assignments == c) & (truth == l)))
        for c in clusters
        for l in labels
    }
    best = 0
    if len(clusters) <= len(labels):
        for perm in itertools.permutations(labels, len(clusters)):
            best = max(best, sum(counts[c, l] for c, l in zip(clusters, perm)))
    else:
        for perm in itertools.permutations(clusters, len(labels)):
            best = max(best, sum(counts[c, l] for c, l in zip(perm, labels)))
    return best / len(assignments)


def test_accuracy_equals_exhaustive_on_random_instances():
    rng = np.random.default_rng(21)
    for _ in range(60):
        m = int(rng.integers(2, 51))
        n_clusters = int(rng.integers(1, 7))
        n_labels = int(rng.integers(1, 7))
        assignments = rng.integers(1, n_clusters + 1, size=m)
        truth = rng.integers(0, n_labels, size=m)
        result = clustering_accuracy(assignments, truth)
        assert result.accuracy == pytest.approx(
            exhaustive_accuracy(assignments, truth), abs=1e-12
        )


def test_accuracy_perfect_relabeling():
    truth = np.array([0, 0, 1, 1, 2, 2])
    assignments = np.array([5, 5, 3, 3, 9, 9])  # a pure relabeling
    result = clustering_accuracy(assignments, truth)
    assert result.accuracy == 1.0
    assert result.mapping == {5: 0, 3: 1, 9: 2}
    assert result.unmatched == []


def test_accuracy_invariant_to_cluster_relabeling():
    rng = np.random.default_rng(22)
    truth = rng.integers(0, 4, size=40)
    assignments = rng.integers(1, 5, size=40)
    base = clustering_accuracy(assignments, truth).accuracy
    relabel = {1: 17, 2: 3, 3: 99, 4: 8}
    shuffled = np.array([relabel[int(a)] for a in assignments])
    assert clustering_accuracy(shuffled, truth).accuracy == pytest.approx(base, abs=1e-12)


def test_accuracy_beats_every_random_injective_mapping():
    rng = np.random.default_rng(23)
    truth = rng.integers(0, 5, size=60)
    assignments = rng.integers(1, 6, size=60)
    opt = clustering_accuracy(assignments, truth).accuracy
    labels = list(range(5))
    for _ in range(50):
        perm = rng.permutation(labels)
        acc = np.mean([perm[int(a) - 1] == t for a, t in zip(assignments, truth)])
        assert acc <= opt + 1e-12


def test_accuracy_more_clusters_than_labels():
    truth = np.array([0, 0, 0, 1, 1, 1])
    assignments = np.array([1, 1, 2, 3, 3, 4])  # 4 clusters, 2 labels
    result = clustering_accuracy(assignments, truth)
    assert result.accuracy == pytest.approx(4 / 6)
    assert sorted(result.unmatched) == sorted(
        set(range(1, 5)) - set(result.mapping)
    )
    assert len(result.mapping) == 2


def test_accuracy_input_validation():
    with pytest.raises(ValueError, match="equal-length"):
        clustering_accuracy(np.array([1, 2]), np.array([1, 2, 3]))


def test_parent_accuracy_argmax_rule():
    probs = np.array([[0.9, 0.1], [0.2, 0.8], [0.5, 0.5]])  # tie -> parent 1
    t = np.array([1, 2, 1])
    assert parent_accuracy(probs, t) == 1.0
    assert parent_accuracy(probs, np.array([2, 2, 2])) == pytest.approx(1 / 3)
    with pytest.raises(ValueError, match="labels"):
        parent_accuracy(probs, np.array([1, 2]))


# --- k-means ----------------------------------------------------------------


def test_kmeans_recovers_separated_blobs():
    data = synthetic_blobs(n_parents=2, k=3, per_cluster=60, dim=5, separation=10.0, seed=31)
    labels = kmeans(data.X, 6, seed=0)
    assert labels.min() == 1 and labels.max() <= 6
    assert clustering_accuracy(labels, data.t_star).accuracy >= 0.99


def test_kmeans_each_point_its_own_cluster():
    rng = np.random.default_rng(32)
    x = rng.normal(size=(5, 3)) * 10.0
    labels = kmeans(x, 5, seed=1)
    assert sorted(labels) == [1, 2, 3, 4, 5]
    assert kmeans_within_cluster_ss(x, labels) == pytest.approx(0.0, abs=1e-18)


def test_kmeans_deterministic_and_seed_sensitive():
    rng = np.random.default_rng(33)
    x = rng.normal(size=(80, 4))
    a = kmeans(x, 4, seed=7)
    b = kmeans(x, 4, seed=7)
    assert np.array_equal(a, b)


def test_kmeans_rejects_too_many_clusters():
    with pytest.raises(ValueError, match="cannot form"):
        kmeans(np.zeros((3, 2)), 4)


def test_kmeans_wss_no_worse_than_random_assignment():
    rng = np.random.default_rng(34)
    x = rng.normal(size=(90, 3))
    labels = kmeans(x, 5, seed=2)
    wss = kmeans_within_cluster_ss(x, labels)
    for trial in range(10):
        random_labels = rng.integers(1, 6, size=90)
        assert wss <= kmeans_within_cluster_ss(x, random_labels) + 1e-9


def test_kmeans_restarts_never_hurt():
    rng = np.random.default_rng(35)
    x = np.vstack([rng.normal(size=(30, 2)), rng.normal(size=(30, 2)) + 4.0])
    one = kmeans_within_cluster_ss(x, kmeans(x, 3, seed=4, restarts=1))
    ten = kmeans_within_cluster_ss(x, kmeans(x, 3, seed=4, restarts=10))
    assert ten <= one + 1e-9


def test_kmeans_per_parent_id_ranges():
    data = synthetic_blobs(n_parents=2, k=2, per_cluster=40, dim=4, separation=9.0, seed=36)
    combined = kmeans_per_parent(data.X, data.t, k=2, seed=0)
    for parent in (1, 2):
        ids = set(int(v) for v in combined[data.t == parent])
        low, high = (parent - 1) * 2 + 1, parent * 2
        assert ids <= set(range(low, high + 1))
    # separable blobs: the combined clustering matches the fine truth
    assert clustering_accuracy(combined, data.t_star).accuracy >= 0.99


# --- exports ----------------------------------------------------------------


def parse_graph(path):
    vertices, edges = {}, {}
    for line in open(path):
        parts = line.split()
        if line.startswith("#"):
            vertices[int(parts[2])] = int(parts[3])
        else:
            i, j, w = int(parts[0]), int(parts[1]), float(parts[2])
            edges[i, j] = w
    return vertices, edges


def test_export_graph_recomputes_oracle(tmp_path):
    rng = np.random.default_rng(41)
    rows = rng.uniform(0.0, 1.5, size=(12, 4))
    truth = rng.integers(0, 3, size=12)
    path = tmp_path / "g.edges"
    threshold = 1.0
    export_graph(rows, threshold, path, truth=truth)
    vertices, edges = parse_graph(path)
    assert vertices == {i + 1: int(truth[i]) for i in range(12)}
    sim = rows @ rows.T
    for i in range(12):
        for j in range(i + 1, 12):
            if sim[i, j] > threshold:
                assert (i + 1, j + 1) in edges
                assert edges[i + 1, j + 1] == pytest.approx(sim[i, j], rel=1e-5)
            else:
                assert (i + 1, j + 1) not in edges
    # no self-loops, no lower triangle
    assert all(i < j for i, j in edges)


def test_export_graph_without_truth(tmp_path):
    rows = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    path = tmp_path / "g.edges"
    export_graph(rows, 0.5, path)
    text = path.read_text()
    assert "#" not in text
    assert text.strip() == "1 2 1"


def test_export_graph_truth_length_mismatch(tmp_path):
    with pytest.raises(ValueError, match="truth labels"):
        export_graph(np.ones((3, 2)), 0.0, tmp_path / "g", truth=np.array([1, 2]))


def test_export_embeddings_round_trip(tmp_path):
    head = AcolHead(2, 2)
    rng = np.random.default_rng(42)
    z = rng.normal(size=(9, head.n))
    anns = assign_annotations(z, head)
    truth = rng.integers(1, 5, size=9)
    path = tmp_path / "e.csv"
    export_embeddings(z, anns, truth, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "z0,z1,z2,z3,node,parent,sub,truth"
    assert len(lines) == 10
    for i, line in enumerate(lines[1:]):
        cells = line.split(",")
        back = np.array([float(v) for v in cells[: head.n]])
        assert np.allclose(back, z[i], rtol=1e-11)
        assert [int(c) for c in cells[head.n :]] == [
            anns[i].node,
            anns[i].parent,
            anns[i].sub,
            int(truth[i]),
        ]


def test_export_embeddings_without_truth(tmp_path):
    head = AcolHead(2, 1)
    z = np.array([[0.5, -0.5]])
    path = tmp_path / "e.csv"
    export_embeddings(z, assign_annotations(z, head), None, path)
    assert path.read_text().splitlines()[1].endswith(",-1")
    with pytest.raises(ValueError, match="annotations"):
        export_embeddings(z, [], None, path)
