import numpy as np
import pytest

from hyperplap.geometry import PointCloud, sample_gaussian_clusters
from hyperplap.hypergraph import build_knn, build_pair_graph
from hyperplap.solver import SolverConfig
from hyperplap.ssl import (ClassLabels, MissingClassWarning, accuracy, load_class_labels,
                           mean_std, one_vs_rest, stratified_labels)

pytestmark = pytest.mark.filterwarnings("ignore::UserWarning")

TWO = PointCloud([0.0, 0.01, 0.02, 1.0, 1.01, 1.02])
CFG = SolverConfig(epochs=400, tol=1e-9)


@pytest.mark.parametrize("method", ["hpl", "gpl"])
def test_two_clusters(method):
    hg = build_knn(TWO, 3) if method == "hpl" else build_pair_graph(TWO, k=3)
    labels = ClassLabels.from_arrays([0, 4], [0, 1])
    np.testing.assert_array_equal(one_vs_rest(TWO, hg, labels, 2, CFG), [0, 0, 0, 1, 1, 1])


def test_all_labelled_returns_training():
    y = np.array([2, 0, 1, 1, 0, 2])
    labels = ClassLabels.from_arrays(np.arange(6), y)
    np.testing.assert_array_equal(one_vs_rest(TWO, build_knn(TWO, 3), labels, 2, CFG), y)


def test_single_class():
    labels = ClassLabels.from_arrays([0], ["a"])
    assert list(one_vs_rest(TWO, build_knn(TWO, 3), labels)) == ["a"] * 6


def three_class_instance():
    cloud, truth = sample_gaussian_clusters([[0, 0], [4, 0], [0, 4]], 0.6, 30, 3)
    labels = stratified_labels(truth, 0.1, 1)
    return cloud, truth, labels, build_knn(cloud, 6)


@pytest.mark.invariant
def test_class_permutation():
    cloud, truth, labels, hg = three_class_instance()
    base = one_vs_rest(cloud, hg, labels, 2, CFG)
    perm = {0: 2, 1: 0, 2: 1}
    relabelled = ClassLabels.from_arrays(labels.indices, [perm[c] for c in labels.labels])
    moved = one_vs_rest(cloud, hg, relabelled, 2, CFG)
    np.testing.assert_array_equal(moved, [perm[c] for c in base])


@pytest.mark.invariant
def test_vertex_reordering():
    cloud, truth, labels, _ = three_class_instance()
    base = one_vs_rest(cloud, build_knn(cloud, 6), labels, 2, CFG)
    order = np.random.default_rng(0).permutation(cloud.size)
    inv = np.argsort(order)
    moved_cloud = PointCloud(cloud.points[order])
    moved_labels = ClassLabels.from_arrays(inv[labels.indices], labels.labels)
    moved = one_vs_rest(moved_cloud, build_knn(moved_cloud, 6), moved_labels, 2, CFG)
    np.testing.assert_array_equal(moved[inv], base)


@pytest.mark.invariant
def test_indicator_solutions_in_unit_interval():
    cloud, truth, labels, hg = three_class_instance()
    _, scores, _ = one_vs_rest(cloud, hg, labels, 2, CFG, return_scores=True)
    assert scores.min() >= -1e-3 and scores.max() <= 1 + 1e-3


def test_ties_go_to_smaller_id():
    # vertex 1 is equidistant from both labels on a symmetric path
    cloud = PointCloud([0.0, 1.0, 2.0])
    hg = build_pair_graph(cloud, eps=1.0)
    labels = ClassLabels.from_arrays([0, 2], [7, 3])
    cfg = SolverConfig(epochs=3000, tol=0)
    _, scores, _ = one_vs_rest(cloud, hg, labels, 2, cfg, return_scores=True)
    if scores[1, 0] == scores[1, 1]:
        assert one_vs_rest(cloud, hg, labels, 2, cfg)[1] == 3
    assert labels.classes == (3, 7)


def test_missing_class_warns_and_empty_fails():
    labels = ClassLabels((0, 1, 2), {0: 0, 4: 1})
    with pytest.warns(MissingClassWarning):
        one_vs_rest(TWO, build_knn(TWO, 3), labels, 2, CFG)
    with pytest.raises(ValueError):
        one_vs_rest(TWO, build_knn(TWO, 3), ClassLabels((0,), {}))
    with pytest.raises(ValueError):
        ClassLabels((0,), {1: 5})


def test_accuracy():
    assert accuracy([1, 2, 3], [1, 2, 3]) == 1.0
    assert accuracy([0, 1, 1, 0], [0, 1, 0, 0]) == 0.75
    assert accuracy([0, 1, 1, 0, 5], [0, 1, 0, 0, 9], exclude_training=True, training=[4]) == 0.75
    with pytest.raises(ValueError):
        accuracy([0, 1], [0])
    with pytest.raises(ValueError):
        accuracy([0], [0], exclude_training=True)


def test_mean_std():
    m, s = mean_std([0.9, 0.95, 1.0])
    assert m == pytest.approx(0.95)
    assert s == pytest.approx(0.05)
    assert mean_std([0.5]) == (0.5, 0.0)


def test_stratified_labels():
    truth = np.repeat([0, 1, 2, 3], 500)
    lab = stratified_labels(truth, 0.005, 4)
    assert lab.indices.size == 10
    counts = np.bincount(truth[lab.indices])
    assert counts.min() >= 2 and counts.max() <= 3
    np.testing.assert_array_equal(truth[lab.indices], lab.labels)


def test_load_class_labels(tmp_path):
    f = tmp_path / "l.csv"
    f.write_text("0,cat\n3,dog\n\n5,cat\n")
    lab = load_class_labels(f)
    assert lab.classes == ("cat", "dog") and lab.assignments == {0: "cat", 3: "dog", 5: "cat"}
    f.write_text("1,2\n1,3\n")
    with pytest.raises(Exception, match="duplicate"):
        load_class_labels(f)
