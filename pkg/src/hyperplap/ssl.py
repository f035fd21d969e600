"""One-vs-rest semi-supervised classification on a (hyper)graph."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import EmptyInputError, LabelConstraints, ParseError
from .solver import SaddleProblem, SolverConfig, run


class MissingClassWarning(UserWarning):
    """A declared class has no labelled vertex."""


@dataclass(frozen=True)
class ClassLabels:
    """Training set: vertex index -> class id, plus the list of classes."""

    classes: tuple
    assignments: dict

    def __post_init__(self):
        classes = tuple(sorted(set(self.classes), key=_id_key))
        if len(classes) != len(tuple(self.classes)):
            raise ValueError("class ids must be distinct")
        assign = {int(i): c for i, c in self.assignments.items()}
        unknown = {c for c in assign.values()} - set(classes)
        if unknown:
            raise ValueError(f"assignments use undeclared classes {sorted(unknown)}")
        object.__setattr__(self, "classes", classes)
        object.__setattr__(self, "assignments", assign)

    @classmethod
    def from_arrays(cls, indices, labels, classes=None):
        indices = [int(i) for i in np.asarray(indices).ravel()]
        labels = [_as_id(c) for c in np.asarray(labels).ravel()]
        if len(indices) != len(labels):
            raise ValueError("indices and labels differ in length")
        if len(set(indices)) != len(indices):
            raise ValueError("a vertex is labelled twice")
        if classes is None:
            classes = sorted(set(labels))
        return cls(tuple(classes), dict(zip(indices, labels)))

    @property
    def indices(self):
        return np.array(sorted(self.assignments), dtype=np.int64)

    @property
    def labels(self):
        return [self.assignments[i] for i in sorted(self.assignments)]

    def indicator(self, cls_id):
        """Constraints ``u_i = 1`` for vertices of ``cls_id``, 0 for the other labelled ones."""
        idx = self.indices
        vals = [1.0 if self.assignments[i] == cls_id else 0.0 for i in idx]
        return LabelConstraints(idx, vals)


def _id_key(c):
    return (isinstance(c, str), c)


def _as_id(c):
    return c.item() if isinstance(c, np.generic) else c


def stratified_labels(truth, rate, seed):
    """Pick ``round(rate * n)`` labelled vertices, at least one per class.

    Labels are split across classes as evenly as possible, then drawn
    uniformly inside each class.
    """
    truth = np.asarray(truth)
    classes = np.unique(truth)
    total = max(int(round(rate * len(truth))), len(classes))
    rng = np.random.default_rng(seed)
    base, extra = divmod(total, len(classes))
    bonus = set(rng.permutation(len(classes))[:extra].tolist())
    picked = []
    for j, c in enumerate(classes):
        pool = np.flatnonzero(truth == c)
        take = min(len(pool), base + (j in bonus))
        picked.append(rng.choice(pool, size=take, replace=False))
    idx = np.sort(np.concatenate(picked))
    return ClassLabels.from_arrays(idx, truth[idx], classes.tolist())


def one_vs_rest(cloud, hg, labels, p=2.0, config=None, return_scores=False):
    """Label every vertex by the largest of the per-class indicator solutions.

    Parameters
    ----------
    cloud : PointCloud or None
        Only used to check the vertex count.
    hg : Hypergraph
        Shared structure; pair graphs give the graph baseline.
    labels : ClassLabels
    p : float
    config : SolverConfig, optional
    return_scores : bool
        Also return the ``(n, L)`` matrix of class solutions (columns in
        ``labels.classes`` order) and the per-class diagnostics.

    Returns
    -------
    numpy.ndarray
        Predicted class id per vertex (object dtype unless ids are numeric).
    """
    if not labels.assignments:
        raise ValueError("the label set is empty")
    n = hg.n_vertices
    if cloud is not None and cloud.size != n:
        raise ValueError("cloud and hypergraph disagree on the number of vertices")
    config = config or SolverConfig()
    idx = labels.indices
    if idx.max() >= n:
        raise IndexError(f"labelled vertex {int(idx.max())} out of range")
    present = set(labels.assignments.values())
    for c in labels.classes:
        if c not in present:
            warnings.warn(f"class {c!r} has no labelled vertex", MissingClassWarning, stacklevel=2)

    scores = np.zeros((n, len(labels.classes)))
    diags = []
    for j, c in enumerate(labels.classes):
        if len(labels.classes) == 1:
            scores[:, j] = 1.0
            diags.append(None)
            continue
        problem = SaddleProblem(hg, labels.indicator(c), p)
        u, diag = run(problem, config)
        scores[:, j] = u
        diags.append(diag)
    # argmax returns the first maximum, i.e. the smaller class id
    pick = np.argmax(scores, axis=1)
    classes = np.asarray(labels.classes)
    pred = classes[pick]
    pred[idx] = np.asarray(labels.labels, dtype=pred.dtype)
    if return_scores:
        return pred, scores, diags
    return pred


def accuracy(predicted, truth, exclude_training=False, training=None):
    """Fraction of matching entries, optionally over unlabelled vertices only."""
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    if predicted.shape != truth.shape:
        raise ValueError(f"length mismatch: {predicted.shape} vs {truth.shape}")
    keep = np.ones(len(truth), dtype=bool)
    if exclude_training:
        if training is None:
            raise ValueError("exclude_training needs the training indices")
        keep[np.asarray(list(training), dtype=np.int64)] = False
    if not keep.any():
        raise ValueError("no entries to evaluate")
    return float(np.mean(predicted[keep] == truth[keep]))


def mean_std(values):
    """Mean and sample standard deviation (0 for a single value)."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("no values")
    return float(v.mean()), float(v.std(ddof=1)) if v.size > 1 else 0.0


def load_class_labels(path):
    """Read ``index,class`` rows; integer-looking class ids become ints."""
    assign = {}
    with open(Path(path), newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise ParseError("expected 'index,class'", lineno)
            try:
                i = int(row[0])
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
            c = row[1].strip()
            try:
                c = int(c)
            except ValueError:
                pass
            if i in assign:
                raise ParseError(f"duplicate index {i}", lineno)
            assign[i] = c
    if not assign:
        raise EmptyInputError(f"{path}: no labels")
    return ClassLabels(tuple(set(assign.values())), assign)
