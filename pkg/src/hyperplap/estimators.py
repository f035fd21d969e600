"""scikit-learn style wrappers around graph construction and the solver.

Both estimators are transductive: ``fit`` solves on the training cloud and
``predict`` answers with the value at the nearest fitted point.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.utils.validation import (check_array, check_consistent_length, check_is_fitted,
                                      check_X_y, column_or_1d)

from .geometry import LabelConstraints, PointCloud
from .hypergraph import WeightScheme, build_structure
from .solver import SaddleProblem, SolverConfig, run
from .ssl import ClassLabels, one_vs_rest


class _GraphParamsMixin:
    def _structure(self, X):
        if self.method not in ("hpl", "gpl"):
            raise ValueError(f"method must be 'hpl' or 'gpl', got {self.method!r}")
        if (self.k is None) == (self.eps is None):
            raise ValueError("set exactly one of k and eps")
        scheme = self.weights
        if not isinstance(scheme, WeightScheme):
            scheme = WeightScheme.parse(scheme)
        graph = ("knn", int(self.k)) if self.k is not None else ("eps", float(self.eps))
        cloud = PointCloud(X)
        return cloud, build_structure(cloud, self.method, graph, scheme)

    def _config(self):
        return SolverConfig(epochs=self.epochs, tol=self.tol, seed=self.seed,
                            step_ratio=self.step_ratio)

    def _nearest(self, X):
        check_is_fitted(self, "transduction_")
        X = check_array(X)
        if X.shape[1] != self.X_.shape[1]:
            raise ValueError(f"X has {X.shape[1]} features, fitted with {self.X_.shape[1]}")
        _, idx = self._tree.query(X, k=1)
        return idx


class HypergraphInterpolator(_GraphParamsMixin, RegressorMixin, BaseEstimator):
    """Interpolate sparse labels by p-Laplacian minimisation.

    Parameters
    ----------
    method : {'hpl', 'gpl'}
        Hypergraph energy or the pairwise graph baseline.
    k, eps : int or float
        Exactly one of them selects k-NN or epsilon-ball structure.
    p : float
    weights : str or WeightScheme
        ``'homogeneous'`` or ``'selftuning:K0'``.
    epochs, tol, step_ratio, seed
        Passed to :class:`~hyperplap.solver.SolverConfig`.

    Attributes
    ----------
    transduction_ : ndarray of shape (n_samples,)
        Solution on the training points.
    hypergraph_, diagnostics_
    """

    def __init__(self, method="hpl", k=10, eps=None, p=2.0, weights="homogeneous",
                 epochs=500, tol=1e-6, step_ratio=None, seed=0):
        self.method = method
        self.k = k
        self.eps = eps
        self.p = p
        self.weights = weights
        self.epochs = epochs
        self.tol = tol
        self.step_ratio = step_ratio
        self.seed = seed

    def fit(self, X, y):
        """``y`` holds the known values and NaN for unlabelled points."""
        X = check_array(X)
        y = column_or_1d(y).astype(np.float64)
        check_consistent_length(X, y)
        if np.any(np.isinf(y)):
            raise ValueError("y must be finite or NaN")
        known = np.flatnonzero(~np.isnan(y))
        if len(known) == 0:
            raise ValueError("y has no labelled entries")
        cloud, hg = self._structure(X)
        problem = SaddleProblem(hg, LabelConstraints(known, y[known]), self.p)
        self.transduction_, self.diagnostics_ = run(problem, self._config())
        self.hypergraph_ = hg
        self.X_ = cloud.points
        self._tree = cKDTree(self.X_)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        idx = self._nearest(X)
        return self.transduction_[idx]


class HypergraphClassifier(_GraphParamsMixin, ClassifierMixin, BaseEstimator):
    """One-vs-rest semi-supervised classifier; ``y == -1`` marks unlabelled points.

    Same parameters as :class:`HypergraphInterpolator`, with self-tuning
    weights (``K0 = 10``) by default.

    Attributes
    ----------
    classes_ : ndarray
    transduction_ : ndarray of shape (n_samples,)
        Predicted class of every training point.
    label_distributions_ : ndarray of shape (n_samples, n_classes)
        Per-class indicator solutions.
    """

    def __init__(self, method="hpl", k=10, eps=None, p=2.0, weights="selftuning:10",
                 epochs=500, tol=1e-6, step_ratio=None, seed=0):
        self.method = method
        self.k = k
        self.eps = eps
        self.p = p
        self.weights = weights
        self.epochs = epochs
        self.tol = tol
        self.step_ratio = step_ratio
        self.seed = seed

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        known = np.flatnonzero(y != -1)
        if len(known) == 0:
            raise ValueError("y has no labelled entries (all -1)")
        self.classes_ = np.unique(y[known])
        labels = ClassLabels.from_arrays(known, y[known], self.classes_.tolist())
        cloud, hg = self._structure(X)
        pred, scores, _ = one_vs_rest(cloud, hg, labels, self.p, self._config(),
                                      return_scores=True)
        self.transduction_ = np.asarray(pred, dtype=self.classes_.dtype)
        self.label_distributions_ = scores
        self.hypergraph_ = hg
        self.X_ = cloud.points
        self._tree = cKDTree(self.X_)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        idx = self._nearest(X)
        return self.transduction_[idx]

    def decision_function(self, X):
        idx = self._nearest(X)
        return self.label_distributions_[idx]
