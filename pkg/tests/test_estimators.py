import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from hyperplap import HypergraphClassifier, HypergraphInterpolator
from hyperplap.geometry import sample_gaussian_clusters

pytestmark = pytest.mark.filterwarnings("ignore::UserWarning")


def test_params_and_clone():
    est = HypergraphInterpolator(method="gpl", k=None, eps=0.1, p=3.0)
    assert clone(est).get_params() == est.get_params()
    est.set_params(p=2.5)
    assert est.p == 2.5


def test_interpolator_path():
    X = np.linspace(0, 1, 41)[:, None]
    y = np.full(41, np.nan)
    y[0], y[-1] = 0.0, 1.0
    est = HypergraphInterpolator(method="gpl", k=None, eps=0.03, epochs=3000, tol=1e-10)
    est.fit(X, y)
    np.testing.assert_allclose(est.transduction_, X[:, 0], atol=1e-3)
    assert est.predict([[0.5]])[0] == pytest.approx(0.5, abs=1e-3)
    assert est.score(X, X[:, 0]) > 0.999


def test_classifier_clusters():
    cloud, truth = sample_gaussian_clusters([[0, 0], [6, 0]], 0.5, 40, 2)
    y = np.full(80, -1)
    y[[0, 1, 40, 41]] = truth[[0, 1, 40, 41]]
    clf = HypergraphClassifier(k=6, epochs=300).fit(cloud.points, y)
    np.testing.assert_array_equal(clf.classes_, [0, 1])
    assert clf.score(cloud.points, truth) == 1.0
    assert clf.decision_function(cloud.points[:3]).shape == (3, 2)


def test_validation():
    X = np.random.default_rng(0).random((10, 2))
    with pytest.raises(NotFittedError):
        HypergraphInterpolator().predict(X)
    with pytest.raises(ValueError, match="labelled"):
        HypergraphInterpolator(k=3).fit(X, np.full(10, np.nan))
    with pytest.raises(ValueError, match="exactly one"):
        HypergraphInterpolator(k=3, eps=0.1).fit(X, np.r_[1.0, np.full(9, np.nan)])
    with pytest.raises(ValueError, match="method"):
        HypergraphInterpolator(method="x", k=3).fit(X, np.r_[1.0, np.full(9, np.nan)])
    with pytest.raises(ValueError):
        HypergraphClassifier(k=3).fit(X, np.full(10, -1))
    est = HypergraphInterpolator(k=3).fit(X, np.r_[1.0, np.full(9, np.nan)])
    with pytest.raises(ValueError, match="features"):
        est.predict(np.zeros((2, 3)))
