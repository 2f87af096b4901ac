import numpy as np
from sklearn.base import clone

from qstein.estimators import NeymanPearsonTest, SeparatingProjector, TypeClassPinching
from qstein.operators import random_density
from qstein.pinching import build_type_classes, pinch


def test_pinching_transformer(rng):
    rhos = np.stack([random_density(4, rng).matrix for _ in range(3)])
    t = TypeClassPinching(n=2).fit(np.diag([0.7, 0.3]))
    out = t.transform(rhos)
    ref = pinch(rhos[1], build_type_classes(np.diag([0.7, 0.3]), 2)).matrix
    assert out.shape == rhos.shape and np.abs(out[1] - ref).max() < 1e-15
    assert t.n_types_ == 3
    assert clone(t).get_params() == {"n": 2, "grouping_tol": 1e-10}


def test_np_test_estimator():
    A, B = np.diag([0.9, 0.1]), np.eye(2) / 2
    est = NeymanPearsonTest(epsilon=0.15).fit(A, B)
    assert abs(est.predict_proba(A) - 0.9) < 1e-12
    assert abs(est.score(A, B) - np.log(2)) < 1e-12


def test_separating_estimator(skewed, uniform):
    est = SeparatingProjector(n=8, epsilon=0.15).fit(skewed, uniform)
    assert abs(est.predict_proba(skewed.block_density(8)) - est.report_.psi_mass) < 1e-12
