"""scikit-learn style wrappers around the functional core.

Inputs are density matrices rather than feature tables, so these follow the
estimator protocol (constructor hyperparameters, ``fit`` returning ``self``,
trailing-underscore fitted attributes) without pretending to accept X/y.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .aep import build_separating_projector
from .operators import as_density
from .pinching import build_type_classes, pinch
from .testing import beta_bracket


class TypeClassPinching(TransformerMixin, BaseEstimator):
    """Pinching onto the type classes of phi1 on n sites.

    ``fit(phi1)`` builds the decomposition; ``transform`` accepts one block
    density or a stack of shape (k, D, D).
    """

    def __init__(self, n: int = 1, grouping_tol: float = 1e-10):
        self.n = n
        self.grouping_tol = grouping_tol

    def fit(self, phi1, y=None):
        self.decomposition_ = build_type_classes(phi1, self.n, self.grouping_tol, require_faithful=False)
        self.n_types_ = len(self.decomposition_.types)
        return self

    def transform(self, rho):
        check_is_fitted(self, "decomposition_")
        arr = np.asarray(rho)
        if arr.ndim == 3:
            return np.stack([pinch(r, self.decomposition_).matrix for r in arr])
        return pinch(arr, self.decomposition_).matrix


class NeymanPearsonTest(BaseEstimator):
    """Projector test accepting psi with probability at least 1 - epsilon.

    ``fit(Dpsi, Dphi)`` stores the bracket and its witness projector;
    ``predict_proba(rho)`` is the acceptance probability tr(rho q).
    """

    def __init__(self, epsilon: float = 0.1, lambda_grid_size: int = 200):
        self.epsilon = epsilon
        self.lambda_grid_size = lambda_grid_size

    def fit(self, Dpsi, Dphi):
        self.bracket_ = beta_bracket(Dpsi, Dphi, self.epsilon, self.lambda_grid_size)
        self.projector_ = self.bracket_.projector()
        return self

    def predict_proba(self, rho) -> float:
        check_is_fitted(self, "projector_")
        return float(np.trace(as_density(rho).matrix @ self.projector_).real)

    def score(self, Dpsi, Dphi) -> float:
        """Per-test type-II exponent -log phi(q), or -inf if psi is not accepted."""
        check_is_fitted(self, "projector_")
        if self.predict_proba(Dpsi) < 1 - self.epsilon - 1e-10:
            return -np.inf
        return -float(np.log(self.predict_proba(Dphi)))


class SeparatingProjector(BaseEstimator):
    """Typical-window projector for a state model against an i.i.d. reference."""

    def __init__(self, n: int = 4, epsilon: float = 0.1):
        self.n = n
        self.epsilon = epsilon

    def fit(self, psi, phi):
        self.report_ = build_separating_projector(psi, phi, self.n, self.epsilon)
        self.projector_ = self.report_.projector()
        return self

    def predict_proba(self, rho) -> float:
        check_is_fitted(self, "projector_")
        return float(np.trace(as_density(rho).matrix @ self.projector_).real)


__all__ = ["NeymanPearsonTest", "SeparatingProjector", "TypeClassPinching"]
