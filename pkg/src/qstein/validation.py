"""Input validation helpers shared by the functional core and the estimators."""

from __future__ import annotations

import numpy as np

PROB_TOL = 1e-12


def as_matrix(a) -> np.ndarray:
    """Return ``a`` as a square complex 2-D array (accepts operator objects)."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if m.shape[0] < 1:
        raise ValueError("matrix dimension must be at least 1")
    return m


def hermiticity_error(m: np.ndarray) -> float:
    return float(np.abs(m - m.conj().T).max())


def check_hermitian(a, tol: float = 1e-10) -> np.ndarray:
    m = as_matrix(a)
    dev = hermiticity_error(m)
    if dev > tol:
        raise ValueError(f"matrix is not Hermitian: max |A - A*| = {dev:.3e} > {tol:.1e}")
    return (m + m.conj().T) / 2


def check_probability_vector(p, name: str = "p", tol: float = PROB_TOL) -> np.ndarray:
    v = np.asarray(p, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D vector")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    if v.min() < -tol:
        raise ValueError(f"{name} has a negative entry {v.min():.3e}")
    total = v.sum()
    if abs(total - 1.0) > max(tol, tol * v.size):
        raise ValueError(f"{name} sums to {total!r}, not 1")
    return np.clip(v, 0.0, None)


def check_stochastic_matrix(P, tol: float = 1e-12) -> np.ndarray:
    m = np.asarray(P, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise ValueError(f"transition matrix must be square, got shape {m.shape}")
    if m.min() < -tol:
        raise ValueError("transition matrix has negative entries")
    rows = m.sum(axis=1)
    bad = np.abs(rows - 1.0) > tol
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise ValueError(f"row {i} of the transition matrix sums to {rows[i]!r}, not 1")
    return np.clip(m, 0.0, None)


def check_epsilon(epsilon: float) -> float:
    eps = float(epsilon)
    if not 0.0 < eps < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon!r}")
    return eps


def check_same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
