"""Von Neumann entropy, relative entropy with the support convention, and
classical Shannon / Kullback-Leibler quantities.

Extended reals are plain floats: ``math.inf`` marks a failed support
condition and is the only way an infinite value is produced.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .operators import SUPPORT_FLOOR, as_density
from .validation import check_probability_vector, check_same_dim

SUPPORT_LEAK_TOL = 1e-10
NEGATIVE_SLACK = 1e-9


def _entropy_of_spectrum(w: np.ndarray) -> float:
    w = w[w > SUPPORT_FLOOR]
    return float(-(w * np.log(w)).sum())


def von_neumann_entropy(rho) -> float:
    """S(rho) = -tr rho log rho in nats."""
    return _entropy_of_spectrum(as_density(rho).eigenvalues)


def shannon_entropy(p) -> float:
    p = np.asarray(p, dtype=float)
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def _clamp(value: float, what: str) -> float:
    if value < -NEGATIVE_SLACK:
        raise ArithmeticError(f"{what} evaluated to {value!r} < 0; numerical failure")
    return max(value, 0.0)


def relative_entropy(sigma, tau, support_leak_tol: float = SUPPORT_LEAK_TOL) -> float:
    """Umegaki relative entropy S(sigma, tau) in nats, or ``inf``.

    The support condition is tested through the mass that ``sigma`` puts
    outside the support of ``tau``; the log of ``tau`` is taken on its
    support only.
    """
    s, t = as_density(sigma), as_density(tau)
    check_same_dim(s.matrix, t.matrix)
    wt, vt = np.linalg.eigh(t.matrix)
    on = wt > SUPPORT_FLOOR
    # sigma expressed in tau's eigenbasis; its diagonal gives the masses
    diag = np.einsum("ij,ik,kj->j", vt.conj(), s.matrix, vt).real
    leak = float(diag[~on].sum())
    if leak > support_leak_tol:
        return math.inf
    cross = float((diag[on] * np.log(wt[on])).sum())
    value = -von_neumann_entropy(s) - cross
    return _clamp(value, "relative entropy")


def classical_kl(p, q) -> float:
    """Kullback-Leibler divergence sum p log(p/q) with 0 log 0 = 0."""
    p = check_probability_vector(p, "p")
    q = check_probability_vector(q, "q")
    if p.shape != q.shape:
        raise ValueError(f"length mismatch: {p.size} vs {q.size}")
    on = p > 0
    if np.any(q[on] <= 0):
        return math.inf
    return _clamp(float((p[on] * np.log(p[on] / q[on])).sum()), "KL divergence")


def cross_entropy_term(rho, log_reference: np.ndarray) -> float:
    """tr(rho · L) for a Hermitian L, returned as a real number."""
    m = np.asarray(rho, dtype=complex)
    return float(np.einsum("ij,ji->", m, log_reference).real)


@dataclass
class MeanRelEntropySequence:
    """Per-site block relative entropies S(psi^(n), phi^(n))/n for n = 1..n_max."""

    values: list[tuple[int, float]]
    sup_estimate: float
    monotone: bool = True
    truncated_at: int | None = None
    violations: list[int] = field(default_factory=list)


def mean_relative_entropy_sequence(psi, phi, n_max: int, slack: float = 1e-9) -> MeanRelEntropySequence:
    """Exact finite-n sequence of mean relative entropies.

    ``psi`` and ``phi`` are state models exposing ``block_density(n)``. An
    infinite term ends the sequence; that entry is kept and ``truncated_at``
    records its block length.
    """
    if n_max < 1:
        raise ValueError("n_max must be a positive integer")
    values: list[tuple[int, float]] = []
    violations: list[int] = []
    truncated = None
    for n in range(1, n_max + 1):
        rel = relative_entropy(psi.block_density(n), phi.block_density(n))
        values.append((n, rel / n))
        if math.isinf(rel):
            truncated = n
            break
        if len(values) > 1 and values[-1][1] < values[-2][1] - slack:
            violations.append(n)
    return MeanRelEntropySequence(
        values=values,
        sup_estimate=values[-1][1],
        monotone=not violations,
        truncated_at=truncated,
        violations=violations,
    )


__all__ = [
    "MeanRelEntropySequence",
    "classical_kl",
    "cross_entropy_term",
    "mean_relative_entropy_sequence",
    "relative_entropy",
    "shannon_entropy",
    "von_neumann_entropy",
]
