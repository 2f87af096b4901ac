"""Stationary states on the one-dimensional chain.

Each model materializes its restriction to the interval {0, ..., n-1} as a
dense density operator. Site 0 is the most significant tensor factor, so
block indices read as base-d words x_0 x_1 ... x_{n-1}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np
from scipy.sparse.csgraph import connected_components

from .entropy import relative_entropy, shannon_entropy, von_neumann_entropy
from .operators import (
    SUPPORT_FLOOR,
    DensityOperator,
    as_density,
    check_dim,
    kron_all,
    tensor_power,
)
from .validation import check_probability_vector, check_stochastic_matrix


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def stationary_distribution(P: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Unique stationary vector of P; raises if the eigenvalue 1 is degenerate."""
    w, v = np.linalg.eig(P.T)
    ones = np.flatnonzero(np.abs(w - 1.0) < 1e-9)
    if len(ones) != 1:
        raise ValueError(
            f"transition matrix has {len(ones)} stationary directions; pass pi explicitly "
            "for reducible chains"
        )
    pi = np.real(v[:, ones[0]])
    pi = pi / pi.sum()
    if pi.min() < -tol:
        raise ValueError("stationary vector has negative entries")
    return np.clip(pi, 0.0, None) / np.clip(pi, 0.0, None).sum()


class StateModel:
    """Base class: a translation-invariant state given by its finite blocks."""

    site_dim: int

    def block_density(self, n: int) -> DensityOperator:
        raise NotImplementedError

    def one_site_density(self) -> DensityOperator:
        return self.block_density(1)

    @property
    def is_classical(self) -> bool:
        """True when every block is diagonal in the computational basis."""
        return False


@dataclass(frozen=True, eq=False)
class IID(StateModel):
    rho: DensityOperator

    def __post_init__(self):
        object.__setattr__(self, "rho", as_density(self.rho))

    @classmethod
    def diagonal(cls, probs) -> "IID":
        return cls(DensityOperator.diagonal(check_probability_vector(probs, "diagonal")))

    @property
    def site_dim(self) -> int:
        return self.rho.dim

    @property
    def is_classical(self) -> bool:
        m = self.rho.matrix
        return bool(np.abs(m - np.diag(np.diag(m))).max() <= 1e-14)

    def block_density(self, n: int) -> DensityOperator:
        return tensor_power(self.rho, n)

    def sequence_probabilities(self, n: int) -> np.ndarray:
        if not self.is_classical:
            raise ValueError("sequence probabilities need a diagonal single-site density")
        p = np.diag(self.rho.matrix).real.copy()
        check_dim(len(p) ** n, cap=1 << 24)
        return reduce(np.kron, [p] * n)


@dataclass(frozen=True, eq=False)
class MarkovLift(StateModel):
    """Diagonal state of a stationary Markov chain in the computational basis."""

    transition: np.ndarray
    pi: np.ndarray | None = None

    def __post_init__(self):
        P = check_stochastic_matrix(self.transition)
        if self.pi is None:
            pi = stationary_distribution(P)
        else:
            pi = check_probability_vector(self.pi, "pi")
            if pi.shape[0] != P.shape[0]:
                raise ValueError("pi and the transition matrix disagree in size")
            drift = np.abs(pi @ P - pi).max()
            if drift > 1e-10:
                raise ValueError(f"pi is not stationary for P (|pi P - pi| = {drift:.2e})")
        object.__setattr__(self, "transition", _readonly(P))
        object.__setattr__(self, "pi", _readonly(pi))

    @property
    def site_dim(self) -> int:
        return self.transition.shape[0]

    @property
    def is_classical(self) -> bool:
        return True

    def sequence_probabilities(self, n: int, initial: np.ndarray | None = None) -> np.ndarray:
        """Probabilities of all length-n words, ``initial`` overriding pi."""
        if n < 1:
            raise ValueError("n must be a positive integer")
        d = self.site_dim
        check_dim(d ** n, cap=1 << 24)
        v = np.array(self.pi if initial is None else initial, dtype=float)
        for k in range(1, n):
            last = np.arange(d ** k) % d
            v = (v[:, None] * self.transition[last, :]).ravel()
        return v

    def block_density(self, n: int) -> DensityOperator:
        check_dim(self.site_dim ** n)
        return DensityOperator(np.diag(self.sequence_probabilities(n)))

    def one_site_density(self) -> DensityOperator:
        return DensityOperator(np.diag(self.pi))

    def entropy_rate(self) -> float:
        P = self.transition
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(P > 0, -P * np.log(np.where(P > 0, P, 1.0)), 0.0)
        return float(self.pi @ terms.sum(axis=1))


@dataclass(frozen=True, eq=False)
class RotatedMarkovLift(MarkovLift):
    """Markov lift conjugated site-wise by a fixed unitary."""

    unitary: np.ndarray | None = None

    def __post_init__(self):
        super().__post_init__()
        U = np.asarray(self.unitary if self.unitary is not None else np.eye(self.site_dim), dtype=complex)
        if U.shape != (self.site_dim, self.site_dim):
            raise ValueError("unitary must be d x d")
        err = np.abs(U.conj().T @ U - np.eye(self.site_dim)).max()
        if err > 1e-10:
            raise ValueError(f"matrix is not unitary (|U*U - 1| = {err:.2e})")
        object.__setattr__(self, "unitary", _readonly(U))

    @property
    def is_classical(self) -> bool:
        U = self.unitary
        return bool(np.abs(np.abs(U) - np.eye(self.site_dim)).max() == 0.0)

    def block_density(self, n: int) -> DensityOperator:
        check_dim(self.site_dim ** n)
        Un = kron_all([self.unitary] * n)
        probs = self.sequence_probabilities(n)
        return DensityOperator((Un * probs) @ Un.conj().T)

    def one_site_density(self) -> DensityOperator:
        U = self.unitary
        return DensityOperator((U * self.pi) @ U.conj().T)


def hadamard() -> np.ndarray:
    return np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)


@dataclass(frozen=True, eq=False)
class FinitelyCorrelated(StateModel):
    """Finitely correlated state from Kraus operators ``kraus[i]`` (b x b).

    The blocks are psi(|i><j|) = tr(A_{i_n}...A_{i_1} rho A_{j_1}^*...A_{j_n}^*)
    with sum_i A_i^* A_i = 1 and rho the fixed point of X -> sum_i A_i X A_i^*.
    """

    kraus: np.ndarray
    fixed_point: np.ndarray | None = None

    def __post_init__(self):
        A = np.asarray(self.kraus, dtype=complex)
        if A.ndim != 3 or A.shape[1] != A.shape[2]:
            raise ValueError("kraus must have shape (d, b, b)")
        b = A.shape[1]
        tp = np.abs(np.einsum("iab,iac->bc", A.conj(), A) - np.eye(b)).max()
        if tp > 1e-10:
            raise ValueError(f"Kraus operators are not trace preserving (error {tp:.2e})")
        rho = self.fixed_point
        if rho is None:
            rho = _transfer_fixed_point(A)
        rho = np.asarray(rho, dtype=complex)
        drift = np.abs(np.einsum("iab,bc,idc->ad", A, rho, A.conj()) - rho).max()
        if drift > 1e-10:
            raise ValueError(f"fixed_point is not invariant (error {drift:.2e})")
        radius = float(np.abs(np.linalg.eigvals(self.transfer_matrix_of(A))).max())
        if abs(radius - 1.0) > 1e-10:
            raise ValueError(f"transfer map has spectral radius {radius!r}, expected 1")
        object.__setattr__(self, "kraus", _readonly(A))
        object.__setattr__(self, "fixed_point", _readonly(rho))

    @staticmethod
    def transfer_matrix_of(A: np.ndarray) -> np.ndarray:
        return sum(np.kron(a, a.conj()) for a in A)

    @property
    def transfer_matrix(self) -> np.ndarray:
        return self.transfer_matrix_of(self.kraus)

    @property
    def site_dim(self) -> int:
        return self.kraus.shape[0]

    @property
    def bond_dim(self) -> int:
        return self.kraus.shape[1]

    @classmethod
    def random(cls, site_dim: int, bond_dim: int, seed: int) -> "FinitelyCorrelated":
        rng = np.random.default_rng(seed)
        z = rng.normal(size=(site_dim * bond_dim, bond_dim)) + 1j * rng.normal(
            size=(site_dim * bond_dim, bond_dim)
        )
        q, _ = np.linalg.qr(z)
        return cls(q.reshape(site_dim, bond_dim, bond_dim))

    def block_density(self, n: int) -> DensityOperator:
        d, b = self.site_dim, self.bond_dim
        check_dim(d ** n)
        w, v = np.linalg.eigh(self.fixed_point)
        w = np.clip(w, 0.0, None)
        # W[word, a, c] = sqrt(w_c) (A_{x_n} ... A_{x_1} v_c)_a, psi = W W^*
        W = (v * np.sqrt(w))[None, :, :]
        for _ in range(n):
            W = np.einsum("kab,ibc->ikac", self.kraus, W).reshape(-1, b, b)
        flat = W.reshape(d ** n, b * b)
        return DensityOperator(flat @ flat.conj().T, trace_tol=1e-9)


def _transfer_fixed_point(A: np.ndarray) -> np.ndarray:
    b = A.shape[1]
    T = FinitelyCorrelated.transfer_matrix_of(A)
    w, v = np.linalg.eig(T)
    k = int(np.argmin(np.abs(w - 1.0)))
    rho = v[:, k].reshape(b, b)
    rho = (rho + rho.conj().T) / 2
    rho = rho / np.trace(rho)
    if np.linalg.eigvalsh(rho)[0] < 0:
        rho = -rho
    return rho


# -- rates -----------------------------------------------------------------


@dataclass(frozen=True)
class RateReport:
    mean_entropy: float
    cross_term: float
    mean_relative_entropy: float
    method: str


def _require_iid(phi) -> IID:
    if not isinstance(phi, IID):
        raise TypeError("the reference state must be an IID model")
    return phi


def cross_term(psi: StateModel, phi: IID) -> float:
    """tr(D_psi(1) log D_phi(1)); ``-inf`` when psi leaks outside supp(phi)."""
    phi = _require_iid(phi)
    rho_psi = psi.one_site_density().matrix
    w, v = np.linalg.eigh(phi.rho.matrix)
    diag = np.einsum("ij,ik,kj->j", v.conj(), rho_psi, v).real
    on = w > SUPPORT_FLOOR
    if diag[~on].sum() > 1e-10:
        return -math.inf
    return float((diag[on] * np.log(w[on])).sum())


def rate_report(psi: StateModel, phi: IID, n_max: int = 6) -> RateReport:
    """Mean entropy, cross term and mean relative entropy of psi against phi."""
    phi = _require_iid(phi)
    if psi.site_dim != phi.site_dim:
        raise ValueError("psi and phi have different site dimensions")
    xt = cross_term(psi, phi)
    if isinstance(psi, MarkovLift):
        s = psi.entropy_rate()
        method = "closed_form"
    elif isinstance(psi, IID):
        s = von_neumann_entropy(psi.rho)
        method = "closed_form"
    else:
        # increments of the block entropy converge from above
        n = max(2, n_max)
        s = von_neumann_entropy(psi.block_density(n)) - von_neumann_entropy(psi.block_density(n - 1))
        method = "finite_n_extrapolation"
    rel = math.inf if math.isinf(xt) else max(-s - xt, 0.0)
    return RateReport(mean_entropy=s, cross_term=xt, mean_relative_entropy=rel, method=method)


def finite_rates(psi: StateModel, phi: IID, n: int) -> tuple[float, float]:
    """(S(psi^(n))/n, S(psi^(n), phi^(n))/n) computed exactly on the block."""
    if psi.is_classical and phi.is_classical:
        p = psi.sequence_probabilities(n)
        q = phi.sequence_probabilities(n)
        on = p > 0
        if np.any(q[on] <= 0):
            return shannon_entropy(p) / n, math.inf
        return shannon_entropy(p) / n, float((p[on] * np.log(p[on] / q[on])).sum()) / n
    block = psi.block_density(n)
    return von_neumann_entropy(block) / n, relative_entropy(block, phi.block_density(n)) / n


# -- ergodicity ------------------------------------------------------------


@dataclass(frozen=True)
class ErgodicityVerdict:
    kind: str  # ergodic | periodic | reducible | undetermined
    period: int | None = None

    @property
    def is_ergodic(self) -> bool:
        return self.kind in ("ergodic", "periodic")


def chain_period(adjacency: np.ndarray) -> int:
    """Period of an irreducible directed graph via BFS level differences."""
    n = adjacency.shape[0]
    level = np.full(n, -1)
    level[0] = 0
    frontier = [0]
    while frontier:
        nxt = []
        for u in frontier:
            for v in np.flatnonzero(adjacency[u]):
                if level[v] < 0:
                    level[v] = level[u] + 1
                    nxt.append(int(v))
        frontier = nxt
    g = 0
    for u, v in zip(*np.nonzero(adjacency)):
        g = math.gcd(g, int(level[u] + 1 - level[v]))
    return abs(g) if g else 1


def check_ergodicity(model: StateModel) -> ErgodicityVerdict:
    if isinstance(model, IID):
        return ErgodicityVerdict("ergodic", 1)
    if isinstance(model, MarkovLift):
        support = np.flatnonzero(model.pi > 0)
        adj = model.transition[np.ix_(support, support)] > 0
        ncomp, _ = connected_components(adj, directed=True, connection="strong")
        if ncomp > 1:
            return ErgodicityVerdict("reducible")
        per = chain_period(adj)
        return ErgodicityVerdict("ergodic" if per == 1 else "periodic", per)
    if isinstance(model, FinitelyCorrelated):
        w = np.linalg.eigvals(model.transfer_matrix)
        peripheral = np.abs(np.abs(w) - 1.0) < 1e-9
        if peripheral.sum() == 1 and abs(w[peripheral][0] - 1.0) < 1e-9:
            return ErgodicityVerdict("ergodic", 1)
        return ErgodicityVerdict("undetermined")
    return ErgodicityVerdict("undetermined")


__all__ = [
    "ErgodicityVerdict",
    "FinitelyCorrelated",
    "IID",
    "MarkovLift",
    "RateReport",
    "RotatedMarkovLift",
    "StateModel",
    "chain_period",
    "check_ergodicity",
    "cross_term",
    "finite_rates",
    "hadamard",
    "rate_report",
    "stationary_distribution",
]
