"""Dense Hermitian linear algebra on tensor-product blocks.

All logarithms are natural. Operator objects are immutable wrappers around
complex numpy arrays and expose ``__array__`` so they can be passed anywhere
an array is expected.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .validation import as_matrix, check_hermitian, hermiticity_error

DIM_CAP = 8192
SUPPORT_FLOOR = 1e-14
NEGATIVE_TOL = 1e-10


class DimensionCapError(ValueError):
    """Raised before allocating a block whose dimension exceeds the cap."""

    def __init__(self, required: int, allowed: int):
        self.required = required
        self.allowed = allowed
        super().__init__(f"block dimension {required} exceeds the cap of {allowed}")


def check_dim(dim: int, cap: int | None = None) -> int:
    cap = DIM_CAP if cap is None else cap
    if dim > cap:
        raise DimensionCapError(dim, cap)
    return dim


def _frozen(m: np.ndarray) -> np.ndarray:
    m = np.array(m, dtype=complex, copy=True)
    m.setflags(write=False)
    return m


class HermitianOperator:
    """A Hermitian matrix, validated at construction."""

    def __init__(self, entries, hermiticity_tol: float = 1e-10):
        self.hermiticity_tol = hermiticity_tol
        self.matrix = _frozen(check_hermitian(entries, hermiticity_tol))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.matrix
        return self.matrix.astype(dtype)

    def __repr__(self) -> str:
        return f"{type(self).__name__}(dim={self.dim})"


class DensityOperator(HermitianOperator):
    """Positive semidefinite, unit-trace Hermitian matrix."""

    def __init__(self, entries, trace_tol: float = 1e-10, hermiticity_tol: float = 1e-10):
        super().__init__(entries, hermiticity_tol)
        self.trace_tol = trace_tol
        d = np.diag(self.matrix)
        if np.count_nonzero(self.matrix) == np.count_nonzero(d):
            w = np.sort(d.real)  # diagonal: skip the dense eigensolver
        else:
            w = np.linalg.eigvalsh(self.matrix)
        if w[0] < -trace_tol:
            raise ValueError(f"density has a negative eigenvalue {w[0]:.3e}")
        tr = float(np.trace(self.matrix).real)
        if abs(tr - 1.0) > trace_tol:
            raise ValueError(f"density has trace {tr!r}, expected 1")
        self._eigenvalues = np.clip(w, 0.0, None)

    @property
    def eigenvalues(self) -> np.ndarray:
        """Ascending eigenvalues with small negatives clamped to zero."""
        return self._eigenvalues

    @classmethod
    def diagonal(cls, probs, **kwargs) -> "DensityOperator":
        return cls(np.diag(np.asarray(probs, dtype=float)), **kwargs)


def as_density(rho, trace_tol: float = 1e-10) -> DensityOperator:
    if isinstance(rho, DensityOperator):
        return rho
    return DensityOperator(rho, trace_tol=trace_tol)


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    projectors: list[np.ndarray]
    multiplicities: list[int]
    eigenvectors: list[np.ndarray] = field(repr=False)
    grouping_tol: float = 1e-10

    def reconstruct(self) -> np.ndarray:
        return sum(lam * p for lam, p in zip(self.eigenvalues, self.projectors))


def group_eigenvalues(w: np.ndarray, tol: float) -> list[np.ndarray]:
    """Split descending eigenvalues into index groups of relatively-close values."""
    groups: list[list[int]] = []
    anchor = None
    for i, lam in enumerate(w):
        if anchor is not None and abs(lam - anchor) <= tol * max(1.0, abs(anchor)):
            groups[-1].append(i)
        else:
            groups.append([i])
            anchor = lam
    return [np.array(g) for g in groups]


def spectral_decompose(a, grouping_tol: float = 1e-10) -> SpectralDecomposition:
    """Eigen-projector decomposition with eigenvalues in descending order.

    Eigenvalues within relative distance ``grouping_tol`` of the first member
    of their group are merged into one projector.
    """
    m = check_hermitian(a, getattr(a, "hermiticity_tol", 1e-10))
    w, v = np.linalg.eigh(m)
    w, v = w[::-1], v[:, ::-1]
    vals, projs, mults, vecs = [], [], [], []
    for g in group_eigenvalues(w, grouping_tol):
        block = v[:, g]
        vals.append(float(w[g].mean()))
        projs.append(block @ block.conj().T)
        mults.append(len(g))
        vecs.append(block)
    return SpectralDecomposition(np.array(vals), projs, mults, vecs, grouping_tol)


def kron_all(mats: Sequence[np.ndarray]) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def tensor_power(rho, n: int, cap: int | None = None) -> DensityOperator:
    """n-fold Kronecker power of a single-site density."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    rho = as_density(rho)
    check_dim(rho.dim ** n, cap)
    out = rho.matrix
    for _ in range(n - 1):
        out = np.kron(out, rho.matrix)
    return DensityOperator(out, trace_tol=n * rho.trace_tol)


def partial_trace(rho, site_dims: Sequence[int], keep) -> DensityOperator:
    """Trace out every site not listed in ``keep``; kept sites stay in order."""
    m = as_matrix(rho)
    dims = [int(d) for d in site_dims]
    if int(np.prod(dims)) != m.shape[0]:
        raise ValueError(f"site dims {dims} do not multiply to {m.shape[0]}")
    keep = sorted(set(int(k) for k in keep))
    if not keep or keep[0] < 0 or keep[-1] >= len(dims):
        raise ValueError(f"keep must be a nonempty subset of 0..{len(dims) - 1}")
    k = len(dims)
    t = m.reshape(dims + dims)
    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    if 2 * k > len(letters):
        raise ValueError("too many sites for partial_trace")
    row = list(letters[:k])
    col = [letters[k + i] if i in keep else row[i] for i in range(k)]
    out = "".join(row[i] for i in keep) + "".join(col[i] for i in keep)
    reduced = np.einsum("".join(row) + "".join(col) + "->" + out, t)
    d = int(np.prod([dims[i] for i in keep]))
    return DensityOperator(reduced.reshape(d, d), trace_tol=1e-9)


def log_on_support(a, support_floor: float = SUPPORT_FLOOR) -> HermitianOperator:
    """Matrix logarithm restricted to the support; kernel directions map to 0."""
    m = check_hermitian(a, getattr(a, "hermiticity_tol", 1e-10))
    w, v = np.linalg.eigh(m)
    if w[0] < -NEGATIVE_TOL:
        raise ValueError(f"log_on_support needs a PSD operator, min eigenvalue {w[0]:.3e}")
    lw = np.zeros_like(w)
    on = w > support_floor
    lw[on] = np.log(w[on])
    return HermitianOperator((v * lw) @ v.conj().T)


def support_projector(a, support_floor: float = SUPPORT_FLOOR) -> np.ndarray:
    m = check_hermitian(a, getattr(a, "hermiticity_tol", 1e-10))
    w, v = np.linalg.eigh(m)
    vs = v[:, w > support_floor]
    return vs @ vs.conj().T


def random_density(dim: int, rng: np.random.Generator, rank: int | None = None) -> DensityOperator:
    """Ginibre-distributed random density matrix."""
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return DensityOperator(rho / np.trace(rho).real)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def commutator_norm(a, b) -> float:
    a, b = as_matrix(a), as_matrix(b)
    return float(np.abs(a @ b - b @ a).max())


__all__ = [
    "DIM_CAP",
    "DensityOperator",
    "DimensionCapError",
    "HermitianOperator",
    "SpectralDecomposition",
    "as_density",
    "check_dim",
    "commutator_norm",
    "hermiticity_error",
    "kron_all",
    "log_on_support",
    "partial_trace",
    "random_density",
    "random_unitary",
    "spectral_decompose",
    "support_projector",
    "tensor_power",
]
