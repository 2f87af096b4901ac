"""Type-class decomposition of a product reference state and the pinching
(trace conditional expectation) onto its eigen-projectors.

Everything is computed in the product eigenbasis of the reference density:
the basis matrix ``basis`` has one column per word of single-site
eigenvectors, and ``labels[k]`` is the type index of column k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce
from math import comb, factorial

import numpy as np

from .entropy import classical_kl, relative_entropy, von_neumann_entropy
from .operators import (
    SUPPORT_FLOOR,
    DensityOperator,
    SpectralDecomposition,
    as_density,
    check_dim,
    group_eigenvalues,
    log_on_support,
    spectral_decompose,
)
from .validation import as_matrix

GROUPING_TOL = 1e-10


def compositions_desc(n: int, d: int) -> list[tuple[int, ...]]:
    """All (n_1..n_d) with sum n, in descending lexicographic order."""
    if d == 1:
        return [(n,)]
    return [(k,) + rest for k in range(n, -1, -1) for rest in compositions_desc(n - k, d - 1)]


@dataclass(eq=False)
class TypeClassDecomposition:
    d: int
    n: int
    ref_spectrum: SpectralDecomposition
    types: list[tuple[int, ...]]
    type_eigenvalues: np.ndarray
    basis: np.ndarray = field(repr=False)
    labels: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def indices(self, t: int) -> np.ndarray:
        return np.flatnonzero(self.labels == t)

    def projector(self, t: int) -> np.ndarray:
        cols = self.basis[:, self.indices(t)]
        return cols @ cols.conj().T

    @property
    def type_projectors(self) -> list[np.ndarray]:
        return [self.projector(t) for t in range(len(self.types))]

    def type_traces(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=len(self.types))

    def expected_traces(self) -> np.ndarray:
        """Multinomial counts weighted by eigen-multiplicities."""
        mult = self.ref_spectrum.multiplicities
        out = []
        for t in self.types:
            ways = factorial(self.n)
            for nk in t:
                ways //= factorial(nk)
            out.append(ways * int(np.prod([m ** nk for m, nk in zip(mult, t)])))
        return np.array(out)

    def reference_density(self) -> np.ndarray:
        weights = self.type_eigenvalues[self.labels]
        return (self.basis * weights) @ self.basis.conj().T

    def to_eigenbasis(self, rho) -> np.ndarray:
        m = as_matrix(rho)
        return self.basis.conj().T @ m @ self.basis

    def from_eigenbasis(self, m: np.ndarray) -> np.ndarray:
        return self.basis @ m @ self.basis.conj().T


def build_type_classes(
    phi1, n: int, grouping_tol: float = GROUPING_TOL, require_faithful: bool = True
) -> TypeClassDecomposition:
    """Group the eigenvectors of phi1^{(x)n} by the multiset of single-site eigenvalues.

    Degenerate single-site eigenvalues are merged first, so the effective
    alphabet size ``d`` may be smaller than the matrix dimension.
    """
    phi1 = as_density(phi1)
    if n < 1:
        raise ValueError("n must be a positive integer")
    check_dim(phi1.dim ** n)
    spec = spectral_decompose(phi1, grouping_tol)
    if require_faithful and spec.eigenvalues[-1] <= SUPPORT_FLOOR:
        raise ValueError("reference density is not faithful (zero eigenvalue)")
    d = len(spec.eigenvalues)
    v1 = np.hstack(spec.eigenvectors)
    group_of = np.concatenate([np.full(m, k) for k, m in enumerate(spec.multiplicities)])

    types = compositions_desc(n, d)
    index = {t: i for i, t in enumerate(types)}
    # counts[word, k] = occurrences of eigen-group k in the word
    counts = np.zeros((1, d), dtype=int)
    onehot = np.eye(d, dtype=int)[group_of]
    for _ in range(n):
        counts = (counts[:, None, :] + onehot[None, :, :]).reshape(-1, d)
    labels = np.array([index[tuple(c)] for c in counts])
    basis = reduce(np.kron, [v1] * n) if n > 1 else v1.copy()
    lam = np.clip(spec.eigenvalues, 0.0, None)
    type_eigs = np.array([float(np.prod(lam ** np.array(t))) for t in types])
    return TypeClassDecomposition(d, n, spec, types, type_eigs, basis, labels)


def _block_mask(tcd: TypeClassDecomposition) -> np.ndarray:
    return tcd.labels[:, None] == tcd.labels[None, :]


def pinch(rho, tcd: TypeClassDecomposition) -> DensityOperator:
    """E(rho) = sum_t p_t rho p_t."""
    m = tcd.to_eigenbasis(rho)
    if m.shape[0] != tcd.dim:
        raise ValueError("density and decomposition dimensions differ")
    return DensityOperator(tcd.from_eigenbasis(np.where(_block_mask(tcd), m, 0.0)), trace_tol=1e-9)


def _canonical_basis(F: np.ndarray, rank: int, tol: float = 1e-8) -> np.ndarray:
    """Orthonormal basis of range(F) by Gram-Schmidt over its columns in order."""
    out: list[np.ndarray] = []
    for k in range(F.shape[1]):
        v = F[:, k].copy()
        for _ in range(2):
            for u in out:
                v -= u * (u.conj() @ v)
        nv = np.linalg.norm(v)
        if nv > tol:
            out.append(v / nv)
            if len(out) == rank:
                break
    return np.array(out).T


@dataclass(eq=False)
class AbelianRestriction:
    """Minimal projectors f_i of the algebra D_n and their rank-one refinement.

    Vectors are stored in the reference eigenbasis: ``atom_vectors`` has one
    column per refined atom g_{i,j}, and ``atom_parent[j]`` is the index i of
    the f_i containing it.
    """

    type_of_f: np.ndarray
    f_ranks: np.ndarray
    psi_weights: np.ndarray
    phi_weights: np.ndarray
    atom_vectors: np.ndarray = field(repr=False)
    atom_parent: np.ndarray
    atom_psi_weights: np.ndarray
    atom_phi_weights: np.ndarray
    tcd: TypeClassDecomposition = field(repr=False)

    @property
    def minimal_projectors(self) -> list[np.ndarray]:
        out = []
        for i in range(len(self.f_ranks)):
            out.append(self.atom_projector(np.flatnonzero(self.atom_parent == i)))
        return out

    def atom_projector(self, atoms) -> np.ndarray:
        """Projector (computational basis) onto the span of the given atoms."""
        cols = self.tcd.basis @ self.atom_vectors[:, np.asarray(atoms, dtype=int)]
        return cols @ cols.conj().T

    @property
    def refined(self) -> list[np.ndarray]:
        return [self.atom_projector([j]) for j in range(self.atom_vectors.shape[1])]

    def restricted_density(self) -> np.ndarray:
        """Density of psi restricted to the refined algebra B_n."""
        cols = self.tcd.basis @ self.atom_vectors
        return (cols * self.atom_psi_weights) @ cols.conj().T


def abelian_restriction(
    psi_n, tcd: TypeClassDecomposition, grouping_tol: float = GROUPING_TOL
) -> AbelianRestriction:
    """Diagonalize each compressed block p_t psi p_t and split it into atoms.

    Zero-eigenvalue pieces of a block are kept as atoms of psi-weight 0 so
    that the f_i resolve the identity.
    """
    m = tcd.to_eigenbasis(psi_n)
    if m.shape[0] != tcd.dim:
        raise ValueError("density and decomposition dimensions differ")
    D = tcd.dim
    type_of_f, f_ranks, psi_w, phi_w = [], [], [], []
    vecs, parent, a_psi, a_phi = [], [], [], []
    for t in range(len(tcd.types)):
        idx = tcd.indices(t)
        if idx.size == 0:
            continue
        block = m[np.ix_(idx, idx)]
        block = (block + block.conj().T) / 2
        w, v = np.linalg.eigh(block)
        w, v = w[::-1], v[:, ::-1]
        for g in group_eigenvalues(w, grouping_tol):
            lam = max(float(w[g].mean()), 0.0)
            if lam <= SUPPORT_FLOOR:
                lam = 0.0
            sub = v[:, g]
            if len(g) == 1:
                local = sub
            else:
                local = _canonical_basis(sub @ sub.conj().T, len(g))
            i = len(f_ranks)
            type_of_f.append(t)
            f_ranks.append(len(g))
            psi_w.append(lam * len(g))
            phi_w.append(tcd.type_eigenvalues[t] * len(g))
            for j in range(local.shape[1]):
                full = np.zeros(D, dtype=complex)
                full[idx] = local[:, j]
                vecs.append(full)
                parent.append(i)
                a_psi.append(float(np.real(full.conj() @ m @ full)))
                a_phi.append(tcd.type_eigenvalues[t])
    return AbelianRestriction(
        type_of_f=np.array(type_of_f),
        f_ranks=np.array(f_ranks),
        psi_weights=np.array(psi_w),
        phi_weights=np.array(phi_w),
        atom_vectors=np.array(vecs).T,
        atom_parent=np.array(parent),
        atom_psi_weights=np.clip(np.array(a_psi), 0.0, None),
        atom_phi_weights=np.array(a_phi),
        tcd=tcd,
    )


def _normalized(w: np.ndarray) -> np.ndarray:
    return w / w.sum()


@dataclass(frozen=True)
class HiaiPetzAudit:
    lhs: float
    kl_abelian: float
    kl_refined: float
    entropy_pinched: float
    entropy: float
    residual: float
    pinch_gap: float
    bound: float
    effective_d: int
    infinite_terms: tuple[str, ...] = ()

    @property
    def rhs(self) -> float:
        return self.kl_abelian + self.pinch_gap

    def chain_ok(self, tol: float = 1e-9) -> bool:
        return self.kl_abelian <= self.kl_refined + tol and self.kl_refined <= self.lhs + tol

    def ok(self, residual_tol: float = 1e-8, tol: float = 1e-9) -> bool:
        return (
            self.residual <= residual_tol
            and -tol <= self.pinch_gap <= self.bound + tol
            and self.chain_ok(tol)
        )


def hiai_petz_audit(psi_n, phi1, n: int) -> HiaiPetzAudit:
    """Check S(psi, phi) = S(psi|D, phi|D) + S(E psi) - S(psi) on one block."""
    psi_n = as_density(psi_n)
    phi1 = as_density(phi1)
    tcd = build_type_classes(phi1, n, require_faithful=False)
    phi_n = DensityOperator(tcd.reference_density(), trace_tol=1e-9)
    ar = abelian_restriction(psi_n, tcd)
    lhs = relative_entropy(psi_n, phi_n)
    kl_d = classical_kl(_normalized(ar.psi_weights), _normalized(ar.phi_weights))
    kl_b = classical_kl(_normalized(ar.atom_psi_weights), _normalized(ar.atom_phi_weights))
    s_pinched = von_neumann_entropy(pinch(psi_n, tcd))
    s = von_neumann_entropy(psi_n)
    gap = s_pinched - s
    infinite = tuple(
        name for name, val in (("relative_entropy", lhs), ("kl_abelian", kl_d), ("kl_refined", kl_b))
        if math.isinf(val)
    )
    if infinite:
        residual = 0.0 if math.isinf(lhs) and math.isinf(kl_d) else math.inf
    else:
        residual = abs(lhs - (kl_d + gap))
    return HiaiPetzAudit(
        lhs=lhs,
        kl_abelian=kl_d,
        kl_refined=kl_b,
        entropy_pinched=s_pinched,
        entropy=s,
        residual=residual,
        pinch_gap=gap,
        bound=tcd.d * math.log(n + 1),
        effective_d=tcd.d,
        infinite_terms=infinite,
    )


def cross_term_identity_check(psi_n, tcd: TypeClassDecomposition, phi_n=None) -> float:
    """Largest gap between tr(X log phi_n) and tr(psi log phi_n) for X the
    pinched density and the density restricted to the refined atoms."""
    psi = as_density(psi_n).matrix
    if phi_n is None:
        log_phi = tcd.from_eigenbasis(np.diag(np.log(tcd.type_eigenvalues[tcd.labels])).astype(complex))
    else:
        log_phi = log_on_support(phi_n).matrix
    base = float(np.einsum("ij,ji->", psi, log_phi).real)
    pinched = pinch(psi, tcd).matrix
    restricted = abelian_restriction(psi, tcd).restricted_density()
    r1 = abs(float(np.einsum("ij,ji->", pinched, log_phi).real) - base)
    r2 = abs(float(np.einsum("ij,ji->", restricted, log_phi).real) - base)
    return max(r1, r2)


def number_of_types(n: int, d: int) -> int:
    return comb(n + d - 1, d - 1)


__all__ = [
    "AbelianRestriction",
    "HiaiPetzAudit",
    "TypeClassDecomposition",
    "abelian_restriction",
    "build_type_classes",
    "compositions_desc",
    "cross_term_identity_check",
    "hiai_petz_audit",
    "number_of_types",
    "pinch",
]
