"""Decomposition of an ergodic Markov-lift state into components that are
ergodic under shifts by l sites, with audits of their entropy rates.

For an irreducible chain of period ``per`` the l-step chain splits into
k_l = gcd(per, l) closed classes K_0 -> K_1 -> ... (P maps K_x into K_{x+1}).
Component x is the chain started from k_l * pi restricted to K_x.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components

from .aep import markov_divergence_rate
from .entropy import classical_kl, relative_entropy, shannon_entropy, von_neumann_entropy
from .operators import DensityOperator, check_dim, kron_all
from .states import IID, MarkovLift, RotatedMarkovLift, chain_period, check_ergodicity


@dataclass(eq=False)
class ChainComponent:
    """Markov chain with a fixed, generally non-stationary, initial law."""

    index: int
    transition: np.ndarray = field(repr=False)
    initial: np.ndarray
    unitary: np.ndarray | None = field(default=None, repr=False)

    @property
    def site_dim(self) -> int:
        return self.transition.shape[0]

    @property
    def is_classical(self) -> bool:
        return self.unitary is None

    def sequence_probabilities(self, n: int, offset: int = 0) -> np.ndarray:
        """Law of sites offset..offset+n-1."""
        v = self.initial @ np.linalg.matrix_power(self.transition, offset)
        d = self.site_dim
        check_dim(d ** n, cap=1 << 24)
        for k in range(1, n):
            last = np.arange(d ** k) % d
            v = (v[:, None] * self.transition[last, :]).ravel()
        return v

    def block_density(self, n: int, offset: int = 0) -> DensityOperator:
        check_dim(self.site_dim ** n)
        probs = self.sequence_probabilities(n, offset)
        if self.unitary is None:
            return DensityOperator(np.diag(probs))
        Un = kron_all([self.unitary] * n)
        return DensityOperator((Un * probs) @ Un.conj().T)

    def cesaro_marginal(self, period: int) -> np.ndarray:
        """Average one-site marginal over one period of the cyclic motion."""
        v = self.initial.copy()
        acc = np.zeros_like(v)
        for _ in range(period):
            acc += v
            v = v @ self.transition
        return acc / period


@dataclass
class GlDecomposition:
    l: int
    k_l: int
    period: int
    components: list[ChainComponent]
    classes: list[np.ndarray]
    model: MarkovLift = field(repr=False)

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.k_l, 1.0 / self.k_l)

    def mixture_block(self, n: int) -> np.ndarray:
        return sum(c.block_density(n).matrix for c in self.components) / self.k_l


def cyclic_classes(P: np.ndarray, support: np.ndarray, period: int) -> list[np.ndarray]:
    """Cyclic classes C_0..C_{per-1} (P maps C_c into C_{c+1}), C_0 containing support[0]."""
    adj = P[np.ix_(support, support)] > 0
    level = np.full(len(support), -1)
    level[0] = 0
    frontier = [0]
    while frontier:
        nxt = []
        for u in frontier:
            for v in np.flatnonzero(adj[u]):
                if level[v] < 0:
                    level[v] = level[u] + 1
                    nxt.append(int(v))
        frontier = nxt
    return [support[level % period == c] for c in range(period)]


def gl_decompose(model: MarkovLift, l: int) -> GlDecomposition:
    """Components of the chain that are ergodic under the l-step shift."""
    if not isinstance(model, MarkovLift):
        raise TypeError("the decomposition is implemented for Markov-lift states")
    if l < 1:
        raise ValueError("l must be a positive integer")
    verdict = check_ergodicity(model)
    if not verdict.is_ergodic:
        raise ValueError(f"chain is {verdict.kind}; the decomposition needs an irreducible chain")
    P, pi = model.transition, model.pi
    support = np.flatnonzero(pi > 0)
    per = chain_period(P[np.ix_(support, support)] > 0)
    Pl = np.linalg.matrix_power(P[np.ix_(support, support)], l)
    k_l, labels = connected_components(Pl > 1e-300, directed=True, connection="strong")
    if l % k_l != 0 or k_l != math.gcd(per, l):
        raise ArithmeticError(f"l-step chain has {k_l} classes, inconsistent with period {per} and l = {l}")
    cyc = cyclic_classes(P, support, per)
    classes = [np.sort(np.concatenate([cyc[c] for c in range(x, per, k_l)])) for x in range(k_l)]
    # each K_x must be one strongly connected class of the l-step chain
    pos = {int(s): i for i, s in enumerate(support)}
    for K in classes:
        if len({int(labels[pos[int(s)]]) for s in K}) != 1:
            raise ArithmeticError("cyclic classes do not match the l-step classes")
    unitary = model.unitary if isinstance(model, RotatedMarkovLift) else None
    comps = []
    for x, K in enumerate(classes):
        init = np.zeros_like(pi)
        init[K] = pi[K] * k_l
        comps.append(ChainComponent(x, P, init, unitary))
    return GlDecomposition(l=l, k_l=k_l, period=per, components=comps, classes=classes, model=model)


# -- audits --------------------------------------------------------------------


@dataclass
class AuditRow:
    component: int
    n: int
    entropy_rate: float
    rel_entropy_rate: float


@dataclass
class ComponentAudit:
    rows: list[AuditRow]
    max_deviation: dict[int, tuple[float, float]]
    closed_form: list[tuple[float, float]]
    mixture_error: float
    translate_error: float
    scaling_lhs: float
    scaling_rhs: float

    def ok(self, tol: float = 1e-9) -> bool:
        ents = [c[0] for c in self.closed_form]
        rels = [c[1] for c in self.closed_form]
        return (
            max(ents) - min(ents) <= tol
            and max(rels) - min(rels) <= tol
            and self.mixture_error <= 1e-10
            and self.translate_error <= 1e-10
            and abs(self.scaling_lhs - self.scaling_rhs) <= tol
        )


def _block_rates(c: ChainComponent, phi: IID, length: int) -> tuple[float, float]:
    if c.is_classical and phi.is_classical:
        p = c.sequence_probabilities(length)
        q = phi.sequence_probabilities(length)
        return shannon_entropy(p) / length, classical_kl(p, q) / length
    rho = c.block_density(length)
    return von_neumann_entropy(rho) / length, relative_entropy(rho, phi.block_density(length)) / length


def component_rates(c: ChainComponent, phi: IID, period: int) -> tuple[float, float]:
    """Closed-form per-site entropy and relative entropy rates of a component."""
    m = c.cesaro_marginal(period)
    P = c.transition
    with np.errstate(divide="ignore", invalid="ignore"):
        row_h = np.where(P > 0, -P * np.log(np.where(P > 0, P, 1.0)), 0.0).sum(axis=1)
    h = float(m @ row_h)
    if c.is_classical:
        rel = markov_divergence_rate(P, np.diag(phi.rho.matrix).real, m)
    else:
        U = c.unitary
        marg = (U * m) @ U.conj().T
        w, v = np.linalg.eigh(phi.rho.matrix)
        diag = np.einsum("ij,ik,kj->j", v.conj(), marg, v).real
        on = w > 1e-14
        rel = math.inf if diag[~on].sum() > 1e-10 else -h - float((diag[on] * np.log(w[on])).sum())
    return h, rel


def block_chain(P: np.ndarray, l: int) -> np.ndarray:
    """Transition matrix of the chain of consecutive l-blocks."""
    d = P.shape[0]
    words = np.array(np.unravel_index(np.arange(d ** l), (d,) * l)).T
    Pb = np.ones((d ** l, d ** l))
    Pb *= P[words[:, -1]][:, words[:, 0]]
    for i in range(l - 1):
        Pb *= P[words[:, i], words[:, i + 1]][None, :]
    return Pb


def scaled_relative_rate(model: MarkovLift, phi: IID, l: int) -> tuple[float, float]:
    """(rate of the l-block chain against phi^{(x)l}, l times the one-site rate)."""
    q = np.diag(phi.rho.matrix).real
    Pb = block_chain(model.transition, l)
    ql = IID.diagonal(q).sequence_probabilities(l)
    pib = model.sequence_probabilities(l)
    return markov_divergence_rate(Pb, ql, pib), l * markov_divergence_rate(model.transition, q, model.pi)


def component_audit(dec: GlDecomposition, phi: IID, n_max: int) -> ComponentAudit:
    """Finite-n rates over l-blocks per component, plus structural checks."""
    rows: list[AuditRow] = []
    dev: dict[int, tuple[float, float]] = {}
    for n in range(1, n_max + 1):
        vals = [_block_rates(c, phi, dec.l * n) for c in dec.components]
        for c, (h, r) in zip(dec.components, vals):
            rows.append(AuditRow(c.index, n, h, r))
        hs = [v[0] for v in vals]
        rs = [v[1] for v in vals]
        dev[n] = (max(hs) - min(hs), max(rs) - min(rs))
    closed = [component_rates(c, phi, dec.period) for c in dec.components]
    nmix = 6 if dec.model.site_dim ** 6 <= 1 << 16 else max(1, int(16 / math.log2(dec.model.site_dim)))
    classical = all(c.is_classical for c in dec.components)

    def law(c, n, offset=0):
        if classical:
            return c.sequence_probabilities(n, offset)
        return c.block_density(n, offset).matrix

    def model_law(n):
        return dec.model.sequence_probabilities(n) if classical else dec.model.block_density(n).matrix

    if not classical:
        nmix = min(nmix, max(1, int(8 / math.log2(dec.model.site_dim))))
    mix_err = max(
        float(np.abs(sum(law(c, n) for c in dec.components) / dec.k_l - model_law(n)).max())
        for n in range(1, nmix + 1)
    )
    c0 = dec.components[0]
    trans_err = 0.0
    for c in dec.components[1:]:
        for n in range(1, nmix + 1):
            trans_err = max(trans_err, float(np.abs(law(c, n) - law(c0, n, offset=c.index)).max()))
    lhs, rhs = scaled_relative_rate(dec.model, phi, dec.l) if phi.is_classical else (math.nan, math.nan)
    return ComponentAudit(rows, dev, closed, mix_err, trans_err, lhs, rhs)


@dataclass(frozen=True)
class AsymptoticRow:
    l: int
    k_l: int
    component: int
    restricted_rate: float
    threshold: float
    in_set: bool


def small_rate_table(model: MarkovLift, phi: IID, ls, eta: float) -> list[AsymptoticRow]:
    """Components whose per-site l-block relative entropy falls below s(psi,phi) - eta."""
    q = np.diag(phi.rho.matrix).real
    s = markov_divergence_rate(model.transition, q, model.pi)
    out = []
    for l in ls:
        dec = gl_decompose(model, l)
        for c in dec.components:
            _, r = _block_rates(c, phi, l)
            out.append(AsymptoticRow(l, dec.k_l, c.index, r, s - eta, bool(r < s - eta)))
    return out


def small_rate_fraction(rows: list[AsymptoticRow]) -> dict[int, float]:
    out: dict[int, list[bool]] = {}
    for r in rows:
        out.setdefault(r.l, []).append(r.in_set)
    return {l: sum(v) / len(v) for l, v in out.items()}


def write_audit_csv(audit: ComponentAudit, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["component", "n", "entropy_rate", "rel_entropy_rate"])
        for r in audit.rows:
            w.writerow([r.component, r.n, repr(float(r.entropy_rate)), repr(float(r.rel_entropy_rate))])


__all__ = [
    "AsymptoticRow",
    "AuditRow",
    "ChainComponent",
    "ComponentAudit",
    "GlDecomposition",
    "block_chain",
    "component_audit",
    "component_rates",
    "cyclic_classes",
    "gl_decompose",
    "scaled_relative_rate",
    "small_rate_fraction",
    "small_rate_table",
    "write_audit_csv",
]
