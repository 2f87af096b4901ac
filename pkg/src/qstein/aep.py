"""Relative AEP: log-likelihood-ratio sampling for Markov chains, typical
windows over block atoms, separating projectors and spectrum truncation.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .operators import as_density
from .pinching import abelian_restriction, build_type_classes
from .states import IID, MarkovLift, StateModel, rate_report
from .validation import check_probability_vector, check_stochastic_matrix

WINDOW_KINDS = ("entropy", "relative", "reference")


# -- sampling ------------------------------------------------------------------


@dataclass
class LLRSample:
    """Per-trajectory values (1/n) log(P(w)/Q(w)) for a stationary chain P against i.i.d. Q."""

    n: int
    values: np.ndarray
    target: float
    seed: int
    infinite: int = 0

    @property
    def trials(self) -> int:
        return len(self.values)

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def variance(self) -> float:
        return float(np.var(self.values, ddof=1)) if self.trials > 1 else 0.0

    @property
    def std_error(self) -> float:
        return math.sqrt(self.variance / self.trials)


def markov_divergence_rate(P, Q, pi=None) -> float:
    """sum_i pi_i sum_j P_ij log(P_ij / Q_j), with 0 log 0 = 0."""
    P = check_stochastic_matrix(P)
    Q = check_probability_vector(Q, "Q")
    pi = MarkovLift(P).pi if pi is None else check_probability_vector(pi, "pi")
    total = 0.0
    for i in np.flatnonzero(pi > 0):
        row = P[i]
        on = row > 0
        if np.any(Q[on] <= 0):
            return math.inf
        total += pi[i] * float((row[on] * np.log(row[on] / Q[on])).sum())
    return total


def trial_uniforms(seed: int, trial: int, n: int) -> np.ndarray:
    """Uniforms for one trajectory; each trial gets its own (seed, trial) stream."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(trial)])))
    return rng.random(n)


def sample_chain(P: np.ndarray, pi: np.ndarray, n: int, trials: int, seed: int) -> np.ndarray:
    """(trials, n) array of stationary trajectories, reproducible per (seed, trial)."""
    U = np.stack([trial_uniforms(seed, t, n) for t in range(trials)])
    d = len(pi)
    cum_pi = np.cumsum(pi)
    cum_P = np.cumsum(P, axis=1)
    X = np.empty((trials, n), dtype=np.int64)
    X[:, 0] = np.minimum((U[:, :1] >= cum_pi[None, :]).sum(axis=1), d - 1)
    for t in range(1, n):
        rows = cum_P[X[:, t - 1]]
        X[:, t] = np.minimum((U[:, t : t + 1] >= rows).sum(axis=1), d - 1)
    return X


def classical_llr_trajectories(P, Q, n: int, trials: int, seed: int) -> LLRSample:
    """Sample the stationary chain P and evaluate the per-site log-likelihood ratio against Q^n."""
    P = check_stochastic_matrix(P)
    Q = check_probability_vector(Q, "Q")
    if n < 1 or trials < 1:
        raise ValueError("n and trials must be positive integers")
    if Q.shape[0] != P.shape[0]:
        raise ValueError("Q and P disagree in alphabet size")
    pi = MarkovLift(P).pi
    X = sample_chain(P, pi, n, trials, seed)
    with np.errstate(divide="ignore"):
        logP, logQ, logpi = np.log(P), np.log(Q), np.log(pi)
    llr = logpi[X[:, 0]] + logP[X[:, :-1], X[:, 1:]].sum(axis=1) - logQ[X].sum(axis=1)
    values = llr / n
    return LLRSample(
        n=n,
        values=values,
        target=markov_divergence_rate(P, Q, pi),
        seed=int(seed),
        infinite=int(np.isinf(values).sum()),
    )


# -- windows -------------------------------------------------------------------


@dataclass(frozen=True)
class WindowSpec:
    """Open interval (center - half_width, center + half_width) on a per-site exponent.

    ``entropy``: -log(psi_w)/n. ``reference``: -log(phi_w)/n.
    ``relative``: log(psi_w/phi_w)/n.
    """

    center: float
    half_width: float
    kind: str = "entropy"

    def __post_init__(self):
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")
        if self.kind not in WINDOW_KINDS:
            raise ValueError(f"kind must be one of {WINDOW_KINDS}")


@dataclass
class AtomTable:
    """Weights of the minimal projectors of a block algebra; ``multiplicity``
    counts atoms sharing a row (all ones when unaggregated)."""

    n: int
    psi_weights: np.ndarray
    phi_weights: np.ndarray
    multiplicity: np.ndarray | None = None

    def __post_init__(self):
        self.psi_weights = np.asarray(self.psi_weights, dtype=float)
        self.phi_weights = np.asarray(self.phi_weights, dtype=float)
        if self.multiplicity is None:
            self.multiplicity = np.ones(len(self.psi_weights), dtype=np.int64)
        else:
            self.multiplicity = np.asarray(self.multiplicity, dtype=np.int64)


@dataclass
class WindowResult:
    mask: np.ndarray
    mass: float


def _neg_log(w: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return -np.log(w)


def window_statistic(atoms: AtomTable, kind: str) -> np.ndarray:
    n = atoms.n
    if kind == "entropy":
        return _neg_log(atoms.psi_weights) / n
    if kind == "reference":
        return _neg_log(atoms.phi_weights) / n
    with np.errstate(divide="ignore", invalid="ignore"):
        return (np.log(atoms.psi_weights) - np.log(atoms.phi_weights)) / n


def window_membership(obj, spec: WindowSpec) -> WindowResult:
    """Mark atoms (or trajectories) whose per-site statistic lies strictly inside the window.

    For an ``AtomTable`` the mass is the psi-weight captured; for an
    ``LLRSample`` it is the fraction of trajectories inside.
    """
    lo, hi = spec.center - spec.half_width, spec.center + spec.half_width
    if isinstance(obj, LLRSample):
        stat = obj.values
        mask = (stat > lo) & (stat < hi)
        return WindowResult(mask, float(mask.mean()))
    stat = window_statistic(obj, spec.kind)
    mask = (stat > lo) & (stat < hi)
    mass = float((obj.psi_weights * obj.multiplicity)[mask].sum())
    return WindowResult(mask, mass)


# -- separating projector ------------------------------------------------------


@dataclass
class SeparatingProjectorReport:
    """Atoms of the block algebra selected by both typical windows.

    ``vectors`` holds the atom vectors (computational basis, one column per
    atom) on the dense path and is ``None`` on the classical path, where atom
    ``i`` is the i-th basis sequence.
    """

    n: int
    epsilon: float
    atoms: AtomTable
    selected: np.ndarray
    psi_mass: float
    phi_mass: float
    s_psi: float
    s_rel: float
    windows: tuple[WindowSpec, WindowSpec]
    vectors: np.ndarray | None = field(default=None, repr=False)

    @property
    def per_atom(self) -> list[tuple[float, float]]:
        return list(zip(self.atoms.psi_weights.tolist(), self.atoms.phi_weights.tolist()))

    def projector(self) -> np.ndarray:
        if self.vectors is None:
            d = np.zeros(len(self.atoms.psi_weights))
            d[self.selected] = 1.0
            return np.diag(d)
        cols = self.vectors[:, self.selected]
        return cols @ cols.conj().T

    def window_bounds_ok(self, slack: float = 1e-12) -> bool:
        """Per-atom exponential bounds for every selected atom, strict up to ``slack``."""
        n, e = self.n, self.epsilon
        pw = self.atoms.psi_weights[self.selected]
        fw = self.atoms.phi_weights[self.selected]
        s, t = self.s_psi, self.s_psi + self.s_rel
        ok_psi = (pw > math.exp(-n * (s + e)) * (1 - slack)) & (pw < math.exp(-n * (s - e)) * (1 + slack))
        ok_phi = (fw > math.exp(-n * (t + e)) * (1 - slack)) & (fw < math.exp(-n * (t - e)) * (1 + slack))
        return bool(np.all(ok_psi & ok_phi))


def block_atoms(psi: StateModel, phi: IID, n: int) -> tuple[AtomTable, np.ndarray | None]:
    """Atoms of the refined block algebra with their psi- and phi-weights."""
    if psi.is_classical and phi.is_classical:
        p = psi.sequence_probabilities(n)
        q = phi.sequence_probabilities(n)
        return AtomTable(n, p, q), None
    tcd = build_type_classes(phi.one_site_density(), n, require_faithful=False)
    ab = abelian_restriction(psi.block_density(n), tcd)
    vectors = tcd.basis @ ab.atom_vectors
    return AtomTable(n, ab.atom_psi_weights, ab.atom_phi_weights), vectors


def build_separating_projector(psi: StateModel, phi: IID, n: int, epsilon_window: float) -> SeparatingProjectorReport:
    """Select atoms with psi-weight near e^{-n s(psi)} and phi-weight near e^{-n(s(psi)+s(psi,phi))}."""
    if not epsilon_window > 0:
        raise ValueError("epsilon_window must be positive")
    rates = rate_report(psi, phi)
    if math.isinf(rates.mean_relative_entropy):
        raise ValueError("infinite mean relative entropy: no reference window exists")
    s, rel = rates.mean_entropy, rates.mean_relative_entropy
    atoms, vectors = block_atoms(psi, phi, n)
    w_ent = WindowSpec(s, epsilon_window, "entropy")
    w_ref = WindowSpec(s + rel, epsilon_window, "reference")
    mask = window_membership(atoms, w_ent).mask & window_membership(atoms, w_ref).mask
    selected = np.flatnonzero(mask)
    return SeparatingProjectorReport(
        n=n,
        epsilon=float(epsilon_window),
        atoms=atoms,
        selected=selected,
        psi_mass=float(atoms.psi_weights[selected].sum()),
        phi_mass=float(atoms.phi_weights[selected].sum()),
        s_psi=s,
        s_rel=rel,
        windows=(w_ent, w_ref),
        vectors=vectors,
    )


# -- truncation ----------------------------------------------------------------


@dataclass
class TruncationSplit:
    """Eigenvalues of p D p on the range of p, split at e^{-n(s - delta)}."""

    delta: float
    s_psi: float
    n: int
    eigenvalues: np.ndarray
    kept: np.ndarray
    discarded: np.ndarray
    discarded_mass: float

    @property
    def threshold(self) -> float:
        return math.exp(-self.n * (self.s_psi - self.delta))

    @property
    def count_bound(self) -> float:
        return math.exp(self.n * (self.s_psi - self.delta))

    @property
    def count_ok(self) -> bool:
        return len(self.discarded) < self.count_bound


def split_weights(weights, delta: float, s_psi: float, n: int) -> TruncationSplit:
    w = np.asarray(weights, dtype=float)
    thr = math.exp(-n * (s_psi - delta))
    kept = np.flatnonzero(w <= thr)
    disc = np.flatnonzero(w > thr)
    return TruncationSplit(delta, s_psi, n, w, kept, disc, float(w[disc].sum()))


def truncate_spectrum(p, Dpsi_n, delta: float, s_psi: float, n: int) -> TruncationSplit:
    """Diagonalize the compression of Dpsi_n to the range of the projector p and
    split its eigen-indices by the threshold e^{-n(s_psi - delta)}."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    P = np.asarray(p, dtype=complex)
    D = as_density(Dpsi_n).matrix
    if np.abs(P @ P - P).max() > 1e-8:
        raise ValueError("p is not a projector")
    if np.count_nonzero(P - np.diag(np.diag(P))) == 0 and np.count_nonzero(D - np.diag(np.diag(D))) == 0:
        on = np.flatnonzero(np.diag(P).real > 0.5)
        return split_weights(np.diag(D).real[on], delta, s_psi, n)
    w, V = np.linalg.eigh(P)
    R = V[:, w > 0.5]
    lam = np.clip(np.linalg.eigvalsh(R.conj().T @ D @ R), 0.0, None)
    return split_weights(lam, delta, s_psi, n)


# -- CSV -----------------------------------------------------------------------


def write_llr_csv(sample: LLRSample, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial", "llr_per_site"])
        for i, v in enumerate(sample.values):
            w.writerow([i, repr(float(v))])


def write_separating_csv(report: SeparatingProjectorReport, path) -> None:
    sel = np.zeros(len(report.atoms.psi_weights), dtype=bool)
    sel[report.selected] = True
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["atom_id", "psi_weight", "phi_weight", "selected"])
        for i, (a, b) in enumerate(zip(report.atoms.psi_weights, report.atoms.phi_weights)):
            w.writerow([i, repr(float(a)), repr(float(b)), int(sel[i])])


__all__ = [
    "AtomTable",
    "LLRSample",
    "SeparatingProjectorReport",
    "TruncationSplit",
    "WindowResult",
    "WindowSpec",
    "block_atoms",
    "build_separating_projector",
    "classical_llr_trajectories",
    "markov_divergence_rate",
    "split_weights",
    "truncate_spectrum",
    "window_membership",
    "write_llr_csv",
    "write_separating_csv",
]
