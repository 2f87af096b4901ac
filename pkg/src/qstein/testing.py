"""Neyman-Pearson machinery for the optimal type-II error quantity

    beta_{eps,n} = min { log phi(q) : q projector, psi(q) >= 1 - eps }.

Commuting inputs reduce to a subset-selection (knapsack-like) problem that is
solved exactly by branch and bound. Non-commuting inputs get a bracket: an
explicit feasible projector from above and a Lagrangian bound from below.
"""

from __future__ import annotations

import bisect
import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .entropy import classical_kl, relative_entropy
from .operators import SUPPORT_FLOOR, as_density, commutator_norm, group_eigenvalues
from .states import IID, StateModel, rate_report
from .validation import check_epsilon, check_probability_vector, check_same_dim

FEASIBILITY_TOL = 1e-12
COMMUTING_TOL = 1e-10
EXACT_CAP = 22
NODE_LIMIT = 500_000


@dataclass(frozen=True)
class TestPoint:
    __test__ = False  # not a pytest class

    lam: float
    type1: float
    type2: float
    rank: int


@dataclass
class BetaBracket:
    """Bracket [beta_lo, beta_hi] on beta_eps together with the projector attaining beta_hi.

    ``vectors`` holds an orthonormal basis of the witness range in the
    computational basis; for classical inputs it is ``None`` and ``selected``
    lists the chosen outcome indices instead.
    """

    epsilon: float
    beta_lo: float
    beta_hi: float
    psi_mass: float
    phi_mass: float
    selected: np.ndarray
    vectors: np.ndarray | None = field(default=None, repr=False)
    lam: float | None = None
    exact: bool = False
    method: str = ""

    def projector(self, dim: int | None = None) -> np.ndarray:
        if self.vectors is not None:
            return self.vectors @ self.vectors.conj().T
        if dim is None:
            raise ValueError("dim is required for a classical witness")
        diag = np.zeros(dim)
        diag[self.selected] = 1.0
        return np.diag(diag)


# -- classical subset selection ---------------------------------------------


def aggregate_outcomes(p: np.ndarray, q: np.ndarray, rtol: float = 1e-12):
    """Merge outcomes whose (p, q) pairs coincide up to ``rtol``.

    Returns (p_class, q_class, counts, members) where ``members[k]`` lists the
    outcome indices of class k in ascending order.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    order = np.lexsort((q, p))
    scale = max(float(p.max(initial=0.0)), float(q.max(initial=0.0)), 1e-300)
    classes: list[list[int]] = []
    for i in order:
        if classes:
            j = classes[-1][0]
            if abs(p[i] - p[j]) <= rtol * max(p[j], scale * 1e-3) and abs(q[i] - q[j]) <= rtol * max(
                q[j], scale * 1e-3
            ):
                classes[-1].append(int(i))
                continue
        classes.append([int(i)])
    members = [np.array(sorted(c)) for c in classes]
    pc = np.array([p[m].mean() for m in members])
    qc = np.array([q[m].mean() for m in members])
    counts = np.array([len(m) for m in members])
    return pc, qc, counts, members


class _Budget(Exception):
    pass


def _min_cover(p, q, counts, need, node_limit=NODE_LIMIT, tol=FEASIBILITY_TOL):
    """Minimize sum m_k q_k subject to sum m_k p_k >= need, 0 <= m_k <= counts_k.

    All p, q are strictly positive. Returns (cost, take, exact, lower_bound)
    with ``take`` indexed like the inputs.
    """
    K = len(p)
    order = np.lexsort((q, -(p / q)))
    ps = [float(x) for x in p[order]]
    qs = [float(x) for x in q[order]]
    cs = [int(x) for x in counts[order]]
    cumP = [0.0]
    cumQ = [0.0]
    for k in range(K):
        cumP.append(cumP[-1] + ps[k] * cs[k])
        cumQ.append(cumQ[-1] + qs[k] * cs[k])

    def lp_rest(k: int, r: float) -> float:
        """Fractional (Dantzig) bound on the cost of covering r with items k.."""
        target = cumP[k] + r
        if target > cumP[K] + tol:
            return math.inf
        j = bisect.bisect_left(cumP, target - tol, lo=k)
        if j <= k:
            return 0.0
        j = min(j, K)
        return cumQ[j - 1] - cumQ[k] + max(target - cumP[j - 1], 0.0) * qs[j - 1] / ps[j - 1]

    # count bound: fewest items (largest p first) times the cheapest remaining q
    use_count = K <= 1024
    if use_count:
        qmin = [0.0] * (K + 1)
        qmin[K] = math.inf
        for k in range(K - 1, -1, -1):
            qmin[k] = min(qs[k], qmin[k + 1])
        suffix = []
        for k in range(K):
            idx = sorted(range(k, K), key=lambda i: -ps[i])
            cm, cn, acc_m, acc_n = [], [], 0.0, 0
            for i in idx:
                acc_m += ps[i] * cs[i]
                acc_n += cs[i]
                cm.append(acc_m)
                cn.append(acc_n)
            suffix.append(([ps[i] for i in idx], cm, cn))

    def count_rest(k: int, r: float) -> float:
        if not use_count or k >= K:
            return 0.0
        sp, cm, cn = suffix[k]
        j = bisect.bisect_left(cm, r - tol)
        if j >= len(cm):
            return math.inf
        prev_m = cm[j - 1] if j > 0 else 0.0
        prev_n = cn[j - 1] if j > 0 else 0
        extra = max(0, math.ceil((r - prev_m - tol) / sp[j]))
        return (prev_n + extra) * qmin[k]

    # greedy incumbent in ratio order
    take = [0] * K
    r, cost = need, 0.0
    for k in range(K):
        if r <= tol:
            break
        m = min(cs[k], max(0, math.ceil((r - tol) / ps[k])))
        take[k] = m
        r -= m * ps[k]
        cost += m * qs[k]
    if r > tol:
        raise ValueError("cover infeasible")
    best = [cost, take[:]]
    root_lb = lp_rest(0, need)
    cur = [0] * K
    nodes = [0]
    shrink = 1.0 - 1e-12

    def dfs(k: int, r: float, cost: float) -> None:
        nodes[0] += 1
        if nodes[0] > node_limit:
            raise _Budget
        if r <= tol:
            if cost < best[0]:
                best[0] = cost
                best[1] = cur[:]
            return
        if k == K:
            return
        pk, qk = ps[k], qs[k]
        mmax = min(cs[k], max(0, math.ceil((r - tol) / pk)))
        for m in range(mmax, -1, -1):
            r2 = r - m * pk
            c2 = cost + m * qk
            if r2 <= tol:
                if c2 < best[0]:
                    cur[k] = m
                    best[0] = c2
                    best[1] = cur[:]
                continue
            lp = c2 + lp_rest(k + 1, r2)
            if lp >= best[0] * shrink:
                if m * pk <= r:
                    break
                continue
            if c2 + count_rest(k + 1, r2) >= best[0] * shrink:
                continue
            cur[k] = m
            dfs(k + 1, r2, c2)
        cur[k] = 0

    exact = True
    try:
        dfs(0, need, 0.0)
    except _Budget:
        exact = False
    out = np.zeros(K, dtype=int)
    out[order] = best[1]
    return best[0], out, exact, (best[0] if exact else root_lb)


def _exhaustive_cover(p, q, need, tol=FEASIBILITY_TOL):
    """Enumerate every subset; returns (cost, mask)."""
    K = len(p)
    if K > EXACT_CAP:
        raise ValueError(f"exhaustive search limited to {EXACT_CAP} outcomes, got {K}")
    sp = np.zeros(1)
    sq = np.zeros(1)
    for k in range(K):
        sp = np.concatenate([sp, sp + p[k]])
        sq = np.concatenate([sq, sq + q[k]])
    feasible = sp >= need - tol
    cost = np.where(feasible, sq, np.inf)
    best = int(np.argmin(cost))
    mask = np.array([(best >> k) & 1 for k in range(K)], dtype=bool)
    return float(cost[best]), mask


def _safe_log(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


def classical_np_exact(
    p,
    q,
    epsilon: float,
    aggregate: bool = True,
    exact_cap: int = EXACT_CAP,
    node_limit: int = NODE_LIMIT,
) -> BetaBracket:
    """Exact min of log q(A) over outcome sets A with p(A) >= 1 - eps.

    Outcomes with identical (p, q) pairs are pooled first; the pooled problem
    is a bounded knapsack that branch and bound solves exactly. If the node
    budget runs out, exhaustive enumeration is used for up to ``exact_cap``
    outcomes; beyond that the bracket is returned with ``exact=False``.
    """
    eps = check_epsilon(epsilon)
    p = check_probability_vector(p, "p")
    q = check_probability_vector(q, "q")
    if p.shape != q.shape:
        raise ValueError(f"length mismatch: {p.size} vs {q.size}")
    need = 1.0 - eps
    if aggregate:
        pc, qc, counts, members = aggregate_outcomes(p, q)
    else:
        pc, qc, counts = p, q, np.ones(p.size, dtype=int)
        members = [np.array([i]) for i in range(p.size)]

    take = np.zeros(len(pc), dtype=int)
    free = (qc <= 0) & (pc > 0)
    take[free] = counts[free]
    need_left = need - float((pc[free] * counts[free]).sum())
    active = np.flatnonzero((pc > 0) & (qc > 0))
    exact, lo_cost = True, 0.0
    if need_left > FEASIBILITY_TOL:
        cost, sub, exact, lo_cost = _min_cover(pc[active], qc[active], counts[active], need_left, node_limit)
        take[active] = sub
        if not exact and int(counts[active].sum()) <= exact_cap:
            idx = np.concatenate([np.full(counts[k], k) for k in active])
            cost, mask = _exhaustive_cover(pc[idx], qc[idx], need_left)
            take[active] = 0
            for k in idx[mask]:
                take[k] += 1
            exact, lo_cost = True, cost

    selected = np.sort(np.concatenate([members[k][: take[k]] for k in range(len(pc))] + [np.array([], int)]))
    selected = selected.astype(int)
    psi_mass = float(p[selected].sum())
    phi_mass = float(q[selected].sum())
    beta_hi = _safe_log(phi_mass)
    beta_lo = beta_hi if exact else _safe_log(lo_cost)
    return BetaBracket(
        epsilon=eps,
        beta_lo=min(beta_lo, beta_hi),
        beta_hi=beta_hi,
        psi_mass=psi_mass,
        phi_mass=phi_mass,
        selected=selected,
        exact=exact,
        method="classical",
    )


# -- quantum brackets --------------------------------------------------------


def _masses(V: np.ndarray, A: np.ndarray, B: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pa = np.einsum("ij,ik,kj->j", V.conj(), A, V).real
    pb = np.einsum("ij,ik,kj->j", V.conj(), B, V).real
    return pa, pb


def np_spectral_curve(Dpsi, Dphi, lambdas: Sequence[float]) -> list[TestPoint]:
    """Error pairs of the tests q_lam = {lam Dpsi - Dphi > 0}."""
    A, B = as_density(Dpsi).matrix, as_density(Dphi).matrix
    check_same_dim(A, B)
    lambdas = np.asarray(lambdas, dtype=float)
    if np.any(lambdas <= 0) or np.any(np.diff(lambdas) < 0):
        raise ValueError("lambdas must be positive and ascending")
    points = []
    for lam in lambdas:
        w, V = np.linalg.eigh(lam * A - B)
        pos = w > _sign_tol(w)
        pa, pb = _masses(V[:, pos], A, B)
        points.append(TestPoint(float(lam), max(0.0, 1.0 - pa.sum()), min(1.0, max(0.0, pb.sum())), int(pos.sum())))
    return points


def _sign_tol(w: np.ndarray) -> float:
    return 1e-12 * max(1.0, float(np.abs(w).max()))


def _is_diagonal(m: np.ndarray, tol: float = COMMUTING_TOL) -> bool:
    return bool(np.abs(m - np.diag(np.diag(m))).max() <= tol)


def common_eigenbasis(A: np.ndarray, B: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis diagonalizing commuting Hermitian A and B."""
    w, V = np.linalg.eigh(B)
    w, V = w[::-1], V[:, ::-1]
    cols = []
    for g in group_eigenvalues(w, tol):
        Vg = V[:, g]
        if len(g) == 1:
            cols.append(Vg)
            continue
        sub = Vg.conj().T @ A @ Vg
        _, u = np.linalg.eigh((sub + sub.conj().T) / 2)
        cols.append(Vg @ u)
    return np.hstack(cols)


def _lambda_grid(A, B, rel: float, n_sites: float, size: int) -> np.ndarray:
    wa = np.linalg.eigvalsh(A)
    wb = np.linalg.eigvalsh(B)
    a_pos = wa[wa > SUPPORT_FLOOR]
    b_pos = wb[wb > SUPPORT_FLOOR]
    span = n_sites * ((rel / n_sites if math.isfinite(rel) else 0.0) + 4.0)
    lo, hi = -span, span
    if b_pos.size and a_pos.size:
        lo = min(lo, math.log(b_pos.min() / a_pos.max()) - 1.0)
        hi = max(hi, math.log(b_pos.max() / a_pos.min()) + 1.0)
    return np.exp(np.linspace(lo, hi, max(size, 2)))


def _lagrangian(A, B, lam: float, need: float) -> float:
    w = np.linalg.eigvalsh(lam * A - B)
    return lam * need - float(w[w > 0].sum())


def _golden_max(f, a: float, b: float, iters: int = 80) -> tuple[float, float]:
    g = (math.sqrt(5) - 1) / 2
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def _classical_bracket_in_basis(A, B, V, eps, node_limit) -> BetaBracket:
    pa, pb = _masses(V, A, B)
    pa = np.clip(pa, 0.0, None)
    pb = np.clip(pb, 0.0, None)
    res = classical_np_exact(pa / pa.sum(), pb / pb.sum(), eps, node_limit=node_limit)
    res.vectors = V[:, res.selected]
    res.psi_mass = float(pa[res.selected].sum())
    res.phi_mass = float(pb[res.selected].sum())
    return res


def beta_bracket(
    Dpsi,
    Dphi,
    epsilon: float,
    lambda_grid_size: int = 200,
    n_sites: float | None = None,
    refine_max_dim: int = 64,
    node_limit: int = NODE_LIMIT,
) -> BetaBracket:
    """Bracket beta_eps for a pair of densities on the same block.

    Commuting pairs are solved exactly over tests diagonal in a common
    eigenbasis. Otherwise ``beta_hi`` is the best feasible projector among the
    spectral tests on a lambda grid, their greedy completions, rank-r
    eigenprojectors of lam*Dpsi - Dphi tuned to the constraint (dimension at
    most ``refine_max_dim``), and exact classical tests in either eigenbasis;
    ``beta_lo`` maximizes the Lagrangian bound over lambda.
    """
    eps = check_epsilon(epsilon)
    A, B = as_density(Dpsi).matrix, as_density(Dphi).matrix
    check_same_dim(A, B)
    dim = A.shape[0]
    need = 1.0 - eps

    if _is_diagonal(A) and _is_diagonal(B):
        res = classical_np_exact(np.clip(np.diag(A).real, 0, None), np.clip(np.diag(B).real, 0, None), eps,
                                 node_limit=node_limit)
        res.vectors = np.eye(dim)[:, res.selected]
        res.method = "commuting"
        return res
    if commutator_norm(A, B) <= COMMUTING_TOL:
        res = _classical_bracket_in_basis(A, B, common_eigenbasis(A, B), eps, node_limit)
        res.method = "commuting"
        return res

    n_sites = max(1.0, math.log2(dim)) if n_sites is None else float(n_sites)
    rel = relative_entropy(A, B)
    grid = _lambda_grid(A, B, rel, n_sites, lambda_grid_size)

    best_val, best_vecs, best_lam = 1.0, np.eye(dim, dtype=complex), None
    best_masses = (1.0, 1.0)

    def offer(vecs: np.ndarray, pa: float, pb: float, lam: float | None):
        nonlocal best_val, best_vecs, best_lam, best_masses
        if pa >= need - FEASIBILITY_TOL and pb < best_val:
            best_val, best_vecs, best_lam, best_masses = pb, vecs, lam, (pa, pb)

    lag = []
    for lam in grid:
        w, V = np.linalg.eigh(lam * A - B)
        pos = w > _sign_tol(w)
        lag.append(lam * need - float(w[pos].sum()))
        pa, pb = _masses(V, A, B)
        offer(V[:, pos], pa[pos].sum(), pb[pos].sum(), float(lam))
        rest = np.flatnonzero(~pos)
        if rest.size and pa[pos].sum() < need - FEASIBILITY_TOL:
            ratio = np.where(pb[rest] > 0, pa[rest] / np.maximum(pb[rest], 1e-300), np.inf)
            chain = rest[np.argsort(-ratio, kind="stable")]
            acc = pa[pos].sum() + np.cumsum(pa[chain])
            hit = np.flatnonzero(acc >= need - FEASIBILITY_TOL)
            if hit.size:
                cols = np.concatenate([np.flatnonzero(pos), chain[: hit[0] + 1]])
                offer(V[:, cols], pa[cols].sum(), pb[cols].sum(), float(lam))

    for basis_of in (B, A):
        _, V = np.linalg.eigh(basis_of)
        cand = _classical_bracket_in_basis(A, B, V, eps, node_limit)
        offer(cand.vectors, cand.psi_mass, cand.phi_mass, None)

    if dim <= refine_max_dim:
        top_psi = np.cumsum(np.sort(np.linalg.eigvalsh(A))[::-1])
        lo, hi = math.log(grid[0]), math.log(grid[-1])
        for r in range(1, dim):
            if top_psi[r - 1] < need - FEASIBILITY_TOL:
                continue
            hit = _rank_family_boundary(A, B, r, need, lo, hi)
            if hit is not None:
                offer(*hit)

    # lower bound: concave Lagrangian, refined around its best grid point
    k = int(np.argmax(lag))
    a = grid[max(k - 1, 0)]
    b = grid[min(k + 1, len(grid) - 1)]
    lam_star, lag_star = _golden_max(lambda x: _lagrangian(A, B, x, need), a, b)
    lag_best = max(lag_star, lag[k])
    beta_hi = _safe_log(best_val)
    beta_lo = min(_safe_log(min(lag_best, 1.0)) if lag_best > 0 else -math.inf, beta_hi)
    return BetaBracket(
        epsilon=eps,
        beta_lo=beta_lo,
        beta_hi=beta_hi,
        psi_mass=float(best_masses[0]),
        phi_mass=float(best_masses[1]),
        selected=np.arange(best_vecs.shape[1]),
        vectors=best_vecs,
        lam=best_lam,
        exact=False,
        method="spectral",
    )


def _rank_family_boundary(A, B, r, need, lo, hi, iters: int = 64):
    """Smallest lam on [e^lo, e^hi] whose top-r eigenprojector of lam*A - B is feasible.

    The psi-mass of that projector is nondecreasing in lam, so bisection on
    log(lam) applies.
    """

    def top(loglam):
        w, V = np.linalg.eigh(math.exp(loglam) * A - B)
        Vr = V[:, -r:]
        pa, pb = _masses(Vr, A, B)
        return Vr, float(pa.sum()), float(pb.sum())

    Vh, pah, pbh = top(hi)
    if pah < need - FEASIBILITY_TOL:
        return None
    Vl, pal, pbl = top(lo)
    if pal >= need - FEASIBILITY_TOL:
        return Vl, pal, pbl, math.exp(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        Vm, pam, pbm = top(mid)
        if pam >= need - FEASIBILITY_TOL:
            hi, Vh, pah, pbh = mid, Vm, pam, pbm
        else:
            lo = mid
    return Vh, pah, pbh, math.exp(hi)


def weak_converse_bound(Dpsi, Dphi, epsilon: float) -> float:
    """(S(Dpsi, Dphi) + log 2) / (1 - eps): no test with psi-mass >= 1 - eps
    has -log phi-mass above this value."""
    eps = check_epsilon(epsilon)
    rel = relative_entropy(Dpsi, Dphi)
    return (rel + math.log(2)) / (1.0 - eps)


# -- Stein scan ----------------------------------------------------------------


@dataclass(frozen=True)
class SteinRow:
    n: int
    beta_lo_per_n: float
    beta_hi_per_n: float
    s_target: float
    gap: float
    converse_bound: float
    converse_ok: bool
    exact: bool


STEIN_COLUMNS = ["n", "beta_lo_per_n", "beta_hi_per_n", "s_target", "gap", "converse_bound", "converse_ok"]


def stein_scan(
    psi: StateModel,
    phi: IID,
    epsilon: float,
    n_max: int,
    n_min: int = 1,
    lambda_grid_size: int = 200,
) -> list[SteinRow]:
    """Per-n brackets of beta_eps/n next to the mean relative entropy."""
    eps = check_epsilon(epsilon)
    target = rate_report(psi, phi).mean_relative_entropy
    rows = []
    for n in range(n_min, n_max + 1):
        if psi.is_classical and phi.is_classical:
            p = psi.sequence_probabilities(n)
            q = phi.sequence_probabilities(n)
            br = classical_np_exact(p / p.sum(), q / q.sum(), eps)
            rel = classical_kl(p / p.sum(), q / q.sum())
        else:
            A, B = psi.block_density(n), phi.block_density(n)
            br = beta_bracket(A, B, eps, lambda_grid_size=lambda_grid_size, n_sites=n)
            rel = relative_entropy(A, B)
        bound = (rel + math.log(2)) / (1.0 - eps) / n
        lo, hi = br.beta_lo / n, br.beta_hi / n
        rows.append(
            SteinRow(
                n=n,
                beta_lo_per_n=lo,
                beta_hi_per_n=hi,
                s_target=target,
                gap=abs(-hi - target),
                converse_bound=bound,
                converse_ok=bool(-lo <= bound + 1e-9),
                exact=br.exact,
            )
        )
    return rows


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_stein_csv(rows: Sequence[SteinRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(STEIN_COLUMNS)
        for r in rows:
            w.writerow([_fmt(getattr(r, c)) for c in STEIN_COLUMNS])


__all__ = [
    "BetaBracket",
    "STEIN_COLUMNS",
    "SteinRow",
    "TestPoint",
    "aggregate_outcomes",
    "beta_bracket",
    "classical_np_exact",
    "common_eigenbasis",
    "np_spectral_curve",
    "stein_scan",
    "weak_converse_bound",
    "write_stein_csv",
]
