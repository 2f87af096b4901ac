"""Acceptance criteria 1-10, each at its stated tolerance.

Every part records a verdict; the terminal summary prints one line per
criterion. Parts that are not met fail here rather than being relaxed.
"""

import math
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import record
from qstein.aep import build_separating_projector, classical_llr_trajectories, truncate_spectrum
from qstein.cli import main
from qstein.ergodic import component_audit, gl_decompose, scaled_relative_rate
from qstein.operators import random_density, tensor_power
from qstein.pinching import build_type_classes, cross_term_identity_check, hiai_petz_audit
from qstein.states import IID, MarkovLift, RotatedMarkovLift, hadamard
from qstein.testing import beta_bracket, classical_np_exact, stein_scan

P = np.array([[0.9, 0.1], [0.2, 0.8]])
PHI1 = np.diag([0.7, 0.3])
S_IID = 0.368064
S_MARKOV = 0.309624
CONFIGS = Path(__file__).resolve().parents[1] / "configs"


@pytest.fixture(scope="module")
def hiai_petz_runs():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    audits = [(n, hiai_petz_audit(random_density(2**n, rng), PHI1, n)) for n in range(1, 6) for _ in range(20)]
    return audits, time.perf_counter() - t0


def test_c1_identity(hiai_petz_runs):
    audits, elapsed = hiai_petz_runs
    worst = max(a.residual for _, a in audits)
    gaps_ok = all(0 <= a.pinch_gap <= 2 * math.log(n + 1) for n, a in audits)
    ok = record(1, "residual", worst <= 1e-8, f"max={worst:.2e}")
    ok &= record(1, "pinch_gap", gaps_ok)
    ok &= record(1, "runtime", elapsed <= 60, f"{elapsed:.1f}s")
    assert ok


def test_c2_monotonicity_chain(hiai_petz_runs):
    audits, _ = hiai_petz_runs
    slack = max(max(a.kl_abelian - a.kl_refined, a.kl_refined - a.lhs) for _, a in audits)
    assert record(2, "chain", slack <= 1e-9, f"max violation={slack:.2e}")


def test_c3_cross_term():
    rng = np.random.default_rng(7)
    worst = 0.0
    for i in range(50):
        n = 1 + i % 3
        tcd = build_type_classes(PHI1, n)
        worst = max(worst, cross_term_identity_check(random_density(2**n, rng), tcd))
    assert record(3, "residual", worst <= 1e-9, f"max={worst:.2e}")


def test_c4_relative_aep():
    t0 = time.perf_counter()
    big = classical_llr_trajectories(P, [0.5, 0.5], 2000, 200, seed=1)
    small = classical_llr_trajectories(P, [0.5, 0.5], 200, 200, seed=1)
    elapsed = time.perf_counter() - t0
    z = abs(big.mean - S_MARKOV) / big.std_error
    ok = record(4, "mean", z <= 3, f"mean={big.mean:.6f} z={z:.2f}")
    ok &= record(4, "variance", big.variance < small.variance, f"{big.variance:.2e}<{small.variance:.2e}")
    ok &= record(4, "runtime", elapsed <= 30, f"{elapsed:.1f}s")
    assert ok


def _stein_checks(label, psi, target, n_ref):
    t0 = time.perf_counter()
    rows = stein_scan(psi, IID.diagonal([0.5, 0.5]), 0.1, 12)
    elapsed = time.perf_counter() - t0
    assert abs(rows[0].s_target - target) < 1e-6
    gap12 = abs(-rows[11].beta_hi_per_n - target)
    gap_ref = abs(-rows[n_ref - 1].beta_hi_per_n - target)
    ok = record(5, f"{label}_trend", gap12 < gap_ref, f"gap12={gap12:.4f} gap{n_ref}={gap_ref:.4f}")
    ok &= record(5, f"{label}_converse", all(r.converse_ok for r in rows))
    ok &= record(5, f"{label}_runtime", elapsed <= 120, f"{elapsed:.1f}s")
    return ok


def test_c5_stein_markov():
    assert _stein_checks("markov", MarkovLift(P), S_MARKOV, 4)


def test_c5_stein_iid():
    assert _stein_checks("iid", IID.diagonal([0.9, 0.1]), S_IID, 2)


def test_c6_commuting_collapse():
    worst = 0.0
    for probs, n in (([0.9, 0.1], 12), ([0.6, 0.3, 0.1], 7), ([0.7, 0.3], 9)):
        d = len(probs)
        A = tensor_power(np.diag(probs), n)
        ref_probs = np.full(d, 1.0 / d)
        B = tensor_power(np.diag(ref_probs), n)
        b = beta_bracket(A, B, 0.1)
        ref = classical_np_exact(IID.diagonal(probs).sequence_probabilities(n),
                                 IID.diagonal(ref_probs).sequence_probabilities(n), 0.1)
        worst = max(worst, abs(b.beta_hi - b.beta_lo), abs(b.beta_hi - ref.beta_hi))
    assert record(6, "commuting", worst <= 1e-10, f"max={worst:.1e} (dims up to 4096)")


def _sphere_scan(A, B, eps, N=10_000):
    i = np.arange(N) + 0.5
    th = np.arccos(1 - 2 * i / N)
    ph = np.pi * (1 + 5**0.5) * i
    v = np.stack([np.cos(th / 2), np.exp(1j * ph) * np.sin(th / 2)], axis=1)
    pa = np.einsum("ni,ij,nj->n", v.conj(), A, v).real
    pb = np.einsum("ni,ij,nj->n", v.conj(), B, v).real
    ok = pa >= 1 - eps
    # identity is always feasible
    return min(0.0, math.log(pb[ok].min())) if ok.any() else 0.0


def test_c6_qubit_scan():
    H = hadamard()
    pairs = [(H @ np.diag([2 / 3, 1 / 3]) @ H.conj().T, PHI1, 0.15)]
    rng = np.random.default_rng(6)
    for _ in range(10):
        pairs.append((random_density(2, rng).matrix, random_density(2, rng).matrix, float(rng.uniform(0.05, 0.5))))
    diffs = [abs(beta_bracket(A, B, e).beta_hi - _sphere_scan(A, B, e)) for A, B, e in pairs]
    worst = max(diffs)
    bad = sum(d > 1e-3 for d in diffs)
    assert record(6, "qubit_scan", worst <= 1e-3, f"max={worst:.1e} over {len(pairs)} pairs, {bad} above 1e-3")


def test_c7_iid_projector():
    reps = [build_separating_projector(IID.diagonal([0.9, 0.1]), IID.diagonal([0.5, 0.5]), n, 0.15) for n in (4, 8, 12)]
    masses = [r.psi_mass for r in reps]
    ok = record(7, "iid_windows", all(r.window_bounds_ok(1e-12) for r in reps))
    ok &= record(7, "iid_monotone", masses[0] <= masses[1] <= masses[2], "masses=" + ",".join(f"{m:.4f}" for m in masses))
    ok &= record(7, "iid_mass_n12", masses[2] >= 0.9, f"{masses[2]:.4f}")
    assert ok


def test_c7_rotated_projector():
    psi = RotatedMarkovLift(P, unitary=hadamard())
    phi = IID.diagonal(np.diag(PHI1))
    r4 = build_separating_projector(psi, phi, 4, 0.25)
    r8 = build_separating_projector(psi, phi, 8, 0.25)
    q = r8.projector()
    sums = abs(r8.psi_mass - r8.atoms.psi_weights[r8.selected].sum()) <= 1e-10
    sums &= abs(r8.phi_mass - r8.atoms.phi_weights[r8.selected].sum()) <= 1e-10
    traces = abs(np.trace(psi.block_density(8).matrix @ q).real - r8.psi_mass) <= 1e-10
    ok = record(7, "rotated_invariants", r8.window_bounds_ok(1e-12) and sums and traces)
    ok &= record(7, "rotated_monotone", r8.psi_mass >= r4.psi_mass, f"{r4.psi_mass:.4f}->{r8.psi_mass:.4f}")
    assert ok


def test_c8_truncation():
    psi, phi = MarkovLift(P), IID.diagonal([0.5, 0.5])
    splits = {}
    for n in (5, 10):
        rep = build_separating_projector(psi, phi, n, 0.25)
        splits[n] = truncate_spectrum(rep.projector(), psi.block_density(n), 0.1, rep.s_psi, n)
    ok = record(8, "decay", splits[10].discarded_mass < splits[5].discarded_mass,
                f"{splits[5].discarded_mass:.4f}->{splits[10].discarded_mass:.4f}")
    ok &= record(8, "count_bound", all(s.count_ok for s in splits.values()))
    assert ok


def test_c9_ergodic():
    uniform = IID.diagonal([0.5, 0.5])
    dec = gl_decompose(MarkovLift(np.array([[0.0, 1.0], [1.0, 0.0]])), 2)
    audit = component_audit(dec, uniform, 6)
    ok = record(9, "k_l", dec.k_l == 2 and 2 % dec.k_l == 0)
    ok &= record(9, "mixture", audit.mixture_error <= 1e-10, f"{audit.mixture_error:.1e}")
    ok &= record(9, "entropy_zero", all(r.entropy_rate == 0.0 for r in audit.rows)
                 and all(h == 0.0 for h, _ in audit.closed_form))
    ok &= record(9, "aperiodic", gl_decompose(MarkovLift(P), 2).k_l == 1)
    lhs, rhs = scaled_relative_rate(MarkovLift(P), uniform, 2)
    ok &= record(9, "scaling", abs(lhs - rhs) <= 1e-9, f"{abs(lhs - rhs):.1e}")
    assert ok


def test_c10_determinism(tmp_path):
    same = True
    for cfg in sorted(CONFIGS.glob("*.ini")):
        outs = []
        for k in range(2):
            d = tmp_path / f"{cfg.stem}_{k}"
            assert main(["--config", str(cfg), "--out", str(d)]) in (0, 1)
            outs.append({p.name: p.read_bytes() for p in sorted(d.glob("*.csv"))})
        same &= outs[0] == outs[1] and len(outs[0]) == 2
    assert record(10, "byte_identical", same, f"{len(list(CONFIGS.glob('*.ini')))} configs")
