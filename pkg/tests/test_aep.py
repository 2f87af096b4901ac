import math

import numpy as np
import pytest

from qstein.aep import (
    AtomTable,
    WindowSpec,
    build_separating_projector,
    classical_llr_trajectories,
    markov_divergence_rate,
    truncate_spectrum,
    window_membership,
)
from qstein.operators import tensor_power
from qstein.states import IID, MarkovLift

P = np.array([[0.9, 0.1], [0.2, 0.8]])
H09 = 0.3250829733914482


def test_llr_is_reproducible():
    a = classical_llr_trajectories(P, [0.5, 0.5], 50, 20, seed=3)
    b = classical_llr_trajectories(P, [0.5, 0.5], 50, 20, seed=3)
    c = classical_llr_trajectories(P, [0.5, 0.5], 50, 20, seed=4)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)
    # trial t does not depend on how many trials are drawn
    d = classical_llr_trajectories(P, [0.5, 0.5], 50, 5, seed=3)
    assert np.array_equal(a.values[:5], d.values)


def test_llr_matches_direct_evaluation():
    s = classical_llr_trajectories(P, [0.6, 0.4], 6, 1, seed=11)
    from qstein.aep import sample_chain

    x = sample_chain(P, MarkovLift(P).pi, 6, 1, 11)[0]
    probs = MarkovLift(P).sequence_probabilities(6)
    idx = int("".join(map(str, x)), 2)
    q = np.prod([[0.6, 0.4][i] for i in x])
    assert abs(s.values[0] - math.log(probs[idx] / q) / 6) < 1e-12


def test_llr_equal_chain_has_zero_target():
    s = classical_llr_trajectories(np.array([[0.3, 0.7], [0.3, 0.7]]), [0.3, 0.7], 400, 50, seed=0)
    assert s.target == 0.0
    assert abs(s.mean) < 4 * s.std_error + 1e-12


def test_llr_flags_infinite():
    s = classical_llr_trajectories(P, [1.0, 0.0], 20, 10, seed=0)
    assert s.infinite > 0 and s.target == math.inf


def test_llr_rejects_non_stochastic():
    with pytest.raises(ValueError):
        classical_llr_trajectories(np.array([[0.9, 0.2], [0.2, 0.8]]), [0.5, 0.5], 10, 2, 0)


def test_divergence_rate_closed_form():
    assert abs(markov_divergence_rate(P, [0.5, 0.5]) - 0.30962439045291723) < 1e-14


def binomial_table(n, p):
    k = np.arange(n + 1)
    return AtomTable(
        n,
        (1 - p) ** (n - k) * p**k,
        np.full(n + 1, 2.0**-n),
        np.array([math.comb(n, int(j)) for j in k]),
    )


def test_window_mass_binomial_vs_enumeration():
    spec = WindowSpec(H09, 0.2, "entropy")
    agg = window_membership(binomial_table(10, 0.1), spec)
    full = window_membership(AtomTable(10, IID.diagonal([0.9, 0.1]).sequence_probabilities(10), np.full(1024, 2**-10)), spec)
    assert abs(agg.mass - 0.38742048900000015) < 1e-12
    assert abs(full.mass - agg.mass) < 1e-12


def test_window_edge_cases():
    uni = AtomTable(6, np.full(64, 2**-6), np.full(64, 2**-6))
    assert window_membership(uni, WindowSpec(math.log(2), 1e-6, "entropy")).mass == pytest.approx(1.0, abs=1e-12)
    assert window_membership(uni, WindowSpec(5.0, 0.1, "entropy")).mass == 0.0
    with pytest.raises(ValueError):
        WindowSpec(0.0, 0.0)


def test_separating_projector_uniform(uniform):
    rep = build_separating_projector(uniform, uniform, 5, 0.01)
    assert len(rep.selected) == 32
    assert abs(rep.psi_mass - 1) < 1e-12 and abs(rep.phi_mass - 1) < 1e-12


def test_separating_projector_binomial(skewed, uniform):
    rep = build_separating_projector(skewed, uniform, 12, 0.15)
    assert abs(rep.psi_mass - 0.6067004857740002) < 1e-12
    assert len(rep.selected) == 78
    assert abs(rep.phi_mass - 78 / 4096) < 1e-15
    assert rep.window_bounds_ok()
    phi_trace = np.trace(tensor_power(np.eye(2) / 2, 12).matrix @ rep.projector()).real
    assert abs(phi_trace - rep.phi_mass) < 1e-10


def test_selection_is_window_intersection(markov, uniform):
    rep = build_separating_projector(markov, uniform, 9, 0.2)
    a = window_membership(rep.atoms, rep.windows[0]).mask
    b = window_membership(rep.atoms, rep.windows[1]).mask
    assert set(np.flatnonzero(a & b)) == set(rep.selected)


def test_capture_grows_with_window(rotated):
    phi = IID.diagonal([0.7, 0.3])
    masses = [build_separating_projector(rotated, phi, 6, e).psi_mass for e in (0.05, 0.1, 0.25, 0.5)]
    assert all(b >= a - 1e-12 for a, b in zip(masses, masses[1:]))


def test_rotated_report_invariants(rotated):
    phi = IID.diagonal([0.7, 0.3])
    rep = build_separating_projector(rotated, phi, 6, 0.25)
    assert rep.window_bounds_ok()
    q = rep.projector()
    assert np.abs(q @ q - q).max() < 1e-10
    assert abs(np.trace(rotated.block_density(6).matrix @ q).real - rep.psi_mass) < 1e-10
    assert abs(np.trace(phi.block_density(6).matrix @ q).real - rep.phi_mass) < 1e-10


def test_truncation_examples():
    t = truncate_spectrum(np.eye(16), np.eye(16) / 16, 0.1, math.log(2), 4)
    assert len(t.discarded) == 0 and t.discarded_mass == 0.0
    pure = tensor_power(np.diag([1.0, 0.0]), 4)
    t = truncate_spectrum(np.eye(16), pure, 0.1, 0.0, 4)
    assert len(t.discarded) == 0


def test_truncation_dense_matches_diagonal(rotated):
    rho = rotated.block_density(4).matrix
    t = truncate_spectrum(np.eye(16), rho, 0.05, 0.38352279010702806, 4)
    w = np.linalg.eigvalsh(rho)
    assert abs(t.discarded_mass - w[w > t.threshold].sum()) < 1e-12
    assert len(t.kept) + len(t.discarded) == 16
