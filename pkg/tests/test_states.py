import math

import numpy as np
import pytest

from qstein.entropy import von_neumann_entropy
from qstein.operators import partial_trace
from qstein.states import (
    IID,
    FinitelyCorrelated,
    MarkovLift,
    check_ergodicity,
    cross_term,
    finite_rates,
    rate_report,
    stationary_distribution,
)

H_MARKOV = 0.38352279010702806
S_MARKOV = 0.30962439045291723
S_IID = 0.368064207168497
ROT_CROSS = -0.7803238741323342
S_ROT = 0.3968010840253061


def test_stationary_distribution():
    pi = stationary_distribution(np.array([[0.9, 0.1], [0.2, 0.8]]))
    assert np.abs(pi - [2 / 3, 1 / 3]).max() < 1e-14


def test_markov_marginals_are_stationary(markov):
    p3 = markov.sequence_probabilities(3).reshape(2, 2, 2)
    assert abs(p3.sum() - 1) < 1e-14
    for axis in [(1, 2), (0, 2), (0, 1)]:
        assert np.abs(p3.sum(axis=axis) - markov.pi).max() < 1e-14


def test_rejects_non_stationary_pi():
    with pytest.raises(ValueError):
        MarkovLift(np.array([[0.9, 0.1], [0.2, 0.8]]), pi=np.array([0.5, 0.5]))


def test_closed_form_rates(markov, uniform, skewed, rotated):
    assert abs(rate_report(skewed, uniform).mean_relative_entropy - S_IID) < 1e-12
    rep = rate_report(markov, uniform)
    assert abs(rep.mean_entropy - H_MARKOV) < 1e-12
    assert abs(rep.mean_relative_entropy - S_MARKOV) < 1e-12
    rep = rate_report(rotated, IID.diagonal([0.7, 0.3]))
    assert abs(rep.cross_term - ROT_CROSS) < 1e-12
    assert abs(rep.mean_relative_entropy - S_ROT) < 1e-12


def test_rotated_block_entropy_increment(rotated):
    inc = von_neumann_entropy(rotated.block_density(5)) - von_neumann_entropy(rotated.block_density(4))
    assert abs(inc - H_MARKOV) < 1e-9


def test_cross_term_leak():
    assert cross_term(IID.diagonal([0.5, 0.5]), IID.diagonal([1.0, 0.0])) == -math.inf


def test_finite_rates_classical_matches_dense(markov, uniform):
    h, r = finite_rates(markov, uniform, 4)
    rho = markov.block_density(4)
    assert abs(h - von_neumann_entropy(rho) / 4) < 1e-12
    assert r <= S_MARKOV


def test_fcs_blocks_are_consistent():
    fcs = FinitelyCorrelated.random(2, 2, seed=3)
    b3 = fcs.block_density(3)
    b2 = fcs.block_density(2)
    assert abs(np.trace(b3.matrix).real - 1) < 1e-10
    assert np.abs(partial_trace(b3, [2, 2, 2], [0, 1]).matrix - b2.matrix).max() < 1e-10
    assert np.abs(partial_trace(b3, [2, 2, 2], [1, 2]).matrix - b2.matrix).max() < 1e-10
    assert check_ergodicity(fcs).is_ergodic


def test_ergodicity_verdicts(markov):
    assert check_ergodicity(markov).kind == "ergodic"
    cyc = MarkovLift(np.array([[0.0, 1.0], [1.0, 0.0]]))
    v = check_ergodicity(cyc)
    assert v.kind == "periodic" and v.period == 2 and v.is_ergodic
    red = MarkovLift(np.eye(2), pi=np.array([0.5, 0.5]))
    assert check_ergodicity(red).kind == "reducible"
