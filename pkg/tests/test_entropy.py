import math

import numpy as np
from hypothesis import given, settings, strategies as st
from scipy.linalg import logm

from qstein.entropy import (
    classical_kl,
    mean_relative_entropy_sequence,
    relative_entropy,
    shannon_entropy,
    von_neumann_entropy,
)
from qstein.operators import random_density, random_unitary

S_IID = 0.368064207168497  # log 2 - H(0.9)


def logm_relative_entropy(a, b):
    return float(np.trace(a @ (logm(a) - logm(b))).real)


def test_entropy_of_uniform():
    assert abs(von_neumann_entropy(np.eye(4) / 4) - math.log(4)) < 1e-14
    assert von_neumann_entropy(np.diag([1.0, 0.0])) == 0.0


def test_shannon_matches_von_neumann_on_diagonal():
    p = np.array([0.5, 0.3, 0.2])
    assert abs(shannon_entropy(p) - von_neumann_entropy(np.diag(p))) < 1e-14


def test_relative_entropy_closed_form():
    assert abs(relative_entropy(np.diag([0.9, 0.1]), np.eye(2) / 2) - S_IID) < 1e-12


def test_support_violation_is_infinite():
    assert relative_entropy(np.diag([0.5, 0.5]), np.diag([1.0, 0.0])) == math.inf
    assert classical_kl([0.5, 0.5], [1.0, 0.0]) == math.inf


def test_kernel_of_sigma_is_allowed():
    assert abs(relative_entropy(np.diag([1.0, 0.0]), np.diag([0.5, 0.5])) - math.log(2)) < 1e-14


def test_matches_logm_oracle(rng):
    for _ in range(10):
        a = random_density(4, rng).matrix
        b = random_density(4, rng).matrix
        assert abs(relative_entropy(a, b) - logm_relative_entropy(a, b)) < 1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000), st.integers(2, 5))
def test_klein_and_unitary_invariance(seed, d):
    rng = np.random.default_rng(seed)
    a = random_density(d, rng).matrix
    b = random_density(d, rng).matrix
    u = random_unitary(d, rng)
    s = relative_entropy(a, b)
    assert s >= 0
    assert relative_entropy(a, a) < 1e-10
    assert abs(relative_entropy(u @ a @ u.conj().T, u @ b @ u.conj().T) - s) < 1e-9


def test_mean_sequence_for_markov(markov, uniform):
    seq = mean_relative_entropy_sequence(markov, uniform, 6)
    assert seq.monotone
    vals = [v for _, v in seq.values]
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))
    assert vals[-1] <= 0.30962439045291723 + 1e-12


def test_mean_sequence_truncates_at_infinite(skewed):
    from qstein.states import IID

    seq = mean_relative_entropy_sequence(IID.diagonal([0.5, 0.5]), IID.diagonal([1.0, 0.0]), 4)
    assert seq.truncated_at == 1
    assert seq.values[-1][1] == math.inf
