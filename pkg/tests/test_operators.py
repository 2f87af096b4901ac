import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qstein.operators import (
    DensityOperator,
    DimensionCapError,
    HermitianOperator,
    log_on_support,
    partial_trace,
    random_density,
    random_unitary,
    spectral_decompose,
    support_projector,
    tensor_power,
)


def test_rejects_non_hermitian():
    with pytest.raises(ValueError):
        HermitianOperator([[1, 1], [0, 1]])


def test_rejects_bad_trace_and_negative():
    with pytest.raises(ValueError):
        DensityOperator(np.diag([0.6, 0.6]))
    with pytest.raises(ValueError):
        DensityOperator(np.diag([1.2, -0.2]))


def test_operator_is_read_only():
    rho = DensityOperator(np.diag([0.5, 0.5]))
    with pytest.raises(ValueError):
        rho.matrix[0, 0] = 1.0


def test_spectral_groups_degenerate_eigenvalues():
    sd = spectral_decompose(np.diag([0.25, 0.5, 0.25]))
    assert sd.multiplicities == [1, 2]
    assert np.abs(sd.eigenvalues - [0.5, 0.25]).max() < 1e-15
    assert np.abs(sd.reconstruct() - np.diag([0.25, 0.5, 0.25])).max() < 1e-14


def test_spectral_projectors_resolve_identity(rng):
    rho = random_density(6, rng).matrix
    sd = spectral_decompose(rho)
    assert np.abs(sum(sd.projectors) - np.eye(6)).max() < 1e-12
    for p in sd.projectors:
        assert np.abs(p @ p - p).max() < 1e-12
    assert np.abs(sd.reconstruct() - rho).max() < 1e-12


def test_tensor_power_matches_kron():
    rho = np.array([[0.7, 0.2], [0.2, 0.3]])
    t = tensor_power(rho, 3).matrix
    assert np.abs(t - np.kron(np.kron(rho, rho), rho)).max() < 1e-15
    assert abs(np.trace(t) - 1) < 1e-12


def test_dimension_cap_refuses_before_allocation():
    with pytest.raises(DimensionCapError) as info:
        tensor_power(np.diag([0.5, 0.5]), 14)
    assert info.value.required == 2**14


def test_partial_trace_of_product(rng):
    a = random_density(2, rng).matrix
    b = random_density(3, rng).matrix
    c = random_density(2, rng).matrix
    abc = np.kron(np.kron(a, b), c)
    assert np.abs(partial_trace(abc, [2, 3, 2], [1]).matrix - b).max() < 1e-12
    assert np.abs(partial_trace(abc, [2, 3, 2], [0, 2]).matrix - np.kron(a, c)).max() < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 3))
def test_partial_trace_preserves_trace(seed, keep):
    rng = np.random.default_rng(seed)
    rho = random_density(8, rng)
    red = partial_trace(rho, [2, 2, 2], range(keep))
    assert abs(np.trace(red.matrix).real - 1) < 1e-12
    assert red.eigenvalues.min() >= 0


def test_log_on_support_kernel_maps_to_zero():
    L = log_on_support(np.diag([0.5, 0.5, 0.0])).matrix
    assert np.abs(L - np.diag([np.log(0.5), np.log(0.5), 0.0])).max() < 1e-14
    assert np.abs(support_projector(np.diag([0.5, 0.5, 0.0])) - np.diag([1, 1, 0])).max() < 1e-14


def test_random_unitary_is_unitary(rng):
    u = random_unitary(5, rng)
    assert np.abs(u.conj().T @ u - np.eye(5)).max() < 1e-12
