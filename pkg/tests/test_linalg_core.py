import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from einsdrop.linalg_core import (
    DensityOperator,
    LinalgError,
    Projector,
    StateVector,
    UnitaryOperator,
    basis_state,
    dagger,
    haar_random_unitary,
    kron,
    matrix_element,
    partial_trace,
    reduced_state,
)
from oracles import kron_loop, partial_trace_loop

X = np.array([[0, 1], [1, 0]], dtype=complex)
I2 = np.eye(2)


def random_matrix(rng, m, n):
    return rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))


def random_pure(rng, d):
    v = random_matrix(rng, d, 1)[:, 0]
    return v / np.linalg.norm(v)


def test_kron_identity_and_pauli():
    assert_allclose(kron(I2, I2), np.eye(4))
    expected = np.block([[np.zeros((2, 2)), I2], [I2, np.zeros((2, 2))]])
    assert_allclose(kron(X, I2), expected)


def test_kron_matches_loop(rng):
    a, b = random_matrix(rng, 2, 2), random_matrix(rng, 2, 2)
    assert_allclose(kron(a, b), kron_loop(a, b), atol=1e-15)
    c = random_matrix(rng, 3, 2)
    assert_allclose(kron(c, a), kron_loop(c, a), atol=1e-15)


def test_kron_associative_and_mixed_product(rng):
    a, b, c, d = (random_matrix(rng, 2, 2) for _ in range(4))
    assert np.max(np.abs(kron(kron(a, b), c) - kron(a, kron(b, c)))) < 1e-12
    assert_allclose(kron(a, b) @ kron(c, d), kron(a @ c, b @ d), atol=1e-12)


def test_dagger(rng):
    assert_allclose(dagger(np.eye(3)), np.eye(3))
    a = random_matrix(rng, 3, 4)
    assert_allclose(dagger(dagger(a)), a)
    u = haar_random_unitary(5, rng)
    assert_allclose(dagger(u) @ u.matrix, np.eye(5), atol=1e-12)


def test_partial_trace_of_product_state(rng):
    va, vb = random_pure(rng, 2), random_pure(rng, 3)
    ra, rb = np.outer(va, va.conj()), np.outer(vb, vb.conj())
    assert_allclose(partial_trace(kron(ra, rb), [2, 3], keep={0}).matrix, ra, atol=1e-14)
    assert_allclose(partial_trace(kron(ra, rb), [2, 3], keep={1}).matrix, rb, atol=1e-14)


def test_partial_trace_matches_loop_oracle(rng):
    psi = random_pure(rng, 8)
    rho = np.outer(psi, psi.conj())
    for keep in ({0, 1}, {0}, {1, 2}, {0, 2}):
        got = partial_trace(rho, [2, 2, 2], keep).matrix
        assert_allclose(got, partial_trace_loop(rho, [2, 2, 2], keep), atol=1e-14)


def test_partial_trace_mixed_dims_keep_order(rng):
    psi = random_pure(rng, 2 * 3 * 2)
    rho = np.outer(psi, psi.conj())
    got = partial_trace(rho, [2, 3, 2], {2, 0}).matrix
    assert_allclose(got, partial_trace_loop(rho, [2, 3, 2], {0, 2}), atol=1e-14)


def test_reduced_state_equals_partial_trace(rng):
    psi = StateVector((2, 3, 2), random_pure(rng, 12))
    rho = np.outer(psi.amplitudes, psi.amplitudes.conj())
    for keep in ({0}, {1}, {0, 2}):
        assert_allclose(reduced_state(psi, keep).matrix,
                        partial_trace(rho, psi.dims, keep).matrix, atol=1e-14)


def test_partial_trace_errors():
    with pytest.raises(LinalgError):
        partial_trace(np.eye(4) / 4, [2, 3], {0})
    with pytest.raises(LinalgError):
        partial_trace(np.eye(4) / 4, [2, 2], set())
    with pytest.raises(LinalgError):
        partial_trace(np.eye(4) / 4, [2, 2], {5})


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), rank=st.integers(1, 4),
       keep=st.sampled_from([{0}, {1}, {2}, {0, 1}, {1, 2}, {0, 2}]))
def test_partial_trace_preserves_state_properties(seed, rank, keep):
    rng = np.random.default_rng(seed)
    g = random_matrix(rng, 12, rank)
    rho = g @ g.conj().T
    rho /= np.trace(rho)
    red = partial_trace(rho, [2, 3, 2], keep).matrix
    assert abs(np.trace(red) - 1) < 1e-9
    assert np.max(np.abs(red - red.conj().T)) < 1e-12
    assert np.linalg.eigvalsh(red).min() >= -1e-8


def test_haar_d1_is_phase():
    u = haar_random_unitary(1, np.random.default_rng(3)).matrix
    assert u.shape == (1, 1)
    assert abs(abs(u[0, 0]) - 1) < 1e-12


@pytest.mark.parametrize("d", [2, 20, 200])
def test_haar_unitarity(d):
    u = haar_random_unitary(d, np.random.default_rng(d)).matrix
    assert np.max(np.abs(u.conj().T @ u - np.eye(d))) < 1e-9


def test_haar_first_moment():
    # E|U_11|^2 = 1/d for Haar unitaries
    rng = np.random.default_rng(7)
    vals = [abs(haar_random_unitary(2, rng).matrix[0, 0]) ** 2 for _ in range(10_000)]
    assert abs(np.mean(vals) - 0.5) < 0.02


def test_haar_phase_distribution_is_uniform():
    # without the R-diagonal phase fix the diagonal phases of Q pile up
    rng = np.random.default_rng(11)
    phases = np.array([np.angle(haar_random_unitary(3, rng).matrix[0, 0]) for _ in range(4000)])
    assert abs(np.mean(np.cos(phases))) < 0.05
    assert abs(np.mean(np.sin(phases))) < 0.05


def test_haar_seeded_reproducible():
    a = [haar_random_unitary(4, np.random.default_rng(5)).matrix for _ in range(2)]
    assert np.array_equal(a[0], a[1])
    r1, r2 = np.random.default_rng(9), np.random.default_rng(9)
    for _ in range(3):
        assert np.array_equal(haar_random_unitary(6, r1).matrix, haar_random_unitary(6, r2).matrix)


def test_matrix_element(rng):
    k0 = basis_state([2], [0])
    assert matrix_element(k0, np.eye(2), k0) == pytest.approx(1)
    assert matrix_element(k0, X, k0) == pytest.approx(0)
    u = haar_random_unitary(4, rng).matrix
    e0 = basis_state([4], [0])
    assert matrix_element(e0, u, e0) == u[0, 0]
    with pytest.raises(LinalgError):
        matrix_element(k0, np.eye(3), k0)


def test_types_validate():
    with pytest.raises(LinalgError):
        StateVector((2,), [1, 1])
    with pytest.raises(LinalgError):
        UnitaryOperator(np.array([[1, 1], [0, 1]]))
    with pytest.raises(LinalgError):
        Projector(np.array([[1, 1], [0, 0]]))
    with pytest.raises(LinalgError):
        DensityOperator(np.diag([1.5, -0.5]))
    with pytest.raises(LinalgError):
        UnitaryOperator(np.array([[np.nan]]))
    p = Projector(np.diag([1, 0, 1]))
    assert p.rank == 2 and p.complement().rank == 1


def test_types_are_immutable():
    u = UnitaryOperator(np.eye(2))
    with pytest.raises(ValueError):
        u.matrix[0, 0] = 2
