import numpy as np
import pytest

from coherentfb.algebra import (DoubledMatrix, delta, flat, from_quadrature, ito_matrix,
                                quadrature_basis, signature, structure_constants, symplectic,
                                to_quadrature)
from oracles import doubled, quadrature_unitary, random_doubled


def test_delta_identity_and_swap():
    n = 3
    assert np.array_equal(delta(np.eye(n), np.zeros((n, n))).expand(), np.eye(2 * n))
    swap = delta(np.zeros((n, n)), np.eye(n)).expand()
    Z, I = np.zeros((n, n)), np.eye(n)
    assert np.array_equal(swap, np.block([[Z, I], [I, Z]]))


def test_delta_layout_conjugates_lower_blocks(rng):
    U = rng.normal(size=(2, 3)) + 1j * rng.normal(size=(2, 3))
    V = rng.normal(size=(2, 3)) + 1j * rng.normal(size=(2, 3))
    X = delta(U, V)
    assert X.shape == (4, 6)
    assert np.array_equal(X.expand(), doubled(U, V))


def test_delta_cavity_field_coupling():
    kappa = 2.6 + 0.2 + 0.2
    C = delta(np.sqrt(kappa)).expand()
    assert np.allclose(C, np.sqrt(3.0) * np.eye(2))


def test_delta_shape_mismatch():
    with pytest.raises(ValueError):
        delta(np.eye(2), np.eye(3))


def test_product_closure(rng):
    X = DoubledMatrix.from_matrix(random_doubled(rng, 2, 3))
    Y = DoubledMatrix.from_matrix(random_doubled(rng, 3, 1))
    P = X @ Y
    assert isinstance(P, DoubledMatrix)
    assert np.allclose(P.expand(), X.expand() @ Y.expand())
    # the product really is doubled-up
    DoubledMatrix.from_matrix(X.expand() @ Y.expand(), tol=1e-12)


def test_sum_difference_and_real_scaling(rng):
    X = DoubledMatrix.from_matrix(random_doubled(rng, 2, 2))
    Y = DoubledMatrix.from_matrix(random_doubled(rng, 2, 2))
    assert np.allclose((X + Y).expand(), X.expand() + Y.expand())
    assert np.allclose((X - Y).expand(), X.expand() - Y.expand())
    assert np.allclose((-X).expand(), -X.expand())
    assert np.allclose((2.5 * X).expand(), 2.5 * X.expand())


def test_from_matrix_rejects_non_doubled(rng):
    X = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    with pytest.raises(ValueError, match="not doubled-up"):
        DoubledMatrix.from_matrix(X)
    with pytest.raises(ValueError, match="even"):
        DoubledMatrix.from_matrix(np.eye(3))


def test_structure_constants_identities():
    for n in (1, 2, 4):
        c = structure_constants(n)
        assert np.allclose(c.J @ c.J, np.eye(2 * n))
        assert np.allclose(c.Theta @ c.Theta, -np.eye(2 * n))
        assert np.allclose(c.Lambda @ c.Lambda.conj().T, np.eye(2 * n))
        assert np.allclose(c.Lambda, quadrature_unitary(n))
        assert not c.J.flags.writeable


def test_ito_matrix_blocks():
    F = ito_matrix(2)
    assert np.array_equal(F[:2, :2], np.zeros((2, 2)))
    assert np.array_equal(F[2:, 2:], np.eye(2))
    assert np.array_equal(F[:2, 2:], np.zeros((2, 2)))
    assert structure_constants(1, 3).F.shape == (6, 6)


def test_flat_of_identity():
    assert np.array_equal(flat(np.eye(4)), np.eye(4))


def test_flat_involution(rng):
    X = rng.normal(size=(4, 6)) + 1j * rng.normal(size=(4, 6))
    assert np.allclose(flat(flat(X)), X)
    assert flat(X).shape == (6, 4)


def test_flat_of_delta_matches_block_formula(rng):
    # hand expansion: J Delta(U,V)^dagger J = Delta(U^dagger, -V^T)
    for _ in range(5):
        U = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        V = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        assert np.allclose(flat(delta(U, V).expand()), doubled(U.conj().T, -V.T))
        assert np.allclose(flat(delta(U, V)), doubled(U.conj().T, -V.T))


def test_flat_anti_homomorphism(rng):
    X, Y = random_doubled(rng, 2, 3), random_doubled(rng, 3, 2)
    assert np.allclose(flat(X @ Y), flat(Y) @ flat(X))


def test_flat_rejects_odd():
    with pytest.raises(ValueError, match="odd"):
        flat(np.eye(3))


def test_quadrature_of_rotation_generator():
    w = 1.7
    got = to_quadrature(delta(-1j * w).expand())
    assert np.allclose(got, w * symplectic(1))


def test_quadrature_of_identity():
    assert np.allclose(to_quadrature(np.eye(4)), np.eye(4))


def test_quadrature_cavity_matrix():
    kappa, w = 3.0, 0.7
    got = to_quadrature(delta(-kappa / 2 - 1j * w).expand())
    assert np.allclose(got, [[-kappa / 2, w], [-w, -kappa / 2]])


def test_quadrature_oracle_and_round_trip(rng):
    X = random_doubled(rng, 2, 3)
    L2, L3 = quadrature_unitary(2), quadrature_unitary(3)
    Xq = to_quadrature(X)
    assert Xq.dtype == float
    assert np.allclose(Xq, (L2 @ X @ L3.conj().T).real)
    assert np.allclose(from_quadrature(Xq), X)
    assert np.allclose(quadrature_basis(2), L2)


def test_quadrature_preserves_eigenvalues(rng):
    X = random_doubled(rng, 3, 3)
    a = np.linalg.eigvals(X)
    b = np.linalg.eigvals(to_quadrature(X))
    # match each eigenvalue to its nearest partner
    assert max(np.abs(b - x).min() for x in a) < 1e-10
    assert max(np.abs(a - x).min() for x in b) < 1e-10


def test_quadrature_rejects_non_doubled(rng):
    X = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    with pytest.raises(ValueError, match="not doubled-up"):
        to_quadrature(X)


def test_quadrature_explicit_channel_counts():
    with pytest.raises(ValueError, match="does not match"):
        to_quadrature(np.eye(4), rows=1, cols=2)
    assert to_quadrature(np.eye(4), rows=2, cols=2).shape == (4, 4)


def test_signature():
    assert np.array_equal(signature(2), np.diag([1, 1, -1, -1]))
