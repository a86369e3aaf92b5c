import numpy as np
import pytest

from coherentfb.algebra import delta, flat, symplectic, to_quadrature
from coherentfb.model import (Controller, FieldChannel, GeneralModel, PlantModel, SystemMatrices,
                              build, coupling_blocks, gamma, natural_Q, parameters_from_matrices)
from coherentfb.realizability import check_annihilation, check_plant
from oracles import doubled


def test_gamma_cavity_damping():
    g_minus, g_plus = gamma(np.sqrt(3.0), 0.0)
    assert np.allclose(g_minus, 1.5) and np.allclose(g_plus, 0.0)


def test_gamma_zero():
    g_minus, g_plus = gamma(np.zeros((1, 2)), np.zeros((1, 2)))
    assert not g_minus.any() and not g_plus.any()
    assert g_minus.shape == (2, 2)


def test_gamma_amplifier():
    kappa, gam = 4.0, 1.0
    g_minus, g_plus = gamma(np.sqrt(kappa), np.sqrt(gam))
    assert np.allclose(g_minus, (kappa - gam) / 2) and np.allclose(g_plus, 0.0)


def test_gamma_formula_random(rng):
    Cm = rng.normal(size=(3, 2)) + 1j * rng.normal(size=(3, 2))
    Cp = rng.normal(size=(3, 2)) + 1j * rng.normal(size=(3, 2))
    g_minus, g_plus = gamma(Cm, Cp)
    assert np.allclose(g_minus, 0.5 * (Cm.conj().T @ Cm - Cp.T @ Cp.conj()))
    assert np.allclose(g_plus, 0.5 * (Cm.conj().T @ Cp - Cp.T @ Cm.conj()))


def test_build_cavity():
    kappa, w = 2.0, 0.5
    S = build(GeneralModel(w, c_minus=np.sqrt(kappa)))
    assert np.allclose(S.A, doubled(-kappa / 2 - 1j * w, 0))
    assert np.allclose(S.B_f, -np.sqrt(kappa) * np.eye(2))
    assert np.allclose(S.C_f, np.sqrt(kappa) * np.eye(2))
    assert S.B_d.shape == (2, 0)


def test_build_dpa():
    kappa, eps = 2.0, 1.0
    S = build(GeneralModel(0.0, 1j * eps / 2, np.sqrt(kappa)))
    assert np.allclose(S.A, -0.5 * doubled(kappa, -eps))


def test_build_all_zero():
    S = build(GeneralModel(np.zeros((2, 2))))
    assert not S.A.any()
    assert S.B_f.shape == (4, 0) and S.C_f.shape == (0, 4)


def test_build_direct_input_matrix():
    km, kp = np.array([[0.3, 0.1]]), np.array([[0.2j, 0.0]])
    S = build(GeneralModel(np.eye(2), k_minus=km, k_plus=kp))
    assert np.allclose(S.B_d, -flat(delta(km, kp)))


def test_general_model_validation():
    with pytest.raises(ValueError, match="Hermitian"):
        GeneralModel(np.array([[0, 1], [0, 0]]))
    with pytest.raises(ValueError, match="symmetric"):
        GeneralModel(np.eye(2), np.array([[0, 1], [0, 0]]))
    with pytest.raises(ValueError, match="columns"):
        GeneralModel(np.eye(2), c_minus=np.ones((1, 3)))
    with pytest.raises(ValueError, match="performance"):
        GeneralModel(np.eye(1), c_p=np.ones((2, 3)))


def test_natural_Q_examples():
    kappa, eps, gam = 2.0, 0.5, 1.0
    assert np.allclose(natural_Q(GeneralModel(0.3, c_minus=np.sqrt(kappa))), kappa * np.eye(2))
    Qd = natural_Q(GeneralModel(0.0, 1j * eps / 2, np.sqrt(kappa)))
    assert np.allclose(Qd, doubled(kappa, -eps))
    assert np.linalg.eigvalsh(Qd).min() >= 0
    Qbad = natural_Q(GeneralModel(0.0, 1j * 3.0 / 2, np.sqrt(kappa)))
    assert np.linalg.eigvalsh(Qbad).min() < 0
    Qa = natural_Q(GeneralModel(0.0, c_minus=np.sqrt(4.0), c_plus=np.sqrt(gam)))
    assert np.allclose(Qa, (4.0 - gam) * np.eye(2))


def test_build_satisfies_realizability(rng):
    H = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    S0 = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    G = GeneralModel(H + H.conj().T, S0 + S0.T, rng.normal(size=(3, 2)), 1j * rng.normal(size=(3, 2)))
    S = build(G)
    resid = S.A + flat(S.A) + flat(S.C_f) @ S.C_f
    assert np.abs(resid).max() < 1e-10
    assert check_annihilation(S.A, S.B_f, S.C_f).verdict


def test_parameters_round_trip(rng):
    H = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    S0 = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    G = GeneralModel(H + H.conj().T, S0 + S0.T, rng.normal(size=(1, 2)), rng.normal(size=(1, 2)),
                     rng.normal(size=(1, 2)), rng.normal(size=(1, 2)))
    S = build(G)
    G2 = parameters_from_matrices(S.A, S.B_f, S.C_f, S.B_d)
    for name in ("omega_minus", "omega_plus", "c_minus", "c_plus", "k_minus", "k_plus"):
        assert np.allclose(getattr(G2, name), getattr(G, name)), name


def test_parameters_reject_bad_input():
    A = doubled(-1.0, 0.0)
    with pytest.raises(ValueError, match="B_f"):
        parameters_from_matrices(A, B_f=np.eye(2), C_f=np.eye(2))
    with pytest.raises(ValueError):
        parameters_from_matrices(np.array([[1, 2], [3, 4j]]))


def test_coupling_blocks():
    km, kp = np.array([[0.4]]), np.array([[0.3j]])
    B12, B21 = coupling_blocks(km, kp)
    assert np.allclose(B21, doubled(km, kp))
    assert np.allclose(B12, -flat(B21))


def test_system_matrices_representation_round_trip():
    S = build(GeneralModel(0.5, c_minus=1.0))
    Sq = S.to("quadrature")
    assert Sq.representation == "quadrature" and Sq.A.dtype == float
    assert np.allclose(Sq.to("annihilation").A, S.A)
    assert np.allclose(Sq.A, to_quadrature(S.A))


def test_input_matrix_ordering():
    S = build(GeneralModel(np.eye(1), c_minus=[[1.0]], k_minus=[[2.0]]))
    B = S.input_matrix
    # columns are [v, w, v#, w#]
    assert np.allclose(B[:, 0], S.B_d[:, 0]) and np.allclose(B[:, 1], S.B_f[:, 0])
    assert np.allclose(B[:, 2], S.B_d[:, 1]) and np.allclose(B[:, 3], S.B_f[:, 1])


def test_plant_shape_checks():
    I = np.eye(2)
    with pytest.raises(ValueError, match="D_f"):
        PlantModel(-I, B_f=I, C=I, D_f=np.eye(3), representation="quadrature")
    P = PlantModel(-I, representation="quadrature")
    assert P.B_u.shape == (2, 0) and P.C.shape == (0, 2) and P.n == 2


def test_plant_from_channels_is_realizable():
    chans = [FieldChannel(np.sqrt(0.2), role="disturbance", output="measurement"),
             FieldChannel(np.sqrt(2.6), role="noise"),
             FieldChannel(np.sqrt(0.2), role="control", output="performance")]
    P = PlantModel.from_channels(0.0, chans)
    assert P.B_f.shape == P.B_v.shape == P.B_u.shape == (2, 2)
    assert np.allclose(P.A, -1.5 * np.eye(2))
    assert np.allclose(P.C, np.sqrt(0.2) * np.eye(2))
    assert np.allclose(P.D_f, np.eye(2)) and not P.D_v.any()
    assert np.allclose(P.C_p, np.sqrt(0.2) * np.eye(2)) and np.allclose(P.D_u, np.eye(2))
    assert check_plant(P).verdict
    Pq = PlantModel.from_channels(0.0, chans, representation="quadrature")
    assert Pq.representation == "quadrature"
    assert np.allclose(Pq.A, -1.5 * np.eye(2))


def test_plant_from_channels_rejects_measured_control():
    with pytest.raises(ValueError, match="control channel"):
        PlantModel.from_channels(0.0, [FieldChannel(1.0, role="control", output="measurement")])


def test_controller_partner_quadrature(rng):
    B12 = rng.normal(size=(2, 4))
    K = Controller(-np.eye(4), representation="quadrature").with_coupling(B12)
    assert np.allclose(K.B_21, symplectic(2) @ B12.T @ symplectic(1))


def test_controller_partner_annihilation_matches_quadrature():
    km, kp = np.array([[0.4]]), np.array([[0.3j]])
    B12, _ = coupling_blocks(km, kp)
    K = Controller(-np.eye(2, dtype=complex), B_12=B12)
    assert np.allclose(K.B_21, -flat(B12))
    Kq = K.to("quadrature")
    assert np.allclose(Kq.B_21, Controller.partner(Kq.B_12, "quadrature"))


def test_controller_defaults_and_shapes():
    K = Controller(-np.eye(2), np.eye(2), np.eye(2), representation="quadrature", n_plant=2)
    assert np.array_equal(K.B_K0, np.eye(2))
    assert K.B_12.shape == (2, 2) and not K.B_12.any()
    assert not K.with_coupling(np.ones((2, 2))).without_coupling().B_12.any()
    with pytest.raises(ValueError, match="B_K"):
        Controller(-np.eye(2), np.eye(3), representation="quadrature")


def test_arrays_are_read_only():
    S = build(GeneralModel(0.0, c_minus=1.0))
    assert isinstance(S, SystemMatrices)
    with pytest.raises(ValueError):
        S.A[0, 0] = 1.0
